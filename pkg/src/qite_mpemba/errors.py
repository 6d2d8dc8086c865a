"""Exception hierarchy.

``InvalidInputError`` marks malformed inputs (bad vectors, bad configs).
``InapplicableError`` marks well-formed inputs for which an analysis has no
answer, e.g. a certificate whose hypotheses fail.
"""


class QiteMpembaError(Exception):
    """Base class for all package errors."""


class InvalidInputError(QiteMpembaError, ValueError):
    pass


class NotHotterError(InvalidInputError):
    """The state passed as "hot" is not strictly farther from the ground state.

    Raised separately so callers can swap the arguments and retry.
    """


class InapplicableError(QiteMpembaError):
    pass
