"""Imaginary-time relaxation of level populations and the quantum Mpemba effect."""

from .analysis import (
    CrossingReport,
    FiniteTimeCertificate,
    MpembaVerdict,
    check_mpemba,
    crossing_estimate_details,
    estimate_crossing,
    find_crossings,
    general_f_certificate,
    max_acceleration_time,
    theorem2_certificate,
)
from .collinearity import CollinearFamily, evolved_lambda, simultaneous_crossing
from .dynamics import (
    GridSpec,
    Trajectory,
    distance,
    evolve,
    population_derivative,
    sample_trajectory,
    threshold_time,
)
from .errors import InapplicableError, InvalidInputError, NotHotterError, QiteMpembaError
from .spectrum import (
    DistanceFunction,
    DistanceKind,
    EnergySpectrum,
    PopulationVector,
    canonicalize_spectrum,
    make_distance,
)
from .spin_chain import (
    Direction,
    SpinChainConfig,
    build_hamiltonian,
    imaginary_propagate,
    populations_of,
    prepare_hotter_state,
    tilted_state,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
