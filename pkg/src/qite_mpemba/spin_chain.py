"""Periodic XYZ spin chain and the forward/backward pre-evolution protocol.

    H = -sum_j (X_j X_{j+1} + gamma Y_j Y_{j+1} + mu Z_j Z_{j+1}),   site L+1 == site 1

Everything is real: ``Y (x) Y`` has real matrix elements and the tilt
rotation ``exp(-i theta/2 Y)`` is a real orthogonal matrix.  Site 0 is the
most significant bit of a basis index, so the tilted product state is the
Kronecker power of the single-site vector.

Time convention: amplitudes here are propagated with ``exp(-H t/2)``, so the
populations pick up ``exp(-E t)``.  In population space that is
``evolve(p, spectrum, t/2)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import eigensolver
from .errors import InvalidInputError
from .spectrum import EnergySpectrum, PopulationVector, canonicalize_many

MIN_SITES = 2
MAX_SITES = 12
# largest chain handled by the in-repo solver under the "auto" setting
IN_REPO_SOLVER_MAX_SITES = 10
CHAIN_RELATIVE_MERGE = 1e-8
# squared overlaps below this are rounding noise (symmetry-forbidden levels)
POPULATION_NOISE_FLOOR = 1e-20
NORM_TOLERANCE = 1e-12


@dataclass(frozen=True)
class SpinChainConfig:
    sites: int
    mu: float
    theta: float
    gamma: float = 1.0
    tau_pre: float = 0.0

    def __post_init__(self):
        if isinstance(self.sites, bool) or int(self.sites) != self.sites:
            raise InvalidInputError("sites must be an integer")
        if not MIN_SITES <= self.sites <= MAX_SITES:
            raise InvalidInputError(
                f"sites={self.sites} out of range [{MIN_SITES}, {MAX_SITES}]"
            )
        for name in ("mu", "theta", "gamma", "tau_pre"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite")
        if self.tau_pre < 0:
            raise InvalidInputError("tau_pre must be nonnegative")

    @property
    def dimension(self) -> int:
        return 1 << self.sites


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=float).ravel()
        norm = float(np.linalg.norm(a))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise InvalidInputError(f"state norm is {norm}, expected 1")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def normalized(cls, amplitudes) -> "StateVector":
        a = np.asarray(amplitudes, dtype=float)
        norm = float(np.linalg.norm(a))
        if not norm > 0 or not math.isfinite(norm):
            raise InvalidInputError("cannot normalize a zero or non-finite vector")
        return cls(a / norm)

    def __len__(self) -> int:
        return int(self.amplitudes.size)


@dataclass(frozen=True, eq=False)
class SpinChainSystem:
    """A diagonalized chain Hamiltonian; immutable and safe to share."""

    sites: int
    gamma: float
    mu: float
    hamiltonian: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dimension(self) -> int:
        return int(self.hamiltonian.shape[0])


def xyz_hamiltonian(sites: int, gamma: float, mu: float) -> np.ndarray:
    """Dense periodic XYZ Hamiltonian built from bit-flip actions on basis indices.

    ``X_a X_b`` flips both bits; ``Y_a Y_b`` flips them with phase
    ``-s_a s_b``; ``Z_a Z_b`` is diagonal ``s_a s_b``, where ``s = 1 - 2 bit``.
    """
    if not MIN_SITES <= sites <= MAX_SITES:
        raise InvalidInputError(f"sites={sites} out of range [{MIN_SITES}, {MAX_SITES}]")
    dim = 1 << sites
    idx = np.arange(dim)
    h = np.zeros((dim, dim))
    for j in range(sites):
        a, b = j, (j + 1) % sites
        bit_a = sites - 1 - a
        bit_b = sites - 1 - b
        ss = (1 - 2 * ((idx >> bit_a) & 1)) * (1 - 2 * ((idx >> bit_b) & 1))
        flipped = idx ^ ((1 << bit_a) | (1 << bit_b))
        h[idx, idx] -= mu * ss
        h[idx, flipped] -= 1.0 - gamma * ss
    return h


def _diagonalize(h: np.ndarray, sites: int, solver: str) -> tuple[np.ndarray, np.ndarray]:
    if solver == "auto":
        solver = "householder-ql" if sites <= IN_REPO_SOLVER_MAX_SITES else "lapack"
    if solver == "householder-ql":
        dec = eigensolver.eigh(h)
        return dec.eigenvalues, dec.eigenvectors
    if solver == "lapack":
        values, vectors = np.linalg.eigh(h)
        worst = float(eigensolver.residuals(h, values, vectors).max())
        if worst > 1e-9 * float(np.linalg.norm(h)):
            raise eigensolver.EigensolverError(f"eigen-residual {worst:.3e} too large")
        values.setflags(write=False)
        vectors.setflags(write=False)
        return values, vectors
    raise InvalidInputError(f"unknown solver {solver!r}")


def build_hamiltonian(
    config: SpinChainConfig,
    gamma_override: Optional[float] = None,
    solver: str = "auto",
) -> SpinChainSystem:
    """Assemble and diagonalize the chain; ``gamma_override`` replaces ``config.gamma``.

    ``solver`` is ``"householder-ql"`` (in-repo), ``"lapack"`` or ``"auto"``,
    which picks the in-repo solver up to 10 sites.
    """
    gamma = config.gamma if gamma_override is None else float(gamma_override)
    if not math.isfinite(gamma):
        raise InvalidInputError("gamma must be finite")
    h = xyz_hamiltonian(config.sites, gamma, config.mu)
    h.setflags(write=False)
    values, vectors = _diagonalize(h, config.sites, solver)
    return SpinChainSystem(config.sites, gamma, config.mu, h, values, vectors)


def tilted_state(config: SpinChainConfig) -> StateVector:
    """``exp(-i theta/2 sum_j Y_j)|00...0>``: every site in ``(cos theta/2, sin theta/2)``."""
    site = np.array([math.cos(config.theta / 2), math.sin(config.theta / 2)])
    amps = site
    for _ in range(config.sites - 1):
        amps = np.kron(amps, site)
    return StateVector(amps)


class Direction(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"


def imaginary_propagate(
    state: StateVector,
    system: SpinChainSystem,
    duration: float,
    direction: Direction = Direction.FORWARD,
) -> StateVector:
    """Normalized ``exp(-H duration/2)|psi>`` (forward) or ``exp(+H duration/2)|psi>`` (backward)."""
    if len(state) != system.dimension:
        raise InvalidInputError(
            f"state has {len(state)} amplitudes, system dimension is {system.dimension}"
        )
    if not (duration >= 0 and math.isfinite(duration)):
        raise InvalidInputError("duration must be nonnegative and finite")
    direction = Direction(direction)
    if duration == 0:
        return state
    v = system.eigenvectors
    coeffs = v.T @ state.amplitudes
    lam = system.eigenvalues
    sign = -1.0 if direction is Direction.FORWARD else 1.0
    exponent = sign * lam * duration / 2.0
    # shift by the extremal eigenvalue so the largest factor is exactly 1
    exponent -= exponent.max()
    with np.errstate(under="ignore"):
        scaled = coeffs * np.exp(exponent)
    return StateVector.normalized(v @ scaled)


def populations_of(
    state: StateVector,
    system: SpinChainSystem,
    merge_tolerance: Optional[float] = None,
    noise_floor: float = POPULATION_NOISE_FLOOR,
) -> tuple[EnergySpectrum, PopulationVector]:
    """Squared eigenbasis overlaps on the merged, ground-shifted spectrum.

    Degenerate multiplets are merged at ``1e-8`` of the spectral width by
    default; overlaps below ``noise_floor`` are zeroed.
    """
    if len(state) != system.dimension:
        raise InvalidInputError(
            f"state has {len(state)} amplitudes, system dimension is {system.dimension}"
        )
    p = (system.eigenvectors.T @ state.amplitudes) ** 2
    p = np.where(p < noise_floor, 0.0, p)
    lam = system.eigenvalues
    if merge_tolerance is None:
        merge_tolerance = CHAIN_RELATIVE_MERGE * float(lam[-1] - lam[0])
    spectrum, (vector,) = canonicalize_many(lam, [p], merge_tolerance)
    return spectrum, vector


def prepare_hotter_state(
    config: SpinChainConfig,
    gamma0: float,
    reference: Optional[SpinChainSystem] = None,
) -> StateVector:
    """Forward evolution under ``gamma0`` then backward under ``config.gamma``, each for ``tau_pre``.

    ``reference`` may pass an already diagonalized ``config.gamma`` system.
    """
    if gamma0 == config.gamma:
        raise InvalidInputError("gamma0 must differ from the reference gamma")
    psi = tilted_state(config)
    if config.tau_pre == 0:
        return psi
    h0 = build_hamiltonian(config, gamma_override=gamma0)
    h1 = reference if reference is not None else build_hamiltonian(config)
    psi = imaginary_propagate(psi, h0, config.tau_pre, Direction.FORWARD)
    return imaginary_propagate(psi, h1, config.tau_pre, Direction.BACKWARD)


@dataclass(frozen=True, eq=False)
class ChainPreparation:
    """Hot (pre-evolved) and cold (tilted) states on the reference chain's spectrum."""

    system: SpinChainSystem
    spectrum: EnergySpectrum
    hot: PopulationVector
    cold: PopulationVector


def prepare_pair(config: SpinChainConfig, gamma0: float) -> ChainPreparation:
    system = build_hamiltonian(config)
    hot_state = prepare_hotter_state(config, gamma0, reference=system)
    spectrum, hot = populations_of(hot_state, system)
    _, cold = populations_of(tilted_state(config), system)
    return ChainPreparation(system, spectrum, hot, cold)
