"""Exact imaginary-time evolution of population vectors.

Under normalized imaginary-time evolution ``exp(-H tau)|psi>`` the level
populations follow the closed form

    p_i(tau) = p_i(0) exp(-2 E_i tau) / Z(tau),   Z(tau) = sum_j p_j(0) exp(-2 E_j tau)

so no integration is needed.  ``tau`` is measured in inverse energy units.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional, Sequence

import numpy as np

from . import _roots
from .errors import InvalidInputError
from .spectrum import UNDERFLOW_CLAMP, DistanceFunction, EnergySpectrum, PopulationVector

# distances below this are reported as exactly zero
DISTANCE_FLOOR = 1e-15


def _check_lengths(n: int, *others) -> None:
    for other in others:
        if len(other) != n:
            raise InvalidInputError(
                f"length mismatch: {len(other)} levels vs {n} levels"
            )


def _shifted_weights(p: np.ndarray, energies: np.ndarray, taus: np.ndarray) -> np.ndarray:
    """Unnormalized weights ``p_i exp(-2 (E_i - E_ref) tau)`` for each tau (rows).

    ``E_ref`` is the lowest occupied level for forward times and the highest
    occupied one for backward times, so the reference weight never underflows.
    """
    occupied = p > 0
    occ_idx = np.nonzero(occupied)[0]
    e_lo = energies[occ_idx[0]]
    e_hi = energies[occ_idx[-1]]
    taus = np.asarray(taus, dtype=float)
    e_ref = np.where(taus >= 0, e_lo, e_hi)
    exponent = -2.0 * (energies[None, :] - e_ref[:, None]) * taus[:, None]
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        w = np.where(occupied[None, :], p[None, :] * np.exp(np.where(occupied[None, :], exponent, 0.0)), 0.0)
    return w


def population_curve(
    initial: PopulationVector,
    spectrum: EnergySpectrum,
    taus: Sequence[float],
) -> np.ndarray:
    """Populations at every ``tau`` as a ``(len(taus), n)`` array.

    Negative times are allowed here (backward evolution); public entry points
    decide whether to accept them.
    """
    _check_lengths(spectrum.level_count, initial)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    w = _shifted_weights(initial.populations, spectrum.energies, taus)
    w = np.where(w < UNDERFLOW_CLAMP, 0.0, w)
    out = w / w.sum(axis=1, keepdims=True)
    # tau == 0 must reproduce the input bit for bit
    out[taus == 0] = initial.populations
    return out


def evolve(
    initial: PopulationVector,
    spectrum: EnergySpectrum,
    tau: float,
    allow_backward: bool = False,
) -> PopulationVector:
    """Populations after imaginary time ``tau``.

    Negative ``tau`` (backward evolution, which amplifies excited levels) is
    rejected unless ``allow_backward`` is set.
    """
    _check_lengths(spectrum.level_count, initial)
    if not math.isfinite(tau):
        raise InvalidInputError("tau must be finite")
    if tau < 0 and not allow_backward:
        raise InvalidInputError(
            f"tau={tau} is negative; pass allow_backward=True for backward evolution"
        )
    if initial.populations[0] <= 0 and not allow_backward:
        raise InvalidInputError("initial ground-state population is zero; QITE does not converge")
    if tau == 0:
        return initial
    return PopulationVector(population_curve(initial, spectrum, [tau])[0])


def partition_function(
    initial: PopulationVector,
    spectrum: EnergySpectrum,
    tau: float,
) -> float:
    """``Z(tau) = sum_j p_j(0) exp(-2 E_j tau)``."""
    _check_lengths(spectrum.level_count, initial)
    if not math.isfinite(tau):
        raise InvalidInputError("tau must be finite")
    with np.errstate(over="ignore", under="ignore"):
        return float(np.sum(initial.populations * np.exp(-2.0 * spectrum.energies * tau)))


def distance(
    state: PopulationVector,
    df: DistanceFunction,
    floor: float = DISTANCE_FLOOR,
) -> float:
    """``D_f = sum_i p_i f(E_i)``; values under ``floor`` read as 0."""
    _check_lengths(len(df), state)
    value = float(np.dot(state.populations, df.weights))
    return 0.0 if value < floor else value


def distance_curve(
    initial: PopulationVector,
    spectrum: EnergySpectrum,
    df: DistanceFunction,
    taus: Sequence[float],
) -> np.ndarray:
    """Unfloored ``D_f(tau)`` along the exact trajectory, one value per tau.

    Evaluated as a ratio of weighted sums, so it keeps full relative accuracy
    even when the distance itself is astronomically small.
    """
    _check_lengths(spectrum.level_count, initial, df)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    w = _shifted_weights(initial.populations, spectrum.energies, taus)
    return (w @ df.weights) / w.sum(axis=1)


# below this many occupied levels a plain-float loop beats numpy call overhead
_SCALAR_LOOP_MAX = 32


def distance_evaluator(
    initial: PopulationVector,
    spectrum: EnergySpectrum,
    df: DistanceFunction,
) -> Callable[[float], float]:
    """Scalar ``tau -> D_f(tau)`` for use inside root finders (``tau >= 0``).

    Same shifted evaluation as :func:`distance_curve`, specialised for one
    time point at a time.
    """
    _check_lengths(spectrum.level_count, initial, df)
    p = initial.populations
    occ = np.nonzero(p > 0)[0]
    e = spectrum.energies[occ] - spectrum.energies[occ[0]]
    terms = list(zip(p[occ].tolist(), (-2.0 * e).tolist(), df.weights[occ].tolist()))
    if len(terms) > _SCALAR_LOOP_MAX:
        return lambda t: float(distance_curve(initial, spectrum, df, [t])[0])
    exp = math.exp

    def fn(t: float) -> float:
        num = den = 0.0
        for pi, rate, wi in terms:
            x = pi * exp(rate * t)
            num += x * wi
            den += x
        return num / den

    return fn


def population_derivative(state: PopulationVector, spectrum: EnergySpectrum) -> np.ndarray:
    """``dp_i/dtau = -2 (E_i - <E>) p_i`` at the given state."""
    _check_lengths(spectrum.level_count, state)
    p = state.populations
    e = spectrum.energies
    mean_e = float(np.dot(p, e))
    return -2.0 * (e - mean_e) * p


def threshold_time(
    initial: PopulationVector,
    spectrum: EnergySpectrum,
    df: DistanceFunction,
    epsilon: float,
    xtol: float = 1e-12,
) -> float:
    """First ``tau`` at which ``D_f(tau) = epsilon`` (0 if already below).

    Uses bisection on the exact, strictly decreasing distance curve.
    """
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be positive")
    d0 = float(distance_curve(initial, spectrum, df, [0.0])[0])
    if d0 <= epsilon:
        return 0.0

    d = distance_evaluator(initial, spectrum, df)

    def g(t: float) -> float:
        return d(t) - epsilon

    hi = 1.0 / float(spectrum.energies[-1])
    while g(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            raise InvalidInputError("distance never reaches epsilon")
    return float(_roots.bisect(g, 0.0, hi, xtol=xtol))


@dataclass(frozen=True)
class GridSpec:
    """Sampling grid over ``[0, tau_max]``.

    Geometric grids start at ``tau_max * min_fraction`` (``0`` is always
    prepended), since crossing times of interest span decades.
    """

    kind: Literal["geometric", "linear"] = "geometric"
    points: int = 400
    min_fraction: float = 1e-4

    def __post_init__(self):
        if self.kind not in ("geometric", "linear"):
            raise InvalidInputError(f"unknown grid kind {self.kind!r}")
        if self.points < 2:
            raise InvalidInputError("a grid needs at least 2 points")
        if not 0 < self.min_fraction < 1:
            raise InvalidInputError("min_fraction must lie in (0, 1)")

    def taus(self, tau_max: float) -> np.ndarray:
        if not (tau_max > 0 and math.isfinite(tau_max)):
            raise InvalidInputError("tau_max must be positive and finite")
        if self.kind == "linear":
            return np.linspace(0.0, tau_max, self.points)
        if self.points == 2:
            return np.array([0.0, tau_max])
        geo = np.geomspace(tau_max * self.min_fraction, tau_max, self.points - 1)
        return np.concatenate(([0.0], geo))


@dataclass(frozen=True)
class Trajectory:
    taus: np.ndarray
    states: list = field(repr=False)
    distances: Optional[np.ndarray] = None

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        if taus.ndim != 1 or taus.size != len(self.states):
            raise InvalidInputError("taus and states must have matching lengths")
        if np.any(np.diff(taus) <= 0):
            raise InvalidInputError("trajectory times must be strictly increasing")
        if self.distances is not None and len(self.distances) != taus.size:
            raise InvalidInputError("distances and taus must have matching lengths")

    def population_matrix(self) -> np.ndarray:
        return np.array([s.populations for s in self.states])

    def columns(self) -> list[str]:
        n = len(self.states[0])
        cols = ["tau"] + [f"p_{i}" for i in range(n)]
        if self.distances is not None:
            cols.append("distance")
        return cols

    def rows(self) -> list[list[float]]:
        out = []
        for k, (t, s) in enumerate(zip(self.taus, self.states)):
            row = [float(t)] + s.populations.tolist()
            if self.distances is not None:
                row.append(float(self.distances[k]))
            out.append(row)
        return out


def sample_trajectory(
    initial: PopulationVector,
    spectrum: EnergySpectrum,
    df: Optional[DistanceFunction],
    tau_max: float,
    grid: Optional[GridSpec] = None,
) -> Trajectory:
    if initial.populations[0] <= 0:
        raise InvalidInputError("initial ground-state population is zero; QITE does not converge")
    grid = grid or GridSpec()
    taus = grid.taus(tau_max)
    pops = population_curve(initial, spectrum, taus)
    states = [PopulationVector(row) for row in pops]
    states[0] = initial
    distances = None
    if df is not None:
        distances = distance_curve(initial, spectrum, df, taus)
        distances = np.where(distances < DISTANCE_FLOOR, 0.0, distances)
    return Trajectory(taus, states, distances)
