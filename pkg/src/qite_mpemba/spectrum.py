"""Energy spectra, population vectors and distance functions.

Everything here lives in population space: a state is described by the
probabilities ``p_i`` of finding it in energy level ``i``.  Amplitudes never
appear outside :mod:`qite_mpemba.spin_chain`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidInputError

SUM_TOLERANCE = 1e-12
# populations below this are flushed to zero (avoids subnormal arithmetic)
UNDERFLOW_CLAMP = 1e-300
DEFAULT_RELATIVE_MERGE = 1e-9


def _frozen(values: Sequence[float]) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class EnergySpectrum:
    """Strictly increasing energies shifted so that the ground level sits at 0.

    The shift is applied on construction: ``EnergySpectrum([-1, 0, 2])`` has
    energies ``(0, 1, 3)``.  Degenerate inputs are rejected here; merge them
    with :func:`canonicalize_spectrum` first.
    """

    energies: np.ndarray

    def __post_init__(self):
        e = np.array(self.energies, dtype=float).ravel()
        if e.size < 2:
            raise InvalidInputError("a spectrum needs at least two levels")
        if not np.all(np.isfinite(e)):
            raise InvalidInputError("energies must be finite")
        if np.any(np.diff(e) <= 0):
            raise InvalidInputError(
                "energies must be strictly increasing; merge degeneracies "
                "with canonicalize_spectrum"
            )
        if e[0] != 0.0:
            e = e - e[0]
        object.__setattr__(self, "energies", _frozen(e))

    @property
    def level_count(self) -> int:
        return int(self.energies.size)

    def __len__(self) -> int:
        return self.level_count

    def __repr__(self) -> str:
        return f"EnergySpectrum({self.energies.tolist()})"


@dataclass(frozen=True, eq=False)
class PopulationVector:
    """Probabilities over energy levels.

    The constructor only validates; use :meth:`from_weights` to normalize
    arbitrary nonnegative weights.
    """

    populations: np.ndarray

    def __post_init__(self):
        p = np.array(self.populations, dtype=float).ravel()
        if p.size == 0:
            raise InvalidInputError("population vector is empty")
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("populations must be finite")
        if np.any(p < 0):
            raise InvalidInputError(f"negative population in {p.tolist()}")
        total = float(p.sum())
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise InvalidInputError(
                f"populations sum to {total!r}, expected 1 within {SUM_TOLERANCE}"
            )
        object.__setattr__(self, "populations", _frozen(p))

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "PopulationVector":
        w = np.array(weights, dtype=float).ravel()
        if np.any(w < 0):
            raise InvalidInputError(f"negative population in {w.tolist()}")
        w = np.where(w < UNDERFLOW_CLAMP, 0.0, w)
        total = w.sum()
        if not total > 0:
            raise InvalidInputError("all populations are zero")
        return cls(w / total)

    @property
    def ground(self) -> float:
        return float(self.populations[0])

    def ratios(self) -> np.ndarray:
        """``p_i / p_0`` for every level (entry 0 is 1)."""
        if self.populations[0] <= 0:
            raise InvalidInputError("ground-state population is zero")
        return self.populations / self.populations[0]

    def lowest_occupied_excited(self, start: int = 1) -> Optional[int]:
        """Index of the first occupied level at or above ``start``, or None."""
        occupied = np.nonzero(self.populations[start:] > 0)[0]
        return int(occupied[0]) + start if occupied.size else None

    def __len__(self) -> int:
        return int(self.populations.size)

    def __repr__(self) -> str:
        return f"PopulationVector({self.populations.tolist()})"


class DistanceKind(str, enum.Enum):
    INFIDELITY = "infidelity"
    AVERAGE_ENERGY = "average_energy"
    CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class DistanceFunction:
    """Level weights ``f(E_i)``; the distance of a state is ``sum p_i f(E_i)``."""

    weights: np.ndarray
    kind: DistanceKind = DistanceKind.CUSTOM

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).ravel()
        if w.size < 2:
            raise InvalidInputError("distance weights need at least two levels")
        if not np.all(np.isfinite(w)):
            raise InvalidInputError("distance weights must be finite")
        if w[0] != 0.0:
            raise InvalidInputError("distance weight of the ground level must be 0")
        if not w[1] > 0.0:
            raise InvalidInputError("distance weight of the first excited level must be > 0")
        if np.any(np.diff(w) < 0):
            raise InvalidInputError("distance weights must be nondecreasing")
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "kind", DistanceKind(self.kind))

    def __len__(self) -> int:
        return int(self.weights.size)


def make_distance(
    spectrum: EnergySpectrum,
    kind: DistanceKind | str,
    custom_weights: Optional[Sequence[float]] = None,
) -> DistanceFunction:
    kind = DistanceKind(kind)
    n = spectrum.level_count
    if kind is DistanceKind.INFIDELITY:
        weights = np.ones(n)
        weights[0] = 0.0
    elif kind is DistanceKind.AVERAGE_ENERGY:
        weights = spectrum.energies.copy()
    else:
        if custom_weights is None:
            raise InvalidInputError("custom distance requires weights")
        weights = np.asarray(custom_weights, dtype=float)
        if weights.size != n:
            raise InvalidInputError(
                f"custom weights have {weights.size} entries, spectrum has {n} levels"
            )
    return DistanceFunction(weights, kind)


def canonicalize_many(
    raw_energies: Sequence[float],
    raw_populations: Sequence[Sequence[float]],
    merge_tolerance: Optional[float] = None,
) -> tuple[EnergySpectrum, list[PopulationVector]]:
    """Canonicalize several population vectors that share one raw spectrum.

    Energies are sorted, runs of neighbours closer than ``merge_tolerance``
    collapse into a single level (their populations add), the lowest level is
    shifted to zero and every vector is renormalized.  The merged level keeps
    the mean energy of its group.
    """
    e = np.asarray(raw_energies, dtype=float).ravel()
    if e.size == 0:
        raise InvalidInputError("empty energy list")
    if not np.all(np.isfinite(e)):
        raise InvalidInputError("energies must be finite")
    pops = [np.asarray(p, dtype=float).ravel() for p in raw_populations]
    for p in pops:
        if p.size != e.size:
            raise InvalidInputError(
                f"{p.size} populations given for {e.size} energies"
            )
        if np.any(p < 0):
            raise InvalidInputError(f"negative population in {p.tolist()}")
        if not p.sum() > 0:
            raise InvalidInputError("all populations are zero")

    if merge_tolerance is None:
        # width, unlike max|E|, is unchanged by the ground-level shift
        width = float(e.max() - e.min())
        merge_tolerance = DEFAULT_RELATIVE_MERGE * width if width > 0 else DEFAULT_RELATIVE_MERGE
    if not merge_tolerance > 0:
        raise InvalidInputError("merge_tolerance must be positive")

    order = np.argsort(e, kind="stable")
    e = e[order]
    pops = [p[order] for p in pops]

    # single-linkage grouping of sorted energies
    starts = np.concatenate(([True], np.diff(e) > merge_tolerance))
    group = np.cumsum(starts) - 1
    n_groups = int(group[-1]) + 1
    if n_groups < 2:
        raise InvalidInputError("fewer than two distinct energy levels after merging")

    if n_groups == e.size:
        merged_e = e
    else:
        counts = np.bincount(group)
        merged_e = np.bincount(group, weights=e) / counts
    merged_e = merged_e - merged_e[0]

    vectors = []
    for p in pops:
        merged = p if n_groups == e.size else np.bincount(group, weights=p)
        total = merged.sum()
        if not total > 0:
            raise InvalidInputError("all populations are zero")
        # renormalizing an already-normalized vector would perturb the last
        # bit; skipping keeps canonicalization idempotent
        if abs(total - 1.0) > 8 * np.finfo(float).eps * merged.size:
            merged = merged / total
        merged = np.where(merged < UNDERFLOW_CLAMP, 0.0, merged)
        vectors.append(PopulationVector(merged))
    return EnergySpectrum(merged_e), vectors


def canonicalize_spectrum(
    raw_energies: Sequence[float],
    raw_populations: Sequence[float],
    merge_tolerance: Optional[float] = None,
) -> tuple[EnergySpectrum, PopulationVector]:
    """Sort, merge degenerate levels, shift to ``E_0 = 0`` and renormalize.

    >>> s, p = canonicalize_spectrum([1.0, 1.0, 2.0], [0.25, 0.25, 0.5])
    >>> s.energies.tolist(), p.populations.tolist()
    ([0.0, 1.0], [0.5, 0.5])
    """
    spectrum, (vector,) = canonicalize_many(raw_energies, [raw_populations], merge_tolerance)
    return spectrum, vector
