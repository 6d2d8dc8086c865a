"""Collinear families of initial states.

Population vectors on a common line ``p(lam) = lam * p_B + (1 - lam) * p_A``
stay on a line under imaginary-time evolution: the evolved member sits at

    lam'(tau) = lam * Z_B(tau) / Z_C(tau)

between the evolved anchors.  Distances are linear in the populations, so
``D(member) = D_A + lam' (D_B - D_A)`` and every member's distance curve
passes through the anchors' crossing point at the same time.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import _roots
from ._parallel import worker_count
from .dynamics import GridSpec, distance_curve, partition_function, population_curve
from .errors import InvalidInputError
from .spectrum import DistanceFunction, EnergySpectrum, PopulationVector

SPREAD_TOL = 1e-10
RELATIVE_SPREAD_TOL = 1e-8
# rounding slack when materializing a member on the simplex boundary
_NEGATIVE_SLACK = 1e-14


@dataclass(frozen=True, eq=False)
class CollinearFamily:
    """Members are stored by affine coordinate; ``lam = 0`` is A, ``lam = 1`` is B.

    Members are materialized (and validated) on demand because the line leaves
    the simplex for large ``|lam|``.
    """

    anchor_a: PopulationVector
    anchor_b: PopulationVector
    lambdas: tuple = (0.0, 0.5, 1.0)

    def __post_init__(self):
        if len(self.anchor_a) != len(self.anchor_b):
            raise InvalidInputError("anchors have different lengths")
        if np.array_equal(self.anchor_a.populations, self.anchor_b.populations):
            raise InvalidInputError("anchors must be distinct")
        object.__setattr__(self, "lambdas", tuple(float(x) for x in self.lambdas))

    def member(self, lam: float) -> PopulationVector:
        p = lam * self.anchor_b.populations + (1.0 - lam) * self.anchor_a.populations
        if np.any(p < -_NEGATIVE_SLACK):
            raise InvalidInputError(f"lambda={lam} lies outside the simplex")
        return PopulationVector(np.clip(p, 0.0, None))

    def members(self) -> list[PopulationVector]:
        return [self.member(lam) for lam in self.lambdas]


def evolved_lambda(
    family: CollinearFamily,
    lam: float,
    spectrum: EnergySpectrum,
    tau: float,
) -> float:
    """Affine coordinate of the evolved member relative to the evolved anchors."""
    family.member(lam)
    if lam == 0.0:
        return 0.0
    z_a = partition_function(family.anchor_a, spectrum, tau)
    z_b = partition_function(family.anchor_b, spectrum, tau)
    z_c = lam * z_b + (1.0 - lam) * z_a
    return float(lam * z_b / z_c)


@dataclass(frozen=True)
class SimultaneousCrossing:
    tau: float
    value: float
    spread: float


def _distinct(states: Sequence[PopulationVector]) -> int:
    rows = np.array([s.populations for s in states])
    unique = []
    for r in rows:
        if not any(np.max(np.abs(r - u)) <= 1e-12 for u in unique):
            unique.append(r)
    return len(unique)


def member_distances(
    members: Sequence[PopulationVector],
    spectrum: EnergySpectrum,
    df: DistanceFunction,
    taus: Sequence[float],
    parallel: bool = True,
) -> np.ndarray:
    """``(len(members), len(taus))`` array of distance curves."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if not parallel:
        return np.array([distance_curve(m, spectrum, df, taus) for m in members])
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        rows = list(pool.map(lambda m: distance_curve(m, spectrum, df, taus), members))
    return np.array(rows)


def simultaneous_crossing(
    family: CollinearFamily,
    spectrum: EnergySpectrum,
    df: DistanceFunction,
    tau_max: float,
    grid: Optional[GridSpec] = None,
) -> Optional[SimultaneousCrossing]:
    """Earliest ``tau <= tau_max`` at which all members share one distance.

    The relative spread ``(max_m D_m - min_m D_m) / max_m D_m`` is bracketed
    on the grid and each interior local minimum is refined by golden-section
    search.  Returns None when no minimum gets below the spread tolerance.
    """
    members = family.members()
    if _distinct(members) < 2:
        raise InvalidInputError("a family needs at least two distinct members")
    grid = grid or GridSpec()
    taus = grid.taus(tau_max)

    def spreads(t, parallel=False):
        d = member_distances(members, spectrum, df, t, parallel=parallel)
        top = d.max(axis=0)
        absolute = top - d.min(axis=0)
        return absolute, absolute / top

    _, rel = spreads(taus, parallel=True)
    candidates = [
        k for k in range(1, taus.size - 1)
        if rel[k] <= rel[k - 1] and rel[k] <= rel[k + 1]
    ]
    for k in candidates:
        t, _ = _roots.golden_minimize(
            lambda x: float(spreads(x)[1][0]), float(taus[k - 1]), float(taus[k + 1]), xtol=1e-14
        )
        absolute, relative = spreads(t)
        if absolute[0] < SPREAD_TOL and relative[0] < RELATIVE_SPREAD_TOL:
            d = member_distances(members, spectrum, df, t, parallel=False)[:, 0]
            return SimultaneousCrossing(float(t), float(d.mean()), float(absolute[0]))
    return None


ISOCHRONE_COLUMNS_PREFIX = ("tau", "lambda")


def isochrone_rows(
    family: CollinearFamily,
    spectrum: EnergySpectrum,
    df: DistanceFunction,
    taus: Sequence[float],
) -> tuple[list[str], list[list[float]]]:
    """Table over the ``tau x lambda`` sweep with populations and distance."""
    n = spectrum.level_count
    columns = list(ISOCHRONE_COLUMNS_PREFIX) + [f"p_{i}" for i in range(n)] + ["distance"]
    rows = []
    members = family.members()
    curves = [population_curve(m, spectrum, taus) for m in members]
    for ti, t in enumerate(taus):
        for lam, pops in zip(family.lambdas, curves):
            p = pops[ti]
            rows.append([float(t), lam] + p.tolist() + [float(p @ df.weights)])
    return columns, rows
