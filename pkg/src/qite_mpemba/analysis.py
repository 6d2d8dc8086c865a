"""Mpemba-effect decision theory for imaginary-time evolution.

A state ``hot`` that starts farther from the ground state than ``cold``
(``D_f(hot) > D_f(cold)``) shows the Mpemba effect when its distance curve
eventually drops below, and stays below, the colder one.  The deciding
quantity is the population ratio ``p_i / p_0`` at the lowest level where the
two states disagree: the effect occurs iff the hot ratio is smaller.  This
holds for every distance function.

Besides that occurrence test, this module provides finite-time certificates
(guaranteeing the crossing happens while both distances exceed a stopping
threshold ``epsilon``), numerical crossing detection, closed-form long-time
crossing estimates, and the maximal acceleration obtained by emptying every
intermediate level of the hot state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import _roots
from .dynamics import GridSpec, distance_curve, distance_evaluator, threshold_time
from .errors import InapplicableError, InvalidInputError, NotHotterError
from .spectrum import DistanceFunction, EnergySpectrum, PopulationVector

RATIO_RTOL = 1e-12
CROSSING_XTOL = 1e-10


def _ratios_equal(a: float, b: float) -> bool:
    return abs(a - b) <= RATIO_RTOL * max(abs(a), abs(b))


def _require_ground(*states: PopulationVector) -> None:
    for s in states:
        if s.populations[0] <= 0:
            raise InvalidInputError("ground-state population is zero")


def _require_lengths(spectrum: EnergySpectrum, *items) -> None:
    n = spectrum.level_count
    for item in items:
        if len(item) != n:
            raise InvalidInputError(f"length mismatch: {len(item)} levels vs {n} levels")


def _require_hotter(d_hot: float, d_cold: float, label: str) -> None:
    if d_hot > d_cold:
        return
    if d_hot == d_cold:
        raise NotHotterError(f"hot and cold states have equal {label} ({d_hot!r})")
    raise NotHotterError(
        f"cold state is hotter by {label} ({d_cold!r} > {d_hot!r}); swap the arguments"
    )


def deciding_level(hot: PopulationVector, cold: PopulationVector) -> Optional[int]:
    """Smallest ``i >= 1`` where ``p_i/p_0`` differs between the states, else None."""
    rh, rc = hot.ratios(), cold.ratios()
    for i in range(1, rh.size):
        if not _ratios_equal(rh[i], rc[i]):
            return i
    return None


@dataclass(frozen=True)
class MpembaVerdict:
    occurs: bool
    deciding_level: int
    ratio_hot: float
    ratio_cold: float

    def to_dict(self) -> dict:
        return asdict(self)


def check_mpemba(
    hot: PopulationVector,
    cold: PopulationVector,
    spectrum: EnergySpectrum,
    df: DistanceFunction,
) -> MpembaVerdict:
    """Decide whether ``hot`` eventually overtakes ``cold``.

    Raises :class:`NotHotterError` unless ``D_f(hot) > D_f(cold)``.  A zero
    population gives a zero ratio, so states with an empty first excited level
    need no special treatment.  When no ratio differs the trajectories agree
    and the verdict is negative with ``deciding_level = n``.
    """
    _require_lengths(spectrum, hot, cold, df)
    _require_ground(hot, cold)
    d_hot = float(np.dot(hot.populations, df.weights))
    d_cold = float(np.dot(cold.populations, df.weights))
    _require_hotter(d_hot, d_cold, "distance")

    i = deciding_level(hot, cold)
    rh, rc = hot.ratios(), cold.ratios()
    if i is None:
        n = spectrum.level_count
        return MpembaVerdict(False, n, float(rh[-1]), float(rc[-1]))
    return MpembaVerdict(bool(rh[i] < rc[i]), i, float(rh[i]), float(rc[i]))


@dataclass(frozen=True)
class FiniteTimeCertificate:
    """Sufficient condition for a crossing above the threshold ``epsilon``.

    When ``applicable``, any ``epsilon < epsilon_bound`` guarantees a final
    crossing at some ``tau <= tau_tilde_star`` with both distances above
    ``epsilon`` there.  ``level`` is the level whose cumulative ratios enter
    the bound (1 unless the first ratios tie).
    """

    applicable: bool
    epsilon_bound: Optional[float] = None
    tau_tilde_star: Optional[float] = None
    r_hot: Optional[float] = None
    r_cold: Optional[float] = None
    s_hot: Optional[float] = None
    level: int = 1
    a: Optional[float] = None
    a_max: Optional[float] = None
    reason: str = ""

    def certifies(self, epsilon: float) -> bool:
        return self.applicable and epsilon < self.epsilon_bound

    def to_dict(self) -> dict:
        return asdict(self)


def _logistic_tail(log_x: float) -> float:
    """``1 / (1 + exp(log_x))`` without overflow."""
    if log_x > 0:
        t = math.exp(-log_x)
        return t / (1.0 + t)
    return 1.0 / (1.0 + math.exp(log_x))


def theorem2_certificate(
    hot: PopulationVector,
    cold: PopulationVector,
    spectrum: EnergySpectrum,
) -> FiniteTimeCertificate:
    """Finite-time certificate for the ground-state infidelity.

    The hot state is bounded by a worst case that keeps ``p_0, p_1`` and moves
    all remaining weight to level 2; the cold state by one that drops
    everything above level 1.  Their infidelities cross exactly once, at

        tau~ = ln((s_h - r_h) / (r_c - r_h)) / (2 (E_2 - E_1)),

    and the cold bound at ``tau~`` is ``epsilon_bound``.  When the first
    ratios tie, the first differing level ``j`` takes over: ratios become
    cumulative sums up to ``j`` and ``E_1, E_2`` become ``E_j, E_{j+1}``.
    """
    _require_lengths(spectrum, hot, cold)
    n = spectrum.level_count
    if n < 3:
        raise InapplicableError("the infidelity certificate needs at least three levels")
    _require_ground(hot, cold)
    _require_hotter(1.0 - hot.ground, 1.0 - cold.ground, "infidelity")

    rh, rc = hot.ratios(), cold.ratios()
    s_hot = float(rh[1:].sum())
    j = deciding_level(hot, cold)
    if j is None:
        return FiniteTimeCertificate(False, s_hot=s_hot, reason="all population ratios agree")
    big_rh = float(rh[1 : j + 1].sum())
    big_rc = float(rc[1 : j + 1].sum())
    if not rh[j] < rc[j]:
        return FiniteTimeCertificate(
            False, r_hot=big_rh, r_cold=big_rc, s_hot=s_hot, level=j,
            reason="hot ratio exceeds cold ratio; no Mpemba effect",
        )
    if j == n - 1:
        return FiniteTimeCertificate(
            False, r_hot=big_rh, r_cold=big_rc, s_hot=s_hot, level=j,
            reason="ratios first differ at the top level; no level above it for the bound",
        )
    tail = float(rh[j + 1 :].sum())
    gap = big_rc - big_rh
    if not (tail > 0 and gap > 0):
        return FiniteTimeCertificate(
            False, r_hot=big_rh, r_cold=big_rc, s_hot=s_hot, level=j,
            reason="degenerate worst-case bound",
        )
    e_lo = float(spectrum.energies[j])
    e_hi = float(spectrum.energies[j + 1])
    log_ratio = math.log(tail) - math.log(gap)
    tau_tilde = log_ratio / (2.0 * (e_hi - e_lo))
    log_term = e_lo / (e_hi - e_lo) * log_ratio - math.log(big_rc)
    return FiniteTimeCertificate(
        True,
        epsilon_bound=_logistic_tail(log_term),
        tau_tilde_star=tau_tilde,
        r_hot=big_rh,
        r_cold=big_rc,
        s_hot=s_hot,
        level=j,
    )


def general_f_certificate(
    hot: PopulationVector,
    cold: PopulationVector,
    spectrum: EnergySpectrum,
    df: DistanceFunction,
    a: Optional[float] = None,
) -> FiniteTimeCertificate:
    """Finite-time certificate for an arbitrary distance function.

    Hot and cold distances are bounded by ``f(E_{n-1})`` and ``f(E_1)`` times
    the worst-case infidelities.  A free parameter ``a`` in
    ``(0, f(E_1) r_c / (f(E_{n-1}) r_h) - 1)`` splits the comparison into two
    conditions, each holding past its own time ``tau_1(a)`` (decreasing in
    ``a``) and ``tau_2(a)`` (increasing).  The certificate holds past
    ``max(tau_1, tau_2)`` and the bound is the cold lower bound evaluated
    there.  Without ``a`` the optimum ``a*`` with ``tau_1 = tau_2`` is found by
    bisection.

    Only detects the effect when ``r_c / r_h > f(E_{n-1}) / f(E_1)``;
    otherwise (and for ``f(E_{n-1}) = f(E_1)``, e.g. infidelity) the result is
    not applicable.
    """
    _require_lengths(spectrum, hot, cold, df)
    n = spectrum.level_count
    if n < 3:
        raise InapplicableError("the general certificate needs at least three levels")
    _require_ground(hot, cold)
    w = df.weights
    _require_hotter(float(np.dot(hot.populations, w)), float(np.dot(cold.populations, w)), "distance")

    rh_all, rc_all = hot.ratios(), cold.ratios()
    r_h, r_c = float(rh_all[1]), float(rc_all[1])
    s_h = float(rh_all[1:].sum())
    tail = float(rh_all[2:].sum())
    f1, f_top = float(w[1]), float(w[-1])
    base = dict(r_hot=r_h, r_cold=r_c, s_hot=s_h)

    if not f_top > f1:
        return FiniteTimeCertificate(False, reason="requires f(E_top) > f(E_1)", **base)
    if not r_h > 0:
        return FiniteTimeCertificate(False, reason="requires a nonzero first hot ratio", **base)
    g = f1 / f_top
    if not r_c / r_h > 1.0 / g:
        return FiniteTimeCertificate(
            False, reason="requires r_cold / r_hot > f(E_top) / f(E_1)", **base
        )
    if not tail > 0:
        return FiniteTimeCertificate(False, reason="hot state has no weight above level 1", **base)

    a_max = g * r_c / r_h - 1.0
    e1 = float(spectrum.energies[1])
    e2 = float(spectrum.energies[2])

    def branches(x: float) -> tuple[float, float]:
        return _branch_times(x, r_h, r_c, tail, g, e1, e2)

    if a is None:
        # tau_1(0) and tau_2(a_max) are infinite; pin the end signs so that
        # rounding in the denominator at a_max cannot erase the bracket
        def gap(x: float) -> float:
            if x <= 0.0:
                return 1.0
            if x >= a_max:
                return -1.0
            return _gap_sign(*branches(x))

        a_used = _roots.bisect(gap, 0.0, a_max, xtol=0.0)
    else:
        if not 0 < a < a_max:
            raise InvalidInputError(f"a={a} outside the admissible interval (0, {a_max})")
        a_used = float(a)

    tau_0 = max(branches(a_used))
    # cold lower bound f1 * q / (1 + q) with q = r_c exp(-2 E1 tau)
    q = r_c * math.exp(-2.0 * e1 * tau_0)
    bound = f1 * q / (1.0 + q)
    return FiniteTimeCertificate(
        True, epsilon_bound=bound, tau_tilde_star=tau_0, a=a_used, a_max=a_max, **base
    )


def _branch_times(a: float, r_h: float, r_c: float, tail: float, g: float,
                  e1: float, e2: float) -> tuple[float, float]:
    if a <= 0:
        t1 = math.inf
    else:
        t1 = (math.log(r_c / a) + math.log1p(-g)) / (2.0 * e1)
    denom = g * r_c / (1.0 + a) - r_h
    if denom <= 0:
        t2 = math.inf
    else:
        t2 = (math.log(tail) - math.log(denom)) / (2.0 * (e2 - e1))
    return t1, t2


def _gap_sign(t1: float, t2: float) -> float:
    if t1 == t2:
        return 0.0
    return 1.0 if t1 > t2 else -1.0


def general_f_branch_times(
    hot: PopulationVector,
    cold: PopulationVector,
    spectrum: EnergySpectrum,
    df: DistanceFunction,
    a: float,
) -> tuple[float, float]:
    """``(tau_1(a), tau_2(a))``: the times past which each branch condition holds."""
    rh, rc = hot.ratios(), cold.ratios()
    g = float(df.weights[1]) / float(df.weights[-1])
    return _branch_times(
        a, float(rh[1]), float(rc[1]), float(rh[2:].sum()), g,
        float(spectrum.energies[1]), float(spectrum.energies[2]),
    )


@dataclass(frozen=True)
class Crossing:
    tau: float
    value: float


@dataclass(frozen=True)
class CrossingReport:
    """Crossings of ``D_f(hot) - D_f(cold)`` in ascending time.

    With a threshold, ``truncated_at`` is the first time either state reaches
    it; crossings after that point are moved to ``late_crossings``.
    ``marginal`` flags equal initial distances (the crossing at ``tau = 0`` is
    never reported).
    """

    crossings: list = field(default_factory=list)
    truncated_at: Optional[float] = None
    late_crossings: list = field(default_factory=list)
    hot_threshold_time: Optional[float] = None
    cold_threshold_time: Optional[float] = None
    marginal: bool = False

    @property
    def finite_time_mpemba(self) -> bool:
        return bool(self.crossings)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["crossings"] = [{"tau": c.tau, "value": c.value} for c in self.crossings]
        d["late_crossings"] = [{"tau": c.tau, "value": c.value} for c in self.late_crossings]
        return d


def _sign_change_brackets(taus: np.ndarray, g: np.ndarray, depth: int,
                          fn) -> list[tuple[float, float]]:
    """Brackets ``[a, b]`` with a sign change of ``g``, refining near-touches.

    Two crossings inside one grid cell leave no sign change behind, so a
    strict local minimum of ``|g|`` between same-sign neighbours is resampled
    on a finer local grid.
    """
    signs = np.sign(g)
    nz = np.nonzero(signs)[0]
    flips = np.nonzero(signs[nz[:-1]] != signs[nz[1:]])[0]
    brackets = [(float(taus[nz[i]]), float(taus[nz[i + 1]])) for i in flips]
    if depth <= 0 or taus.size < 3:
        return brackets
    absg = np.abs(g)
    mid = signs[1:-1]
    dips = (
        (mid != 0) & (signs[:-2] == mid) & (signs[2:] == mid)
        & (absg[1:-1] < absg[:-2]) & (absg[1:-1] < absg[2:])
    )
    for k in np.nonzero(dips)[0] + 1:
        sub = np.linspace(taus[k - 1], taus[k + 1], 33)
        brackets.extend(_sign_change_brackets(sub, fn(sub), depth - 1, fn))
    return brackets


def find_crossings(
    hot: PopulationVector,
    cold: PopulationVector,
    spectrum: EnergySpectrum,
    df: DistanceFunction,
    tau_max: float,
    epsilon: Optional[float] = None,
    grid: Optional[GridSpec] = None,
    xtol: float = CROSSING_XTOL,
) -> CrossingReport:
    """Locate every time in ``(0, tau_max]`` where the two distance curves meet.

    The difference is scanned on ``grid`` (geometric, 400 points by default)
    and each sign change is refined by bisection to ``xtol``.
    """
    _require_lengths(spectrum, hot, cold, df)
    _require_ground(hot, cold)
    grid = grid or GridSpec()
    taus = grid.taus(tau_max)

    def diff(t):
        return distance_curve(hot, spectrum, df, t) - distance_curve(cold, spectrum, df, t)

    g = diff(taus)
    d0 = max(abs(float(np.dot(hot.populations, df.weights))), abs(float(np.dot(cold.populations, df.weights))))
    marginal = bool(abs(g[0]) <= 1e-15 * d0)
    if marginal:
        g[0] = 0.0

    brackets = sorted(set(_sign_change_brackets(taus, g, depth=4, fn=diff)))
    found: list[Crossing] = []
    d_hot = distance_evaluator(hot, spectrum, df)
    d_cold = distance_evaluator(cold, spectrum, df)
    for lo, hi in brackets:
        try:
            t = _roots.bisect(lambda x: d_hot(x) - d_cold(x), lo, hi, xtol=xtol)
        except ValueError:
            # the scan's sign at a bracket end was decided by the last bit
            t = _roots.bisect(lambda x: float(diff([x])[0]), lo, hi, xtol=xtol)
        if found and abs(t - found[-1].tau) <= xtol:
            continue
        value = float(distance_curve(cold, spectrum, df, [t])[0])
        found.append(Crossing(t, value))

    if epsilon is None:
        return CrossingReport(found, marginal=marginal)

    t_hot = threshold_time(hot, spectrum, df, epsilon)
    t_cold = threshold_time(cold, spectrum, df, epsilon)
    cut = min(t_hot, t_cold)
    early = [c for c in found if c.tau < cut]
    late = [c for c in found if c.tau >= cut]
    return CrossingReport(early, cut, late, t_hot, t_cold, marginal)


@dataclass(frozen=True)
class CrossingEstimate:
    tau: float
    case: str
    level: int
    hot_level: int
    log_argument: float


def crossing_estimate_details(
    hot: PopulationVector,
    cold: PopulationVector,
    spectrum: EnergySpectrum,
    df: Optional[DistanceFunction] = None,
) -> CrossingEstimate:
    """Long-time crossing estimate with the levels it used.

    Near the crossing each distance is dominated by its lowest surviving
    levels.  With ``i`` the deciding level and ``k`` the next level above it
    that the hot state occupies, balancing the two leading terms gives

        tau* ~ ln(rho_h[k] f_k / ((rho_c[i] - rho_h[i]) f_i)) / (2 (E_k - E_i))

    where ``rho = p / p_0``.  Case I has both states starting at the same
    lowest excited level, case II (``rho_h[i] = 0``) does not.  Average-energy
    weights are used when ``df`` is omitted.
    """
    _require_lengths(spectrum, hot, cold)
    _require_ground(hot, cold)
    f = spectrum.energies if df is None else df.weights
    _require_lengths(spectrum, f)
    i = deciding_level(hot, cold)
    if i is None:
        raise InapplicableError("states share every population ratio; no crossing")
    rh, rc = hot.ratios(), cold.ratios()
    if not rh[i] < rc[i]:
        raise InapplicableError("hot ratio is not below cold ratio; no Mpemba crossing")
    k = hot.lowest_occupied_excited(start=i + 1)
    if k is None:
        raise InapplicableError(
            f"hot state occupies no level above {i}; the estimate is undefined"
        )
    arg = rh[k] * f[k] / ((rc[i] - rh[i]) * f[i])
    if not arg > 1.0:
        raise InapplicableError("estimate inapplicable: crossing is early-time")
    if arg < 2.0:
        warnings.warn(
            f"log argument {arg:.3g} < 2; the long-time estimate may be poor",
            RuntimeWarning,
            stacklevel=2,
        )
    tau = math.log(arg) / (2.0 * (spectrum.energies[k] - spectrum.energies[i]))
    k_hot = hot.lowest_occupied_excited()
    k_cold = cold.lowest_occupied_excited()
    case = "I" if k_hot == k_cold else "II"
    return CrossingEstimate(float(tau), case, i, k, float(arg))


def estimate_crossing(
    hot: PopulationVector,
    cold: PopulationVector,
    spectrum: EnergySpectrum,
    df: Optional[DistanceFunction] = None,
) -> float:
    return crossing_estimate_details(hot, cold, spectrum, df).tau


def max_acceleration_time(
    cold: PopulationVector,
    hot: PopulationVector,
    spectrum: EnergySpectrum,
    df: DistanceFunction,
    epsilon: float,
) -> float:
    """Asymptotic threshold-time gain ``tau_c(eps) - tau_h(eps)``.

    ``hot`` must occupy only the ground and the top level, the fastest
    configuration for reaching a small threshold.  Each threshold time
    follows from keeping the leading excited term of the distance:

        tau_c ~ -ln(p0_c eps / (pk_c f_k)) / (2 E_k)
        tau_h ~ -ln(p0_h eps / (ptop_h f_top)) / (2 E_top)

    with ``k`` the lowest occupied excited level of ``cold``.  Accurate once
    ``epsilon`` is small compared with the subleading terms.
    """
    _require_lengths(spectrum, hot, cold, df)
    _require_ground(hot, cold)
    if not epsilon > 0:
        raise InvalidInputError("epsilon must be positive")
    p_hot = hot.populations
    if np.any(p_hot[1:-1] > 0) or not p_hot[-1] > 0:
        raise InvalidInputError(
            "hot state must occupy only the ground level and the top level"
        )
    k = cold.lowest_occupied_excited()
    if k is None:
        raise InvalidInputError("cold state is already the ground state")
    e, f = spectrum.energies, df.weights
    top = spectrum.level_count - 1
    tau_c = -math.log(cold.ground * epsilon / (cold.populations[k] * f[k])) / (2.0 * e[k])
    tau_h = -math.log(hot.ground * epsilon / (p_hot[top] * f[top])) / (2.0 * e[top])
    return float(tau_c - tau_h)
