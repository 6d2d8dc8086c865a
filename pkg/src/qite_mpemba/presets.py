"""Built-in experiments with fixed spectra and initial populations.

Each preset writes the inputs it used into the output header, so the tables
can be regenerated and compared without a config file.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import analysis, collinearity, dynamics, spin_chain
from ._parallel import worker_count
from .dynamics import GridSpec
from .errors import InvalidInputError
from .export import Result, Table
from .spectrum import DistanceKind, EnergySpectrum, PopulationVector, make_distance

THREE_LEVELS = (0.0, 0.2, 0.3)
FIVE_LEVELS = (0.0, 0.15, 0.4, 0.65, 0.8)

FIG2A_STATES = {
    "A": (0.35, 0.45, 0.20),
    "B": (0.45, 0.15, 0.40),
    "B'": (0.36, 0.16, 0.48),
    "B''": (0.11, 0.14, 0.75),
}
FIG2B_STATES = {
    "A": (0.35, 0.45, 0.20),
    "C": (0.31, 0.16, 0.53),
    "C'": (0.18, 0.15, 0.67),
}
FIG2B_EPSILON = 0.05
FIG2C_LAMBDAS = (0.0, 0.25, 0.5, 0.75, 1.0, 1.25)
SI_PANELS = {
    "a": {"hot": (0.05, 0.005, 0.8, 0.05, 0.095), "cold": (0.3, 0.45, 0.05, 0.1, 0.1)},
    "b": {"hot": (0.05, 0.0, 0.9, 0.025, 0.025), "cold": (0.4, 0.4, 0.05, 0.05, 0.1)},
}
SI_CHAIN = {"sites": 8, "mu": 0.3, "theta": 0.1 * math.pi, "gamma0": 0.01, "gamma1": 1.0, "tau_pre": 0.2}

TAU_MAX = 20.0
# the B'' crossing sits near tau = 33
FIG2A_TAU_MAX = 40.0


def _fmt(values) -> str:
    return "(" + ", ".join(f"{v:g}" for v in values) + ")"


def _states(table: dict) -> dict:
    return {name: PopulationVector(p) for name, p in table.items()}


def _curves(states: dict, spectrum, df, taus) -> dict:
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        curves = list(pool.map(lambda s: dynamics.distance_curve(s, spectrum, df, taus), states.values()))
    return dict(zip(states, curves))


def _distance_table(name: str, curves: dict, taus) -> Table:
    rows = [[float(t)] + [float(c[k]) for c in curves.values()] for k, t in enumerate(taus)]
    return Table(name, ["tau"] + [f"distance_{s}" for s in curves], rows)


def _derivative_table(name: str, states: dict, spectrum, df, taus) -> Table:
    """``dD/dtau = -2 (<f E> - <f><E>)`` along each trajectory."""
    e, f = spectrum.energies, df.weights
    cols = {}
    for label, s in states.items():
        p = dynamics.population_curve(s, spectrum, taus)
        cols[label] = -2.0 * (p @ (f * e) - (p @ f) * (p @ e))
    rows = [[float(t)] + [float(c[k]) for c in cols.values()] for k, t in enumerate(taus)]
    return Table(name, ["tau"] + [f"derivative_{s}" for s in cols], rows)


def fig2a() -> Result:
    spectrum = EnergySpectrum(THREE_LEVELS)
    df = make_distance(spectrum, DistanceKind.AVERAGE_ENERGY)
    states = _states(FIG2A_STATES)
    taus = GridSpec().taus(FIG2A_TAU_MAX)
    curves = _curves(states, spectrum, df, taus)
    rows, summary = [], {}
    for label in ("B", "B'", "B''"):
        report = analysis.find_crossings(states[label], states["A"], spectrum, df, FIG2A_TAU_MAX)
        for c in report.crossings:
            rows.append([f"{label}-A", c.tau, c.value])
        summary[f"{label}-A"] = [c.tau for c in report.crossings]
    notes = [
        f"levels {_fmt(THREE_LEVELS)}; distance = average energy",
    ] + [f"state {k} = {_fmt(v)}" for k, v in FIG2A_STATES.items()]
    tables = [
        _distance_table("distances", curves, taus),
        _derivative_table("derivatives", states, spectrum, df, taus),
        Table("crossings", ["pair", "tau", "value"], rows),
    ]
    return Result("preset fig2a", summary, tables, notes)


def _worst_case_bounds(hot, cold, spectrum, taus) -> tuple[np.ndarray, np.ndarray]:
    """Infidelity bounds: hot with its excess weight pushed to level 2, cold truncated at level 1."""
    rh, rc = hot.ratios(), cold.ratios()
    e1, e2 = spectrum.energies[1], spectrum.energies[2]
    x_h = rh[1] * np.exp(-2 * e1 * taus) + (rh[1:].sum() - rh[1]) * np.exp(-2 * e2 * taus)
    x_c = rc[1] * np.exp(-2 * e1 * taus)
    return x_h / (1 + x_h), x_c / (1 + x_c)


def fig2b() -> Result:
    spectrum = EnergySpectrum(THREE_LEVELS)
    df = make_distance(spectrum, DistanceKind.INFIDELITY)
    states = _states(FIG2B_STATES)
    taus = GridSpec().taus(TAU_MAX)
    curves = _curves(states, spectrum, df, taus)
    eps = FIG2B_EPSILON
    rows, summary = [], {"epsilon": eps}
    for label in ("C", "C'"):
        report = analysis.find_crossings(states[label], states["A"], spectrum, df, TAU_MAX, epsilon=eps)
        for c in report.crossings:
            rows.append([f"{label}-A", c.tau, c.value, "before_threshold"])
        for c in report.late_crossings:
            rows.append([f"{label}-A", c.tau, c.value, "after_threshold"])
        summary[f"{label}-A.finite_time_mpemba"] = report.finite_time_mpemba
    thresholds = {k: dynamics.threshold_time(s, spectrum, df, eps) for k, s in states.items()}
    summary["threshold_times"] = thresholds
    summary["threshold_gap_A_minus_C"] = thresholds["A"] - thresholds["C"]
    cert = analysis.theorem2_certificate(states["C"], states["A"], spectrum)
    summary["certificate"] = {
        "tau_tilde_star": cert.tau_tilde_star,
        "epsilon_bound": cert.epsilon_bound,
        "certifies_epsilon": cert.certifies(eps),
    }
    upper_c, lower_a = _worst_case_bounds(states["C"], states["A"], spectrum, taus)
    bounds = Table(
        "bounds",
        ["tau", "bound_hot_C", "bound_cold_A"],
        [[float(t), float(upper_c[k]), float(lower_a[k])] for k, t in enumerate(taus)],
    )
    notes = [
        f"levels {_fmt(THREE_LEVELS)}; distance = infidelity; threshold {eps:g}",
    ] + [f"state {k} = {_fmt(v)}" for k, v in FIG2B_STATES.items()]
    tables = [
        _distance_table("distances", curves, taus),
        Table("crossings", ["pair", "tau", "value", "status"], rows),
        bounds,
    ]
    return Result("preset fig2b", summary, tables, notes)


def fig2c() -> Result:
    spectrum = EnergySpectrum(THREE_LEVELS)
    df = make_distance(spectrum, DistanceKind.AVERAGE_ENERGY)
    family = collinearity.CollinearFamily(
        PopulationVector(FIG2A_STATES["A"]), PopulationVector(FIG2A_STATES["B'"]), FIG2C_LAMBDAS
    )
    grid = GridSpec()
    taus = grid.taus(TAU_MAX)
    members = {f"lambda={lam:g}": family.member(lam) for lam in family.lambdas}
    curves = _curves(members, spectrum, df, taus)
    hit = collinearity.simultaneous_crossing(family, spectrum, df, TAU_MAX, grid=grid)
    summary = {
        "simultaneous_crossing": hit is not None,
        "tau": None if hit is None else hit.tau,
        "value": None if hit is None else hit.value,
        "spread": None if hit is None else hit.spread,
    }
    cols, rows = collinearity.isochrone_rows(family, spectrum, df, taus)
    anchor_a, anchor_b = _fmt(FIG2A_STATES["A"]), _fmt(FIG2A_STATES["B'"])
    notes = [
        f"levels {_fmt(THREE_LEVELS)}; distance = average energy",
        f"family p = lambda * {anchor_b} + (1 - lambda) * {anchor_a}",
        f"lambdas {_fmt(FIG2C_LAMBDAS)}",
    ]
    return Result("preset fig2c", summary, [_distance_table("distances", curves, taus),
                                            Table("isochrones", cols, rows)], notes)


def si_fig() -> Result:
    spectrum = EnergySpectrum(FIVE_LEVELS)
    df = make_distance(spectrum, DistanceKind.AVERAGE_ENERGY)
    taus = GridSpec().taus(TAU_MAX)
    tables, summary, rows = [], {}, []
    notes = [f"levels {_fmt(FIVE_LEVELS)}; distance = average energy"]
    for panel, pair in SI_PANELS.items():
        states = _states(pair)
        report = analysis.find_crossings(states["hot"], states["cold"], spectrum, df, TAU_MAX)
        est = analysis.crossing_estimate_details(states["hot"], states["cold"], spectrum, df)
        for c in report.crossings:
            rows.append([panel, c.tau, c.value, est.tau])
        summary[f"panel_{panel}"] = {
            "crossings": [c.tau for c in report.crossings],
            "estimate": est.tau,
            "estimate_case": est.case,
        }
        tables.append(_distance_table(f"distances_{panel}", _curves(states, spectrum, df, taus), taus))
        notes.append(f"panel {panel}: hot {_fmt(pair['hot'])}, cold {_fmt(pair['cold'])}")
    tables.append(Table("crossings", ["panel", "tau", "value", "estimate"], rows))

    chain = spin_chain.SpinChainConfig(
        sites=SI_CHAIN["sites"], mu=SI_CHAIN["mu"], theta=SI_CHAIN["theta"],
        gamma=SI_CHAIN["gamma1"], tau_pre=SI_CHAIN["tau_pre"],
    )
    prep = spin_chain.prepare_pair(chain, SI_CHAIN["gamma0"])
    chain_df = make_distance(prep.spectrum, DistanceKind.AVERAGE_ENERGY)
    chain_taus = GridSpec().taus(5.0)
    chain_curves = _curves({"hot": prep.hot, "cold": prep.cold}, prep.spectrum, chain_df, chain_taus)
    chain_report = analysis.find_crossings(prep.hot, prep.cold, prep.spectrum, chain_df, 5.0)
    summary["chain"] = {
        "ratio_hot": float(prep.hot.ratios()[1]),
        "ratio_cold": float(prep.cold.ratios()[1]),
        "crossings": [c.tau for c in chain_report.crossings],
    }
    chain_table = _distance_table("chain_relaxation", chain_curves, chain_taus)
    chain_table.columns = ["tau", "modified_energy_hot", "modified_energy_cold"]
    tables.append(chain_table)
    notes.append(
        "chain: L={sites}, mu={mu:g}, theta={theta:.6g}, gamma0={gamma0:g}, gamma1={gamma1:g}, "
        "tau_pre={tau_pre:g}".format(**SI_CHAIN)
    )
    return Result("preset si-fig", summary, tables, notes)


PRESETS = {"fig2a": fig2a, "fig2b": fig2b, "fig2c": fig2c, "si-fig": si_fig}


def run_preset(name: str) -> Result:
    try:
        builder = PRESETS[name]
    except KeyError:
        raise InvalidInputError(f"unknown preset {name!r} (choose from {', '.join(PRESETS)})") from None
    return builder()
