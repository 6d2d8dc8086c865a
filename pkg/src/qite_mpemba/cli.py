"""``qite-mpemba`` command-line front end.

    qite-mpemba <mode> --config <path> [--out <path>] [--format csv|json] [--seed N]
    qite-mpemba preset {fig2a,fig2b,fig2c,si-fig} [--out <path>] [--format csv|json]

Exit status: 0 on success (an empty crossing list is a success), 1 for config
or input errors, 2 when the requested analysis does not apply.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis, collinearity, dynamics, presets, spin_chain
from ._parallel import worker_count
from .config import (
    MODES,
    ConfigError,
    apply_overrides,
    build_problem,
    echo_config,
    grid_for,
    lambdas_of,
    load_config,
    number,
    optional_number,
    require,
    spin_chain_of,
)
from .errors import InapplicableError, InvalidInputError, NotHotterError
from .export import Result, Table
from .spectrum import DistanceKind, make_distance

DEFAULT_FORMAT = {
    "evolve": "csv",
    "crossing": "csv",
    "collinear": "csv",
    "spin-chain": "csv",
    "preset": "csv",
}


def _trajectory_table(name, state, spectrum, df, taus) -> Table:
    pops = dynamics.population_curve(state, spectrum, taus)
    dist = dynamics.distance_curve(state, spectrum, df, taus)
    dist = np.where(dist < dynamics.DISTANCE_FLOOR, 0.0, dist)
    cols = ["tau"] + [f"p_{i}" for i in range(spectrum.level_count)] + ["distance"]
    rows = [[float(t)] + pops[k].tolist() + [float(dist[k])] for k, t in enumerate(taus)]
    return Table(name, cols, rows)


def _distance_table(name, states: dict, spectrum, df, taus) -> Table:
    """One column per state; computed on the worker pool in input order."""
    labels = list(states)
    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        curves = list(pool.map(
            lambda s: dynamics.distance_curve(s, spectrum, df, taus), states.values()
        ))
    rows = [[float(t)] + [float(c[k]) for c in curves] for k, t in enumerate(taus)]
    return Table(name, ["tau"] + [f"distance_{lab}" for lab in labels], rows)


def _crossing_table(name, report: analysis.CrossingReport) -> Table:
    rows = [[c.tau, c.value, "before_threshold" if report.truncated_at is not None else "crossing"]
            for c in report.crossings]
    rows += [[c.tau, c.value, "after_threshold"] for c in report.late_crossings]
    return Table(name, ["tau", "value", "status"], rows)


def _crossing_summary(report: analysis.CrossingReport) -> dict:
    return {
        "crossing_count": len(report.crossings),
        "late_crossing_count": len(report.late_crossings),
        "finite_time_mpemba": report.finite_time_mpemba,
        "truncated_at": report.truncated_at,
        "hot_threshold_time": report.hot_threshold_time,
        "cold_threshold_time": report.cold_threshold_time,
        "marginal": report.marginal,
    }


def run_evolve(cfg: dict) -> Result:
    prob = build_problem(cfg, "evolve")
    tau_max = number(cfg, "tau_max", positive=True)
    taus = grid_for(cfg).taus(tau_max)
    state = prob.vectors["populations"]
    if state.ground <= 0:
        raise InvalidInputError("populations: ground-state population is zero; QITE does not converge")
    table = _trajectory_table("trajectory", state, prob.spectrum, prob.df, taus)
    summary = {"energies": prob.spectrum.energies.tolist(), "distance": prob.df.kind.value}
    return Result("evolve", summary, [table])


def run_crossing(cfg: dict) -> Result:
    prob = build_problem(cfg, "crossing")
    tau_max = number(cfg, "tau_max", positive=True)
    epsilon = optional_number(cfg, "epsilon", positive=True)
    report = analysis.find_crossings(
        prob.vectors["hot"], prob.vectors["cold"], prob.spectrum, prob.df,
        tau_max, epsilon=epsilon, grid=grid_for(cfg),
    )
    return Result("crossing", _crossing_summary(report), [_crossing_table("crossings", report)])


def run_check(cfg: dict) -> Result:
    prob = build_problem(cfg, "check-mpemba")
    verdict = analysis.check_mpemba(prob.vectors["hot"], prob.vectors["cold"], prob.spectrum, prob.df)
    return Result("check-mpemba", verdict.to_dict())


def run_certificate(cfg: dict) -> Result:
    prob = build_problem(cfg, "certificate")
    epsilon = number(cfg, "epsilon", positive=True)
    cert = analysis.theorem2_certificate(prob.vectors["hot"], prob.vectors["cold"], prob.spectrum)
    if not cert.applicable:
        raise InapplicableError(f"certificate not applicable: {cert.reason}")
    summary = cert.to_dict()
    summary["epsilon"] = epsilon
    summary["certified"] = cert.certifies(epsilon)
    return Result("certificate", summary)


def run_general_f(cfg: dict) -> Result:
    prob = build_problem(cfg, "general-f")
    a = optional_number(cfg, "a", positive=True)
    try:
        cert = analysis.general_f_certificate(
            prob.vectors["hot"], prob.vectors["cold"], prob.spectrum, prob.df, a=a
        )
    except NotHotterError:
        raise
    except InvalidInputError as exc:
        if a is not None and "admissible" in str(exc):
            raise ConfigError("a", str(exc)) from None
        raise
    if not cert.applicable:
        raise InapplicableError(f"certificate not applicable: {cert.reason}")
    summary = cert.to_dict()
    epsilon = optional_number(cfg, "epsilon", positive=True)
    if epsilon is not None:
        summary["epsilon"] = epsilon
        summary["certified"] = cert.certifies(epsilon)
    return Result("general-f", summary)


def run_estimate(cfg: dict) -> Result:
    prob = build_problem(cfg, "estimate")
    df = prob.df if "distance" in cfg else None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est = analysis.crossing_estimate_details(prob.vectors["hot"], prob.vectors["cold"], prob.spectrum, df)
    summary = {
        "tau": est.tau,
        "case": est.case,
        "level": est.level,
        "hot_level": est.hot_level,
        "log_argument": est.log_argument,
    }
    notes = [f"warning: {w.message}" for w in caught]
    for line in notes:
        print(line, file=sys.stderr)
    if "tau_max" in cfg:
        tau_max = number(cfg, "tau_max", positive=True)
        report = analysis.find_crossings(
            prob.vectors["hot"], prob.vectors["cold"], prob.spectrum, prob.df, tau_max, grid=grid_for(cfg)
        )
        summary["numerical_crossings"] = [c.tau for c in report.crossings]
    return Result("estimate", summary, notes=notes)


def run_max_accel(cfg: dict) -> Result:
    prob = build_problem(cfg, "max-accel")
    epsilon = number(cfg, "epsilon", positive=True)
    hot, cold = prob.vectors["hot"], prob.vectors["cold"]
    gain = analysis.max_acceleration_time(cold, hot, prob.spectrum, prob.df, epsilon)
    t_cold = dynamics.threshold_time(cold, prob.spectrum, prob.df, epsilon)
    t_hot = dynamics.threshold_time(hot, prob.spectrum, prob.df, epsilon)
    summary = {
        "epsilon": epsilon,
        "estimated_gain": gain,
        "cold_threshold_time": t_cold,
        "hot_threshold_time": t_hot,
        "exact_gain": t_cold - t_hot,
    }
    return Result("max-accel", summary)


def run_collinear(cfg: dict) -> Result:
    prob = build_problem(cfg, "collinear")
    tau_max = number(cfg, "tau_max", positive=True)
    try:
        family = collinearity.CollinearFamily(
            prob.vectors["anchor_a"], prob.vectors["anchor_b"], tuple(lambdas_of(cfg))
        )
        family.members()
    except InvalidInputError as exc:
        raise ConfigError("lambdas", str(exc)) from None
    grid = grid_for(cfg)
    hit = collinearity.simultaneous_crossing(family, prob.spectrum, prob.df, tau_max, grid=grid)
    summary = {
        "simultaneous_crossing": hit is not None,
        "tau": None if hit is None else hit.tau,
        "value": None if hit is None else hit.value,
        "spread": None if hit is None else hit.spread,
    }
    cols, rows = collinearity.isochrone_rows(family, prob.spectrum, prob.df, grid.taus(tau_max))
    return Result("collinear", summary, [Table("isochrones", cols, rows)])


def run_spin_chain(cfg: dict) -> Result:
    require(cfg, "spin-chain")
    chain, gamma0, solver = spin_chain_of(cfg)
    tau_max = number(cfg, "tau_max", positive=True)
    system = spin_chain.build_hamiltonian(chain, solver=solver)
    hot_state = spin_chain.prepare_hotter_state(chain, gamma0, reference=system)
    spectrum, hot = spin_chain.populations_of(hot_state, system)
    _, cold = spin_chain.populations_of(spin_chain.tilted_state(chain), system)
    df = make_distance(spectrum, DistanceKind.AVERAGE_ENERGY)
    verdict = analysis.check_mpemba(hot, cold, spectrum, df)
    grid = grid_for(cfg)
    report = analysis.find_crossings(hot, cold, spectrum, df, tau_max, grid=grid)
    taus = grid.taus(tau_max)
    curves = _distance_table("relaxation", {"hot": hot, "cold": cold}, spectrum, df, taus)
    curves.columns = ["tau", "modified_energy_hot", "modified_energy_cold"]
    levels = Table(
        "populations",
        ["level", "energy", "p_hot", "p_cold"],
        [[i, float(spectrum.energies[i]), float(hot.populations[i]), float(cold.populations[i])]
         for i in range(spectrum.level_count)],
    )
    summary = {
        "ground_energy": float(system.eigenvalues[0]),
        "level_count": spectrum.level_count,
        "ratio_hot": verdict.ratio_hot,
        "ratio_cold": verdict.ratio_cold,
        "occurs": verdict.occurs,
        "deciding_level": verdict.deciding_level,
        "crossings": [c.tau for c in report.crossings],
    }
    notes = ["modified average energy = <H> - E_0 of the reference chain"]
    return Result("spin-chain", summary, [levels, curves, _crossing_table("crossings", report)], notes)


RUNNERS: dict = {
    "evolve": run_evolve,
    "crossing": run_crossing,
    "check-mpemba": run_check,
    "certificate": run_certificate,
    "general-f": run_general_f,
    "estimate": run_estimate,
    "max-accel": run_max_accel,
    "collinear": run_collinear,
    "spin-chain": run_spin_chain,
}


def run(mode: str, cfg: dict, preset: Optional[str] = None) -> Result:
    if mode == "preset":
        if preset is None:
            raise ConfigError("preset", f"name required (choose from {', '.join(presets.PRESETS)})")
        if preset not in presets.PRESETS:
            raise ConfigError("preset", f"unknown preset {preset!r} (choose from {', '.join(presets.PRESETS)})")
        return presets.run_preset(preset)
    result = RUNNERS[mode](cfg)
    result.config = echo_config(cfg)
    return result


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="qite-mpemba",
        description="Imaginary-time relaxation and Mpemba-effect analysis of level populations.",
    )
    p.add_argument("mode", choices=MODES)
    p.add_argument("preset", nargs="?", help="preset name (preset mode only)")
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--out", help="output file (or directory for multi-table CSV)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--seed", type=int, help="recorded in the output header")
    p.add_argument("--tau-max", type=float, dest="tau_max")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--distance", choices=[k.value for k in DistanceKind])
    return p


def _emit(result: Result, fmt: str, out: Optional[str]) -> None:
    if fmt == "json":
        text = result.to_json()
    elif out is not None and len(result.csv_tables()) > 1:
        for path in result.write_csv_dir(Path(out)):
            print(path, file=sys.stderr)
        return
    else:
        text = result.to_csv()
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def main(argv: Optional[list] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.mode != "preset" and args.preset is not None:
            raise ConfigError("preset", f"unexpected argument {args.preset!r} in {args.mode} mode")
        if args.mode != "preset" and args.config is None:
            raise ConfigError("--config", f"required in {args.mode} mode")
        cfg = apply_overrides(
            load_config(args.config),
            {"tau_max": args.tau_max, "epsilon": args.epsilon, "distance": args.distance},
        )
        result = run(args.mode, cfg, args.preset)
        if args.seed is not None:
            result.notes.append(f"seed = {args.seed}")
        _emit(result, args.format or DEFAULT_FORMAT.get(args.mode, "json"), args.out)
    except (InapplicableError, NotHotterError) as exc:
        print(f"qite-mpemba: not applicable: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"qite-mpemba: config error: {exc}", file=sys.stderr)
        return 1
    except (InvalidInputError, ValueError) as exc:
        print(f"qite-mpemba: invalid input: {exc}", file=sys.stderr)
        return 1
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
