"""Command-line entry point: reproducible subcommands over a scenario config.

Every subcommand validates the scenario before simulating, honors --seed
(drawing and printing one when neither the flag nor the config provides it),
writes outputs atomically inside the --out directory only, and ends with a
one-line summary carrying the seed, so any run can be reconstructed.

Exit codes: 0 success, 1 configuration/validation error (including unknown
flags), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .harness import (
    ScenarioConfig,
    compare_fdd,
    default_scenario,
    derive_rng,
    estimate_invasion_probability,
    exit_time_scaling,
    mutation_time_test,
)
from .limits import integrate_dimorphic, integrate_logistic
from .micro import PopulationState, simulate
from .model import equilibrium_density, validate_assumptions
from .tss import simulate_tss

log = logging.getLogger("tssim")

VALIDATION_GRID_PER_DIM = 33


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _atomic_write_via(path: Path, writer) -> None:
    """Run writer(tmp_path) and rename the result into place."""
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tssim",
        description="Individual-based eco-evolution simulator and its jump-process limit",
    )
    parser.add_argument("--config", type=Path, default=None,
                        help="scenario JSON (defaults to the built-in scenario)")
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (drawn and printed when omitted)")
    parser.add_argument("--reps", type=int, default=None, help="replicate count override")
    parser.add_argument("--K", type=int, action="append", default=None,
                        help="system size; repeat the flag for a ladder")
    parser.add_argument("--jobs", type=int, default=None,
                        help="parallel workers (default: available cores)")
    parser.add_argument("--out", type=Path, default=Path("tssim-out"),
                        help="output directory (created if missing)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv",
                        help="format for trajectory outputs (reports are always JSON)")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
        ("validate", "check the scenario against the standing assumptions"),
        ("simulate-micro", "one micro trajectory per configured K"),
        ("simulate-tss", "one jump-process path"),
        ("ode", "deterministic limit flows (logistic, and dimorphic when a mutant is set)"),
        ("invasion", "mutant fixation probability estimate"),
        ("mutation-time", "first-mutation-time law check"),
        ("compare-fdd", "K-ladder comparison against the jump-process marginal"),
        ("exit-time", "exit-time growth from the equilibrium band"),
    ]:
        sub.add_parser(name, help=help_text)
    return parser


def load_scenario(args) -> tuple[ScenarioConfig, bool]:
    """Returns (config, config_had_seed)."""
    if args.config is not None:
        doc = json.loads(Path(args.config).read_text())
        config = ScenarioConfig.from_dict(doc)
        had_seed = doc.get("seed") is not None
    else:
        config = default_scenario()
        had_seed = True
    if args.K:
        config.K_list = list(args.K)
    if args.reps is not None:
        if args.reps < 1:
            raise ValueError("--reps must be >= 1")
        config.replicates = args.reps
    return config, had_seed


def _write_report(out_dir: Path, name: str, payload: dict) -> Path:
    path = out_dir / name
    _atomic_write_text(path, json.dumps(payload, indent=2) + "\n")
    return path


def _trajectory_payload(traj) -> dict:
    return {
        "time": [float(t) for t in traj.sample_times],
        "total_mass": [float(v) for v in traj.total_mass],
        "support_size": [int(v) for v in traj.support_size],
    }


def cmd_validate(config: ScenarioConfig, args, seed: int, out_dir: Path) -> list[Path]:
    return []


def cmd_simulate_micro(config, args, seed, out_dir):
    written = []
    for i, K in enumerate(config.K_list):
        u_K = config.u_rule.for_K(K)
        init = PopulationState(config.params, K, {config.initial_trait: config.initial_count(K)})
        grid = np.linspace(0.0, config.t_end, 201)
        traj = simulate(config.params, K, u_K, init, config.t_end,
                        sample_times=grid, track_traits=[config.initial_trait],
                        rng=derive_rng(seed, 0, i))
        path = out_dir / f"micro_K{K}.{args.format}"
        if args.format == "csv":
            _atomic_write_via(path, traj.to_csv)
        else:
            _atomic_write_text(path, json.dumps(_trajectory_payload(traj), indent=2) + "\n")
        written.append(path)
    return written


def cmd_simulate_tss(config, args, seed, out_dir):
    path_obj = simulate_tss(config.params, config.initial_trait, config.tss_t_end,
                            derive_rng(seed, 1, 0))
    out = out_dir / f"tss.{args.format}"
    if args.format == "csv":
        _atomic_write_via(out, path_obj.to_csv)
    else:
        payload = {
            "initial": list(path_obj.initial),
            "jumps": [[t, list(trait)] for t, trait in path_obj.jumps],
            "t_end": path_obj.t_end,
        }
        _atomic_write_text(out, json.dumps(payload, indent=2) + "\n")
    return [out]


def cmd_ode(config, args, seed, out_dir):
    params = config.params
    x = config.initial_trait
    nbar = equilibrium_density(params, x)
    n0 = config.initial_mass if config.initial_mass is not None else 0.1 * nbar
    written = []
    logistic = integrate_logistic(params.birth(x), params.death(x),
                                  params.competition(x, x), n0, config.t_end, config.dt)
    out = out_dir / "ode_logistic.csv"
    _atomic_write_via(out, logistic.to_csv)
    written.append(out)
    if config.mutant_trait is not None:
        dim = integrate_dimorphic(params, x, config.mutant_trait, (nbar, 0.01),
                                  config.t_end, config.dt)
        out = out_dir / "ode_dimorphic.csv"
        _atomic_write_via(out, dim.to_csv)
        written.append(out)
    return written


def cmd_invasion(config, args, seed, out_dir):
    if config.mutant_trait is None:
        raise ValueError("invasion needs mutant_trait in the scenario config")
    est = estimate_invasion_probability(
        config.params, config.initial_trait, config.mutant_trait,
        K=config.K_list[0], reps=config.replicates, master_seed=seed,
        parallelism=args.jobs)
    payload = est.to_dict()
    payload.update(resident=list(config.initial_trait), mutant=list(config.mutant_trait),
                   seed=seed)
    return [_write_report(out_dir, "invasion.json", payload)]


def cmd_mutation_time(config, args, seed, out_dir):
    K = config.K_list[0]
    report = mutation_time_test(config.params, config.initial_trait, K=K,
                                reps=config.replicates, master_seed=seed,
                                u_K=config.u_rule.for_K(K), parallelism=args.jobs)
    payload = report.to_dict()
    payload["seed"] = seed
    return [_write_report(out_dir, "mutation_time.json", payload)]


def cmd_compare_fdd(config, args, seed, out_dir):
    config.seed = seed
    report = compare_fdd(config, parallelism=args.jobs)
    written = [_write_report(out_dir, "compare_fdd.json", report.to_dict())]
    raw = out_dir / "compare_fdd_replicates.csv"
    _atomic_write_via(raw, report.raw_to_csv)
    written.append(raw)
    return written


def cmd_exit_time(config, args, seed, out_dir):
    params = config.params
    x = config.initial_trait
    b, d = params.birth(x), params.death(x)
    alpha = params.competition(x, x)
    nbar = equilibrium_density(params, x)
    eta1 = config.exit_eta1 if config.exit_eta1 is not None else 0.5 * nbar
    eta2 = config.exit_eta2 if config.exit_eta2 is not None else 0.5 * nbar
    report = exit_time_scaling(b, d, alpha, eta1, eta2, config.K_list,
                               reps=config.replicates, master_seed=seed,
                               t_max=config.exit_t_max, parallelism=args.jobs)
    return [_write_report(out_dir, "exit_time.json", report.to_dict())]


_COMMANDS = {
    "validate": cmd_validate,
    "simulate-micro": cmd_simulate_micro,
    "simulate-tss": cmd_simulate_tss,
    "ode": cmd_ode,
    "invasion": cmd_invasion,
    "mutation-time": cmd_mutation_time,
    "compare-fdd": cmd_compare_fdd,
    "exit-time": cmd_exit_time,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad flags; remap to 1
        return 0 if exc.code == 0 else 1
    logging.basicConfig(level=[logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)])

    try:
        config, had_seed = load_scenario(args)
        if args.seed is not None:
            seed = args.seed
        elif had_seed:
            seed = config.seed
        else:
            seed = int.from_bytes(os.urandom(8), "little")
        config.seed = seed
        report = validate_assumptions(
            config.params, config.params.space.grid(VALIDATION_GRID_PER_DIM))
        if args.command == "validate":
            for line in report.failures:
                print("violation:", line)
            status = "PASS" if report.ok else "FAIL"
            print(f"tssim validate: {status} checked_points={report.checked_points} seed={seed}")
            return 0 if report.ok else 1
        if not report.ok:
            for line in report.failures:
                print("violation:", line, file=sys.stderr)
            print("tssim: scenario failed assumption validation", file=sys.stderr)
            return 1
        if args.jobs is None:
            args.jobs = os.cpu_count() or 1
        if args.jobs < 1:
            raise ValueError("--jobs must be >= 1")
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"tssim: configuration error: {exc}", file=sys.stderr)
        return 1

    try:
        out_dir = args.out
        out_dir.mkdir(parents=True, exist_ok=True)
        written = _COMMANDS[args.command](config, args, seed, out_dir)
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"tssim: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2

    names = ",".join(p.name for p in written) or "-"
    print(f"tssim {args.command}: seed={seed} out={out_dir} files={names}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
