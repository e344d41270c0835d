"""Command-line front end.

Exit status: 0 on success, 2 on a configuration error, 3 on a solver error.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ConfigError, bundled, bundled_names, config_hash, load_scenario, read_json, scenario_to_dict
from .experiments import ExperimentSpec, run_baseline_compare, run_scalability, run_sweep, timing_csv
from .game import ConfigurationError
from .lp import SolverError
from .network import GenerationError, NetworkError
from .sim import run_simulation

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3

DEFAULT_SCENARIO = "scenario1_high_mid_t3_t3"
DEFAULT_EXPERIMENT = {
    "alpha-sweep": "alpha_sweep",
    "cost-sweep": "cost_sweep",
    "baseline-compare": "baseline_compare",
    "scalability": "scalability",
}

log = logging.getLogger("honeypot_bsg")


def _versions() -> dict:
    out = {"honeypot_bsg": __version__, "python": platform.python_version(), "numpy": np.__version__}
    try:
        import numba

        out["numba"] = numba.__version__
    except ImportError:
        out["numba"] = None
    out["numba_kernels"] = kernels.USE_NUMBA
    return out


def _dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True)


def _write_manifest(out: Path, command: str, doc, seed, extra=None) -> None:
    manifest = {
        "command": command,
        "config_hash": config_hash(doc),
        "seed": seed,
        "versions": _versions(),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _scenario_path(arg: str | None) -> Path:
    if arg is None:
        return bundled("scenarios", DEFAULT_SCENARIO)
    p = Path(arg)
    if not p.exists() and arg in bundled_names("scenarios"):
        return bundled("scenarios", arg)
    return p


def _experiment_path(arg: str | None, command: str) -> Path:
    if arg is None:
        return bundled("experiments", DEFAULT_EXPERIMENT[command])
    p = Path(arg)
    if not p.exists() and arg in bundled_names("experiments"):
        return bundled("experiments", arg)
    return p


def cmd_simulate(args) -> int:
    path = _scenario_path(args.config)
    overrides = {"seed": args.seed, "threads": args.threads}
    cfg = load_scenario(path, overrides)
    resolved = scenario_to_dict(cfg)
    if args.dry_run:
        print(json.dumps(resolved, indent=2, sort_keys=True))
        return EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reps = args.replications or 1
    summaries = []
    rounds_lines, belief_lines, timing_lines = [], [], []
    for r in range(reps):
        rep_cfg = cfg if r == 0 else load_scenario(path, {**overrides, "seed": cfg.seed + r})
        result = run_simulation(rep_cfg)
        for rec in result.rounds:
            doc = rec.to_dict()
            doc["replication"] = r
            rounds_lines.append(_dumps(doc))
            for b in rec.beliefs:
                belief_lines.append(_dumps({**b, "replication": r}))
            timing_lines.append(_dumps({"replication": r, "round": rec.round, **rec.timings}))
        summaries.append({"replication": r, "seed": rep_cfg.seed, **result.summary()})
    (out / "rounds.jsonl").write_text("".join(line + "\n" for line in rounds_lines))
    (out / "beliefs.jsonl").write_text("".join(line + "\n" for line in belief_lines))
    (out / "timings.jsonl").write_text("".join(line + "\n" for line in timing_lines))
    (out / "summary.json").write_text(json.dumps({"replications": summaries}, indent=2, sort_keys=True) + "\n")
    _write_manifest(out, "simulate", resolved, cfg.seed, {"config": str(path), "replications": reps})
    for s in summaries:
        rates = " ".join(f"{v:.2f}" for v in s["success_rates"])
        print(f"replication {s['replication']}: U_d={s['cumulative_defender_utility']:.4f} success rates [{rates}] ({s['termination']})")
    return EXIT_OK


def _load_experiment(args, command: str) -> tuple[ExperimentSpec, dict, Path]:
    path = _experiment_path(args.config, command)
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise ConfigError("", "experiment document must be a JSON object")
    doc = dict(doc)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.replications is not None:
        doc["replications"] = args.replications
    spec = ExperimentSpec.from_dict(doc, base_dir=path.parent)
    want = command
    if spec.kind != want:
        raise ConfigError("kind", f"{path} describes a {spec.kind!r} experiment, not {want!r}")
    return spec, doc, path


def cmd_experiment(args) -> int:
    command = args.command
    spec, doc, path = _load_experiment(args, command)
    if args.dry_run:
        print(json.dumps(doc, indent=2, sort_keys=True))
        return EXIT_OK
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    name = command.replace("-", "_")
    if command == "alpha-sweep":
        table = run_sweep(spec, "alpha", args.threads)
    elif command == "cost-sweep":
        table = run_sweep(spec, "honeypot_cost", args.threads)
    elif command == "baseline-compare":
        table = run_baseline_compare(spec, args.threads)
    else:
        table, timings = run_scalability(spec, args.threads)
        (out / "timings.csv").write_text(timing_csv(timings))
    table.write(out / f"{name}.csv")
    _write_manifest(out, command, doc, spec.seed, {"config": str(path), "replications": spec.replications})
    print(f"wrote {out / f'{name}.csv'} ({len(table.rows)} rows)")
    return EXIT_OK


def cmd_validate(args) -> int:
    path = Path(args.config) if args.config else _scenario_path(None)
    doc = read_json(path)
    if isinstance(doc, dict) and "kind" in doc:
        ExperimentSpec.from_dict(doc, base_dir=path.parent).build()
        print(f"{path}: valid {doc['kind']} experiment")
    else:
        load_scenario(path)
        print(f"{path}: valid scenario")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="honeypot-bsg", description="Bayesian Stackelberg honeypot placement")
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_out):
        p.add_argument("--config", help="JSON document, or the name of a bundled one")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=default_out)
        p.add_argument("--replications", type=int, default=None)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--dry-run", action="store_true", help="validate and print the resolved config")

    common(sub.add_parser("simulate", help="play a scenario round by round"), "runs/simulate")
    for verb in DEFAULT_EXPERIMENT:
        common(sub.add_parser(verb, help=f"run the {verb} experiment"), f"runs/{verb}")
    p = sub.add_parser("validate", help="check a scenario or experiment document")
    p.add_argument("--config")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "replications", None) is not None and args.replications < 1:
        print("error: --replications must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "simulate":
            return cmd_simulate(args)
        if args.command == "validate":
            return cmd_validate(args)
        return cmd_experiment(args)
    except (ConfigError, ConfigurationError, NetworkError, GenerationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
