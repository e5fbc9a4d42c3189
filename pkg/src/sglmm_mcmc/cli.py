"""Command line front end.

Subcommands: ``simulate`` (write a dataset), ``tune`` (step-size search),
``run`` (one chain to a trace file), ``diagnose`` (report on a saved trace),
``check`` (ergodicity verdicts for a configured kernel), and ``compare``
(the full multi-sampler bundle).

Experiment settings come from an optional JSON config file (the flat
structure of ``ExperimentConfig.to_dict``) plus ``--set key=value``
overrides with dotted paths, e.g. ``--set covariance.range=0.7``; values are
parsed as JSON when possible and kept as strings otherwise. The default
output directory is ``$SGLMM_MCMC_OUT`` or the current directory. Exit codes:
0 success, 1 runtime failure (a JSON error record goes to stderr), 2 usage
errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import diagnostics_report
from .ergodicity import mmala_h_bound, non_ge_drift_check, pcmala_h_bound, pcula_spectral_check
from .harness import (
    ExperimentConfig,
    dataset_rng,
    monitored_site_indices,
    parse_roster_entry,
    run_comparison,
    simulate_dataset,
)
from .samplers import (
    ADJUSTED_ALGORITHMS,
    SamplerConfig,
    resolve_preconditioner,
    run_chain,
    tune_step_size,
)
from .traceio import load_trace, save_trace

__all__ = ["main"]


def _default_out() -> Path:
    return Path(os.environ.get("SGLMM_MCMC_OUT", "."))


def _profile_config(args: argparse.Namespace) -> ExperimentConfig:
    """Config file wins over the profile; --set overrides apply on top."""
    if args.config:
        with open(args.config) as fh:
            base = ExperimentConfig.from_dict(json.load(fh))
    elif getattr(args, "profile", "desk") == "paper":
        base = ExperimentConfig.paper_profile()
    else:
        base = ExperimentConfig.desk_profile()
    return _apply_overrides(base, args.set)


def _apply_overrides(config: ExperimentConfig, overrides: list[str]) -> ExperimentConfig:
    if not overrides:
        return config
    data = config.to_dict()
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep:
            raise ValueError(f"override {item!r} is not of the form key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node[part]
        node[parts[-1]] = value
    return ExperimentConfig.from_dict(data)


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, default=_json_default)
    sys.stdout.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _cmd_simulate(args: argparse.Namespace) -> None:
    config = _profile_config(args)
    dataset = simulate_dataset(config, dataset_rng(config))
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    path = out / "dataset.npz"
    np.savez_compressed(
        path,
        sites=dataset.sites.coords,
        grid_coords=dataset.grid_coords,
        field_on_grid=dataset.field_on_grid,
        x_true=dataset.x_true,
        z=dataset.z,
    )
    _emit({"dataset": str(path), "m": dataset.m, "family": config.family})


def _build_target(config: ExperimentConfig):
    return simulate_dataset(config, dataset_rng(config))


def _cmd_tune(args: argparse.Namespace) -> None:
    config = _profile_config(args)
    dataset = _build_target(config)
    algorithm, kind = parse_roster_entry(args.algorithm)
    if algorithm not in ADJUSTED_ALGORITHMS:
        raise ValueError("tuning applies to accept-reject kernels only")
    template = SamplerConfig(
        algorithm=algorithm,
        step_size=config.initial_h,
        seed=config.seed,
        initial_state=dataset.x_true,
        preconditioner=kind,
    )
    h = tune_step_size(
        template,
        dataset.spec,
        band=config.band,
        pilot_iterations=config.pilot_iterations,
    )
    _emit({"algorithm": algorithm, "preconditioner": kind, "step_size": h})


def _cmd_run(args: argparse.Namespace) -> None:
    config = _profile_config(args)
    dataset = _build_target(config)
    algorithm, kind = parse_roster_entry(args.algorithm)
    sampler_config = SamplerConfig(
        algorithm=algorithm,
        step_size=args.step_size,
        seed=args.seed if args.seed is not None else config.seed,
        initial_state=dataset.x_true,
        preconditioner=kind,
    )
    trace = run_chain(
        sampler_config,
        dataset.spec,
        args.iterations or config.iterations,
        progress_every=args.progress_every,
    )
    out = Path(args.out or _default_out())
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"trace-{algorithm}-{kind}.{args.format}"
    save_trace(trace, path)
    _emit(
        {
            "trace": str(path),
            "iterations": trace.n,
            "acceptance_rate": trace.acceptance_rate,
            "wall_time": trace.wall_time,
        }
    )


def _cmd_diagnose(args: argparse.Namespace) -> None:
    trace = load_trace(args.trace)
    report = diagnostics_report(
        trace.states[args.burn_in :],
        wall_time=args.wall_time if args.wall_time is not None else trace.wall_time,
        max_lag=args.max_lag,
        include_ess=trace.accepted is not None,
    )
    payload = report.to_dict()
    if trace.accepted is not None:
        payload["acceptance_rate"] = trace.acceptance_rate
    _emit(payload)


def _cmd_check(args: argparse.Namespace) -> None:
    config = _profile_config(args)
    dataset = _build_target(config)
    algorithm, kind = parse_roster_entry(args.algorithm)
    sigma = dataset.spec.prior_cov
    g = resolve_preconditioner(dataset.spec, kind)
    reports = []
    if algorithm in ("pmala", "mmala"):
        if config.family != "binomial_logit":
            reports.append(
                {
                    "condition": "position_dependent_h_bound",
                    "verdict": "inconclusive",
                    "note": "bound is established for the binomial family only",
                }
            )
        else:
            bound = mmala_h_bound(sigma, dataset.spec.trials)
            verdict = "satisfied" if args.step_size and args.step_size < bound else "violated"
            reports.append(
                {
                    "condition": "position_dependent_h_bound",
                    "threshold": bound,
                    "measured": args.step_size,
                    "verdict": verdict if args.step_size else "inconclusive",
                }
            )
    elif algorithm == "pcula":
        report = pcula_spectral_check(args.step_size or config.initial_h, g, sigma)
        reports.append(report.to_dict())
    else:
        if config.family == "poisson_log":
            probe = non_ge_drift_check(dataset.spec, args.step_size or 1.0, g)
            reports.append(probe.to_dict())
        else:
            bound = pcmala_h_bound(sigma, g)
            verdict = "satisfied" if args.step_size and args.step_size < bound else "violated"
            reports.append(
                {
                    "condition": "fixed_g_h_bound",
                    "threshold": bound,
                    "measured": args.step_size,
                    "verdict": verdict if args.step_size else "inconclusive",
                }
            )
    _emit({"algorithm": algorithm, "preconditioner": kind, "checks": reports})


def _cmd_compare(args: argparse.Namespace) -> None:
    config = _profile_config(args)
    out = Path(args.out or _default_out())
    result = run_comparison(config, out)
    statuses = {r.tag: ("error: " + r.error if r.error else "ok") for r in result.results}
    monitored = monitored_site_indices(config, result.dataset.sites)
    _emit(
        {
            "out_dir": str(out),
            "monitored_sites": monitored,
            "entries": statuses,
        }
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sglmm-mcmc",
        description="Langevin samplers for spatial GLMMs with ergodicity checks",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, profile: bool = True) -> None:
        p.add_argument("--config", help="JSON config file (ExperimentConfig fields)")
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config entry (dotted keys, JSON-typed values)",
        )
        if profile:
            p.add_argument(
                "--profile",
                choices=["desk", "paper"],
                default="desk",
                help="base profile when no config file is given",
            )

    p = sub.add_parser("simulate", help="simulate a dataset and write it out")
    common(p)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("tune", help="tune a step size to the acceptance band")
    common(p)
    p.add_argument("--algorithm", required=True, help="algorithm[:preconditioner]")
    p.set_defaults(func=_cmd_tune)

    p = sub.add_parser("run", help="run one chain and save its trace")
    common(p)
    p.add_argument("--algorithm", required=True, help="algorithm[:preconditioner]")
    p.add_argument("--step-size", type=float, required=True)
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["npz", "csv"], default="npz")
    p.add_argument("--progress-every", type=int, help="stderr progress interval")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("diagnose", help="diagnostics report for a saved trace")
    p.add_argument("--trace", required=True)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--max-lag", type=int, default=50)
    p.add_argument("--wall-time", type=float, help="override stored wall time")
    p.set_defaults(func=_cmd_diagnose)

    p = sub.add_parser("check", help="ergodicity checks for a configured kernel")
    common(p)
    p.add_argument("--algorithm", required=True, help="algorithm[:preconditioner]")
    p.add_argument("--step-size", type=float, help="step size to test")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("compare", help="full sampler comparison bundle")
    common(p)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:  # noqa: BLE001 - boundary: report and exit 1
        record = {"error": type(exc).__name__, "message": str(exc)}
        json.dump(record, sys.stderr)
        sys.stderr.write("\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
