"""Command-line entry point: ``albo run | plot | table | check``.

Exit codes: 0 on success, 2 on configuration errors, 3 on runtime failures.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .csvio import MalformedCSV, read_csv
from .experiment import AggregateResult, ConfigError, ExperimentConfig, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="albo", description="Augmented-Lagrangian Bayesian optimization experiments."
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a multi-restart experiment")
    run.add_argument("--config", help="JSON file with flat experiment keys")
    run.add_argument("--problem", dest="problem_id")
    run.add_argument("--strategy", dest="strategy_id")
    run.add_argument("--surrogate")
    run.add_argument("--acquisition")
    run.add_argument("--restarts", type=int)
    run.add_argument("--budget", type=int)
    run.add_argument("--n-init", dest="n_init", type=int)
    run.add_argument("--candidates", dest="candidate_count", type=int)
    run.add_argument("--draws", dest="mc_draws", type=int)
    run.add_argument("--rho0", type=float)
    run.add_argument("--seed", type=int)
    run.add_argument("--jobs", type=int)
    run.add_argument("--out", dest="output_dir")
    run.add_argument("--no-figures", action="store_true", help="skip the convergence plots")

    plot = sub.add_parser("plot", help="plot aggregate CSVs")
    plot.add_argument("--in", dest="inputs", nargs="+", required=True)
    plot.add_argument("--labels", nargs="+")
    plot.add_argument("--out", required=True, help=".svg for the plain SVG, .png/.pdf for matplotlib")

    table = sub.add_parser("table", help="summarize aggregate CSVs")
    table.add_argument("--in", dest="inputs", nargs="+", required=True)
    table.add_argument("--labels", nargs="+")

    check = sub.add_parser("check", help="counterexample and KKT demonstrations")
    check.add_argument("--figures", help="directory for the penalty-sweep figure")
    return parser


def _load_aggregates(paths, labels) -> list[AggregateResult]:
    if labels and len(labels) != len(paths):
        raise ConfigError("need one label per input file")
    results = []
    for i, path in enumerate(paths):
        try:
            r = read_csv(path)
        except FileNotFoundError as exc:
            raise ConfigError(str(exc)) from exc
        if not isinstance(r, AggregateResult):
            raise ConfigError(f"{path} is not an aggregate CSV")
        if labels:
            r.label = labels[i]
        results.append(r)
    return results


def cmd_run(args) -> int:
    keys = (
        "problem_id", "strategy_id", "surrogate", "acquisition", "restarts",
        "budget", "n_init", "candidate_count", "mc_draws", "rho0", "seed", "jobs", "output_dir",
    )
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k) is not None}
    if args.config:
        cfg = ExperimentConfig.from_json(args.config, overrides)
    else:
        cfg = ExperimentConfig.from_dict(overrides)
    agg = run_experiment(cfg)
    print(f"{agg.label}: final mean {agg.final_mean:.6g} +- {agg.final_stderr:.2g} "
          f"({agg.n_included} restarts, {agg.n_excluded} excluded)")
    if cfg.output_dir and not args.no_figures:
        from .plotting import emit_plot, render_convergence

        out = Path(cfg.output_dir)
        emit_plot([agg], [agg.label], out / "convergence.svg")
        render_convergence([agg], [agg.label], out / "convergence.png")
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import emit_plot, render_convergence

    results = _load_aggregates(args.inputs, args.labels)
    labels = [r.label for r in results]
    if Path(args.out).suffix.lower() == ".svg":
        emit_plot(results, labels, args.out)
    else:
        render_convergence(results, labels, args.out)
    print(args.out)
    return EXIT_OK


def format_table(results) -> str:
    width = max(len(r.label) for r in results)
    lines = [f"{'series':<{width}}  {'final mean':>12}  {'stderr':>10}  {'n':>4}  {'excl':>4}"]
    for r in results:
        lines.append(
            f"{r.label:<{width}}  {r.final_mean:>12.6g}  {r.final_stderr:>10.2g}  "
            f"{r.n_included:>4d}  {r.n_excluded:>4d}"
        )
    return "\n".join(lines)


def cmd_table(args) -> int:
    print(format_table(_load_aggregates(args.inputs, args.labels)))
    return EXIT_OK


def run_checks() -> list[tuple[str, bool, str]]:
    """The deterministic counterexample and KKT demonstrations, as (name, ok, detail)."""
    from ..auglag import ALState, al_saddle_check, kkt_residual, least_squares_multipliers
    from ..problems import (
        counterexample_minimizer,
        counterexample_penalized,
        counterexample_penalized_grad,
        make_counterexample_1d,
        make_toy_original,
        make_version,
    )

    rows = []
    for rho in (10.0, 1.0, 0.1, 0.01):
        xs = counterexample_minimizer(rho)
        g = float(counterexample_penalized_grad(0.5, rho))
        h = 1e-6
        g_fd = float(
            counterexample_penalized(0.5 + h, rho) - counterexample_penalized(0.5 - h, rho)
        ) / (2 * h)
        rows.append((
            f"nomax minimizer rho={rho:g}",
            abs(xs - 0.5) > 1e-3 and g != 0.0 and abs(g - g_fd) <= 1e-6 * max(1.0, abs(g)),
            f"argmin={xs:.6f} grad(0.5)={g:.6g} fd={g_fd:.6g}",
        ))
    ce = make_counterexample_1d()
    for rho in (10.0, 1.0, 0.1):
        x, rep = al_saddle_check(ce, ALState([0.0], rho, "withmax"))
        rows.append((
            f"withmax AL loop rho0={rho:g}",
            abs(x[0] - 0.5) <= 1e-4 and rep.max_residual() <= 1e-4,
            f"x={x[0]:.8f} stat={rep.stationarity:.2e} feas={rep.feasibility:.2e} "
            f"comp={rep.complementarity:.2e}",
        ))
    x, rep = al_saddle_check(ce, ALState([0.0], 0.1, "nomax"))
    rows.append((
        "nomax AL loop rho0=0.1",
        abs(x[0] - 0.5) >= 0.3,
        f"x={x[0]:.6f} stat={rep.stationarity:.2e}",
    ))
    v1 = make_version(1)
    x, rep = al_saddle_check(v1, ALState([0.0, 0.0], 0.5, "nomax"))
    rows.append((
        "nomax AL loop, linear objective",
        float(np.linalg.norm(x - np.array([0.0, 1.0]))) <= 0.05,
        f"x=({x[0]:.4f}, {x[1]:.4f}) stat={rep.stationarity:.2e}",
    ))
    toy = make_toy_original()
    xo = np.array(toy.known_optimum[1])
    lam = least_squares_multipliers(toy, xo)
    rep = kkt_residual(toy, xo, lam)
    rows.append((
        "toy optimum KKT",
        rep.stationarity <= 1e-3 and rep.feasibility <= 1e-8,
        f"lambda={np.round(lam, 6).tolist()} stat={rep.stationarity:.2e} "
        f"comp={rep.complementarity:.2e}",
    ))
    return rows


def cmd_check(args) -> int:
    rows = run_checks()
    width = max(len(name) for name, _, _ in rows)
    for name, ok, detail in rows:
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {detail}")
    if args.figures:
        from .plotting import render_penalty_sweep

        out = Path(args.figures)
        out.mkdir(parents=True, exist_ok=True)
        print(render_penalty_sweep(out / "penalty_sweep.png"))
    return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_RUNTIME


COMMANDS = {"run": cmd_run, "plot": cmd_plot, "table": cmd_table, "check": cmd_check}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, MalformedCSV) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        logging.getLogger(__name__).debug("runtime failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
