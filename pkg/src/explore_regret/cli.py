"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 verification failure,
4 evaluation budget exceeded, 5 file I/O error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, check_experiment, load_config
from .infofn import AssumptionError, make_info, polynomial_info
from .mc import (
    NoiseBank,
    build_schedule,
    design_info,
    design_point,
    grid_search,
    run_experiment,
    run_strategy,
    strategy_family,
)
from .model import quadratic_example
from .scheduler import (
    BudgetExceeded,
    brute_force_verify,
    immediate_condition,
    kkt_certificate,
    optimize_schedule,
)

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4, 5

log = logging.getLogger("explore_regret")

TABLE_COLUMNS = ("theta0", "strategy", "design", "x_g", "x_b", "c", "p",
                 "R_bar", "R_bar_stderr", "R_ub", "condition_lhs")
FIG2_COLUMNS = ("strategy", "design", "t", "mean_cumulative_regret", "stderr")
SWEEP_COLUMNS = ("theta0", "strategy", "x_g", "x_b", "c", "p", "R_bar", "R_bar_stderr", "R_ub")


# ---------------------------------------------------------------------------
# output helpers


def fmt(v) -> str:
    """Shortest round-trip text for numbers; blanks for missing values."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_outputs(out: Path, files: dict) -> list:
    """Write ``{name: text}`` under ``out``; returns ``[{path, sha256}]`` in name order."""
    out.mkdir(parents=True, exist_ok=True)
    listed = []
    for name in sorted(files):
        data = files[name].encode()
        (out / name).write_bytes(data)
        listed.append({"path": name, "sha256": hashlib.sha256(data).hexdigest()})
    return listed


def tuning_columns(strategy: str, tuning: dict) -> dict:
    return {k: tuning.get(k) for k in ("x_g", "x_b", "c", "p")}


# ---------------------------------------------------------------------------
# configuration


def resolve(args) -> RunConfig:
    cfg = load_config(args.config)
    exp = cfg.experiment
    over = {}
    if args.seed is not None:
        over["master_seed"] = args.seed
    if args.theta0:
        over["theta0_list"] = tuple(args.theta0)
    if args.design is not None:
        over["design_mode"] = args.design
    if args.oracle_design is not None:
        over["oracle_design"] = args.oracle_design
    if args.n_mc is not None:
        over["n_mc"] = args.n_mc
    if args.horizon is not None:
        over["T"] = args.horizon
    if over:
        exp = dataclasses.replace(exp, **over)
        check_experiment(exp)
        cfg = dataclasses.replace(cfg, experiment=exp)
    return cfg


def designs(mode: str):
    return ("a", "b") if mode == "both" else (mode,)


def _bank_for(cfg):
    e = cfg.experiment
    return None if e.oracle_design else NoiseBank.generate(e.master_seed, e.n_mc, e.T)


# ---------------------------------------------------------------------------
# subcommands


def cmd_plan(cfg: RunConfig, args) -> int:
    """Bound-optimal schedule per theta0 and family."""
    exp = cfg.experiment
    bank = _bank_for(cfg)
    rows = []
    for theta0 in exp.theta0_list:
        model = quadratic_example(theta0, exp.sigma2)
        dp = design_point(model, bank, exp)
        for family in cfg.plan.families:
            sol = optimize_schedule(design_info(family, dp), dp.i0, exp.T, x_max=cfg.plan.x_max)
            rows.append({
                "theta0": theta0, "family": family, "kind": sol.kind, "x1": sol.x1,
                "bound_value": sol.bound_value, "condition_lhs": sol.condition_lhs,
                "condition_holds": sol.condition_lhs > 1.0, "i0": dp.i0,
                "design_convention": dp.convention,
                "kkt_min": float(np.min(sol.kkt_residuals)),
            })
            print(f"theta0={theta0:g} {family:8s} {sol.kind:9s} x1={sol.x1:.6g} "
                  f"bound={sol.bound_value:.6g} condition={sol.condition_lhs:.6g}")
    if args.out:
        write_outputs(Path(args.out), {"plan.json": json_text({"plans": rows})})
    return EXIT_OK


def cmd_check_condition(cfg: RunConfig, args) -> int:
    exp = cfg.experiment
    bank = _bank_for(cfg)
    rows = []
    for theta0 in exp.theta0_list:
        model = quadratic_example(theta0, exp.sigma2)
        dp = design_point(model, bank, exp)
        for family in cfg.plan.families:
            lhs, holds = immediate_condition(design_info(family, dp), dp.i0, exp.T)
            rows.append({"theta0": theta0, "family": family, "condition_lhs": lhs,
                         "immediate_guaranteed": holds, "design_convention": dp.convention})
            verdict = "immediate exploration optimal" if holds else "inconclusive"
            print(f"theta0={theta0:g} {family:8s} lhs={lhs:.6g} -> {verdict}")
    if args.out:
        write_outputs(Path(args.out), {"condition.json": json_text({"conditions": rows})})
    return EXIT_OK


def _tuning_from_args(args) -> dict:
    tuning = {}
    if args.strategy == "immediate_gaussian":
        tuning["x_g"] = args.x
    elif args.strategy == "immediate_binary":
        tuning["x_b"] = args.x
    elif args.strategy == "decaying_gaussian":
        tuning["c"], tuning["p"] = args.c, args.p
    if any(v is None for v in tuning.values()):
        raise ConfigError(f"--strategy {args.strategy} needs "
                          + ("--c and --p" if "c" in tuning else "--x"))
    return tuning


def cmd_simulate(cfg: RunConfig, args) -> int:
    exp = cfg.experiment
    tuning = _tuning_from_args(args)
    try:
        build_schedule(args.strategy, exp.T, tuning)
    except ValueError as exc:
        raise ConfigError(str(exc))
    bank = NoiseBank.generate(exp.master_seed, exp.n_mc, exp.T)
    traj, summary = [], {}
    for theta0 in exp.theta0_list:
        rep = run_strategy(quadratic_example(theta0, exp.sigma2), args.strategy, tuning, exp, bank)
        for t, (m, s) in enumerate(zip(rep.trajectory, rep.stderr), start=1):
            traj.append({"theta0": theta0, "strategy": args.strategy, "t": t,
                         "mean_cumulative_regret": float(m), "stderr": float(s)})
        summary[repr(theta0)] = {"tuning": tuning, "R_bar": rep.empirical, "R_ub": rep.upper_bound,
                                 "R_approx": rep.approx,
                                 "R_bar_stderr": float(rep.stderr[-1]),
                                 "design_convention": rep.meta["design_convention"]}
        print(f"theta0={theta0:g} {args.strategy}: R_bar={rep.empirical:.6g} "
              f"(se {rep.stderr[-1]:.3g}) R_ub={rep.upper_bound:.6g}")
    if args.out:
        write_outputs(Path(args.out), {
            "trajectory.csv": csv_text(("theta0",) + FIG2_COLUMNS[:1] + FIG2_COLUMNS[2:], traj),
            "simulate.json": json_text({"config_hash": exp.digest(), "results": summary}),
        })
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, args) -> int:
    """Full grid-search matrices, one row per (theta0, strategy, grid point)."""
    exp = cfg.experiment
    _check_budget(exp)
    bank = NoiseBank.generate(exp.master_seed, exp.n_mc, exp.T)
    rows = []
    for theta0 in exp.theta0_list:
        model = quadratic_example(theta0, exp.sigma2)
        for strategy in exp.strategies:
            gr = grid_search(model, strategy, exp, bank)
            for k, tu in enumerate(gr.tunings):
                rows.append({"theta0": theta0, "strategy": strategy,
                             **tuning_columns(strategy, tu),
                             "R_bar": float(gr.empirical[k]),
                             "R_bar_stderr": float(gr.stderr[k]), "R_ub": float(gr.bound[k])})
            log.info("swept theta0=%g %s (%d points)", theta0, strategy, len(gr.tunings))
    out = Path(args.out or ".")
    write_outputs(out, {"sweep.csv": csv_text(SWEEP_COLUMNS, rows)})
    print(f"wrote {len(rows)} grid points to {out / 'sweep.csv'}")
    return EXIT_OK


def _check_budget(exp):
    from .mc import evaluation_count

    n = evaluation_count(exp)
    if n > exp.max_evaluations:
        raise BudgetExceeded(f"{n:.3g} replicate-steps exceed max_evaluations={exp.max_evaluations:.3g}")


def reproduce_files(cfg: RunConfig, jobs: int = 1) -> dict:
    """Run the full experiment and render every output file as text."""
    exp = cfg.experiment
    run_cfg = exp
    if exp.fig2_theta0 not in exp.theta0_list:
        run_cfg = dataclasses.replace(exp, theta0_list=tuple(exp.theta0_list) + (exp.fig2_theta0,))
        _check_budget(exp)
    results = run_experiment(run_cfg, jobs=jobs)
    table, summary = [], {}
    for theta0 in exp.theta0_list:
        per = {}
        for strategy, gr in results[theta0].items():
            per[strategy] = {}
            for d in designs(exp.design_mode):
                rep = gr.report(d)
                per[strategy][d] = rep
                table.append({"theta0": theta0, "strategy": strategy, "design": d,
                              **tuning_columns(strategy, rep["tuning"]),
                              **{k: rep[k] for k in ("R_bar", "R_bar_stderr", "R_ub",
                                                     "condition_lhs")}})
        summary[repr(theta0)] = per
    fig = []
    for strategy, gr in results[exp.fig2_theta0].items():
        for d in designs(exp.design_mode):
            mean, se = gr.trajectories[d]
            for t in range(mean.size):
                fig.append({"strategy": strategy, "design": d, "t": t + 1,
                            "mean_cumulative_regret": float(mean[t]), "stderr": float(se[t])})
    convention = next(iter(results[exp.theta0_list[0]].values())).design_convention
    return {
        "table1.csv": csv_text(TABLE_COLUMNS, table),
        "fig2_data.csv": csv_text(FIG2_COLUMNS, fig),
        "summary.json": json_text({"config": exp.to_dict(), "config_hash": exp.digest(),
                                   "design_convention": convention,
                                   "fig2_theta0": exp.fig2_theta0, "results": summary}),
    }


def cmd_reproduce(cfg: RunConfig, args) -> int:
    exp = cfg.experiment
    start = time.perf_counter()
    files = reproduce_files(cfg, jobs=args.jobs)
    out = Path(args.out or "results")
    listed = write_outputs(out, files)
    manifest = {"config_hash": exp.digest(), "code_version": __version__,
                "master_seed": exp.master_seed, "outputs": listed,
                "wall_time": time.perf_counter() - start}
    write_outputs(out, {"manifest.json": json_text(manifest)})
    print(files["table1.csv"], end="")
    print(f"wrote {', '.join(sorted(files))}, manifest.json to {out}")
    return EXIT_OK


def verify_battery(cfg: RunConfig, extra=(), verbose=False):
    """Brute-force and KKT checks; returns ``(rows, failures)``."""
    v = cfg.verify
    grid = v.grid_points()
    instances = [(T, i0, fam, u0, make_info(fam, u0))
                 for T in v.T for i0 in v.i0 for fam in v.families for u0 in v.u0_star]
    instances += [(T, i0, name, None, ifn) for T in v.T for i0 in v.i0 for name, ifn in extra]
    rows, failures = [], 0
    for T, i0, fam, u0, ifn in instances:
        res = brute_force_verify(ifn, i0, T, grid, budget=int(v.budget))
        sol = res.reference
        lam = kkt_certificate(ifn, i0, sol.schedule, T)
        slack = float(np.max(np.abs(lam * sol.schedule)))
        ok = (res.tail_zero and res.nonincreasing and float(np.min(lam)) >= -v.kkt_tol
              and slack <= v.kkt_tol and res.gap >= -1e-9 * max(1.0, abs(res.value)))
        failures += not ok
        rows.append({"T": T, "i0": i0, "family": fam, "u0_star": u0,
                     "argmin": [float(a) for a in res.argmin], "grid_value": res.value,
                     "kind": sol.kind, "x1": sol.x1, "bound_value": sol.bound_value,
                     "tail_zero": res.tail_zero, "nonincreasing": res.nonincreasing,
                     "kkt_min": float(np.min(lam)), "kkt_slack": slack, "ok": ok})
        msg = (f"{'PASS' if ok else 'FAIL'} T={T} i0={i0:g} {fam} u0*={u0 if u0 is None else f'{u0:g}'} "
               f"{sol.kind} x1={sol.x1:.4g}")
        if verbose:
            msg += f" argmin={np.array2string(res.argmin, precision=6)} lambda_min={np.min(lam):.2e}"
        print(msg)
    return rows, failures


def cmd_verify(cfg: RunConfig, args) -> int:
    extra = []
    if args.custom_poly:
        coeffs = [float(c) for c in args.custom_poly.split(",")]
        try:
            extra.append((f"poly{tuple(coeffs)}", polynomial_info(coeffs)))
        except AssumptionError as exc:
            print(f"custom information function rejected: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    rows, failures = verify_battery(cfg, extra, verbose=args.verbose > 0)
    print(f"{len(rows) - failures}/{len(rows)} instances passed")
    if args.out:
        write_outputs(Path(args.out), {"verify.json": json_text({"instances": rows,
                                                                 "failures": failures})})
    return EXIT_VERIFY if failures else EXIT_OK


COMMANDS = {
    "plan": cmd_plan,
    "check-condition": cmd_check_condition,
    "simulate": cmd_simulate,
    "reproduce": cmd_reproduce,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file (defaults reproduce the published setup)")
    common.add_argument("--seed", type=int, help="override experiment.master_seed")
    common.add_argument("--theta0", type=float, action="append",
                        help="true parameter; repeat to list several (overrides theta0_list)")
    common.add_argument("--design", choices=("a", "b", "both"), help="override design_mode")
    common.add_argument("--oracle-design", type=_bool, metavar="BOOL",
                        help="design-time formulas use the true theta0")
    common.add_argument("--n-mc", type=int, help="override the replicate count")
    common.add_argument("--horizon", type=int, help="override the horizon T")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (output is identical)")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="explore-regret", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("plan", parents=[common], help="bound-optimal schedule per theta0")
    sub.add_parser("check-condition", parents=[common],
                   help="evaluate the immediate-exploration sufficient condition")
    sp = sub.add_parser("simulate", parents=[common], help="Monte Carlo run of one tuned strategy")
    sp.add_argument("--strategy", required=True,
                    choices=("lazy", "immediate_gaussian", "immediate_binary", "decaying_gaussian"))
    sp.add_argument("--x", type=float, help="first-step variance for immediate strategies")
    sp.add_argument("--c", type=float, help="decaying constant")
    sp.add_argument("--p", type=float, help="decaying exponent (< 0)")
    sub.add_parser("reproduce", parents=[common], help="full grid-search table and trajectories")
    vp = sub.add_parser("verify", parents=[common], help="structural checks on small horizons")
    vp.add_argument("--custom-poly", metavar="C0,C1,...",
                    help="also verify i(x) = sum c_k x^k (validated first)")
    sub.add_parser("sweep", parents=[common], help="export raw grid-search matrices")
    return p


def main(argv: Optional[list] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = resolve(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
