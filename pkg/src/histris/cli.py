"""Command-line front end.

Subcommands: ``solve``, ``sweep``, ``verify {compat,bounds,lipschitz,
unique,dual,history}``, ``optimize``.  Every run reads one YAML config
(all sections optional), writes CSV artifacts into the ``--out``
directory and prints a one-line summary.  The first line of every CSV
names the hash of the effective config, so artifacts are traceable to
their exact inputs; floats are written with 17 significant digits so
repeated runs are byte-identical.

Exit codes: 0 on success, 1 on numerical failure or a failed
verification, 2 on configuration errors.
"""

from __future__ import annotations

import argparse
import math
import csv
import os
import sys

from .config import (
    ConfigError,
    build_control,
    build_experiment,
    build_scenario,
    config_hash,
    load_config_file,
    normalize_config,
)
from .control import optimize
from .errors import NumericalFailure
from .expressions import ExpressionError
from .spatial import h1_norm
from .verify import (
    DUAL_RESIDUAL_TOL,
    DUAL_SLOPE_MIN,
    HISTORY_SLOPE_TOL,
    UNIQUENESS_GAP_TOL,
    compatibility_check,
    dual_equivalence,
    dual_equivalence_slope,
    history_lipschitz_check,
    lipschitz_experiment,
    uniform_bound_experiment,
    uniqueness_probe,
)
from .viscous import solve_viscous
from .vv import vv_sweep

__all__ = ["main"]

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def _write_csv(path: str, cfg: dict, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# config_hash={config_hash(cfg)}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_trajectory(path: str, cfg: dict, mesh, traj) -> None:
    header = ["time"] + [f"q{i}" for i in range(mesh.n_nodes)]
    rows = [
        [traj.times[k]] + list(traj.values[k]) for k in range(len(traj.times))
    ]
    _write_csv(path, cfg, header, rows)


def _write_report(path: str, cfg: dict, mesh, traj, report) -> None:
    header = [
        "time",
        "state_h1_norm",
        "rate_h1_norm",
        "dissipation_rate",
        "energy",
        "balance_residual",
    ]
    rows = []
    for k in range(len(traj.times)):
        rate = report.rate_h1_norms[k - 1] if k > 0 else 0.0
        diss = (
            report.dissipation_rates[k - 1]
            if k > 0 and report.dissipation_rates is not None
            else math.nan if k > 0 else 0.0
        )
        bal = (
            report.balance_residuals[k - 1]
            if k > 0 and report.balance_residuals is not None
            else math.nan if k > 0 else 0.0
        )
        rows.append([
            traj.times[k],
            h1_norm(mesh, traj.values[k]),
            float(rate),
            float(diss),
            report.energies[k],
            float(bal),
        ])
    _write_csv(path, cfg, header, rows)


def cmd_solve(cfg: dict, out: str, args) -> int:
    scenario = build_scenario(cfg)
    compat = compatibility_check(scenario)
    if not compat.ok:
        print(f"WARNING: {compat.message}")
    eps = cfg["solver"]["eps"]
    traj, report = solve_viscous(
        scenario, eps,
        method=cfg["solver"]["method"],
        warm_start=cfg["solver"]["warm_start"],
    )
    _write_trajectory(os.path.join(out, "trajectory.csv"), cfg, scenario.mesh, traj)
    _write_report(os.path.join(out, "report.csv"), cfg, scenario.mesh, traj, report)
    print(
        f"solve: method={report.method} eps={eps:g} steps={scenario.n_steps} "
        f"max balance residual={report.max_balance_residual:.3e} "
        f"final state norm={h1_norm(scenario.mesh, traj.values[-1]):.6g} -> {out}"
    )
    return EXIT_OK


def cmd_sweep(cfg: dict, out: str, args) -> int:
    scenario = build_scenario(cfg)
    sw = cfg["sweep"]
    result = vv_sweep(
        scenario,
        sw["eps_values"],
        certificate_tol=sw["certificate_tol"],
        n_directions=int(sw["directions"]),
        seed=cfg["seed"],
    )
    header = [
        "eps", "c_gap_from_prev", "h1_gap_from_prev",
        "max_balance_residual", "max_rate_h1_norm",
    ]
    rows = []
    for i, eps in enumerate(result.eps_values):
        rows.append([
            eps,
            result.c_diffs[i - 1] if i > 0 else math.nan,
            result.h1_diffs[i - 1] if i > 0 else math.nan,
            result.reports[i].max_balance_residual,
            result.reports[i].max_rate_h1_norm,
        ])
    _write_csv(os.path.join(out, "sweep_summary.csv"), cfg, header, rows)
    for i, traj in enumerate(result.trajectories):
        _write_trajectory(
            os.path.join(out, f"trajectory_eps{i:02d}.csv"), cfg,
            scenario.mesh, traj,
        )
    ratios = [
        result.c_diffs[i + 1] / result.c_diffs[i]
        for i in range(len(result.c_diffs) - 1)
        if result.c_diffs[i] > 0
    ]
    cert = result.certificate
    status = "PASS" if cert.passed else "FAIL"
    print(
        f"sweep: {len(result.eps_values)} levels, final C gap "
        f"{result.c_diffs[-1]:.3e}, gap ratios "
        f"[{', '.join(f'{r:.2f}' for r in ratios)}]"
    )
    print(
        f"limit certificate: stability violation "
        f"{cert.max_stability_violation:.3e}, balance residual "
        f"{cert.max_balance_residual:.3e} (tol {cert.tolerance:g}): {status}"
    )
    return EXIT_OK if cert.passed else EXIT_NUMERICAL


def _verify_compat(cfg: dict, out: str) -> int:
    scenario = build_scenario(cfg)
    res = compatibility_check(scenario)
    _write_csv(
        os.path.join(out, "verify_compat.csv"), cfg,
        ["compatible", "worst_violation", "worst_node"],
        [[int(res.ok), res.worst_violation, res.worst_node]],
    )
    status = "PASS" if res.ok else "FAIL"
    print(f"verify compat: {res.message}: {status}")
    return EXIT_OK if res.ok else EXIT_NUMERICAL


def _verify_bounds(cfg: dict, out: str) -> int:
    res = uniform_bound_experiment(build_experiment(cfg))
    header = ["load", "eps", "ratio", "solution_norm", "load_norm",
              "balance_residual"]
    rows = [[r[k] for k in header] for r in res.rows]
    _write_csv(os.path.join(out, "verify_bounds.csv"), cfg, header, rows)
    status = "PASS" if res.passed else "FAIL"
    print(
        f"verify bounds: worst ratio spread over the viscosity schedule "
        f"{res.max_spread:.3f} (cap {res.spread_cap:g}): {status}"
    )
    return EXIT_OK if res.passed else EXIT_NUMERICAL


def _verify_lipschitz(cfg: dict, out: str) -> int:
    res = lipschitz_experiment(build_experiment(cfg))
    header = ["pair", "eps", "ratio", "solution_gap", "load_gap"]
    rows = [[r[k] for k in header] for r in res.rows]
    _write_csv(os.path.join(out, "verify_lipschitz.csv"), cfg, header, rows)
    status = "PASS" if res.passed else "FAIL"
    per_eps = ", ".join(
        f"eps={e:g}: {m:.3f}" for e, m in zip(res.eps_values, res.max_ratio_per_eps)
    )
    print(
        f"verify lipschitz: worst ratio per level [{per_eps}], "
        f"cross-level spread {res.cross_eps_spread:.3f} "
        f"(cap {res.spread_cap:g}), all finite={res.all_finite}: {status}"
    )
    return EXIT_OK if res.passed else EXIT_NUMERICAL


def _verify_unique(cfg: dict, out: str) -> int:
    scenario = build_scenario(cfg)
    res = uniqueness_probe(scenario, cfg["solver"]["eps"])
    rows = [[name, gap] for name, gap in res.gaps.items()]
    _write_csv(os.path.join(out, "verify_unique.csv"), cfg,
               ["pairing", "sup_h1_gap"], rows)
    passed = res.max_gap <= UNIQUENESS_GAP_TOL
    status = "PASS" if passed else "FAIL"
    print(
        f"verify unique: worst integrator disagreement {res.max_gap:.3e} "
        f"(tol {UNIQUENESS_GAP_TOL:g}, explicit refinement x{res.explicit_refine}): "
        f"{status}"
    )
    return EXIT_OK if passed else EXIT_NUMERICAL


def _verify_dual(cfg: dict, out: str) -> int:
    scenario = build_scenario(cfg)
    res = dual_equivalence(scenario, cfg["solver"]["eps"])
    taus, residuals, slope = dual_equivalence_slope(
        scenario, cfg["experiment"]["refinements"]
    )
    header = ["tau", "limit_residual"]
    rows = [[float(t), float(r)] for t, r in zip(taus, residuals)]
    _write_csv(os.path.join(out, "verify_dual.csv"), cfg, header, rows)
    passed = res.viscous_residual <= DUAL_RESIDUAL_TOL and slope >= DUAL_SLOPE_MIN
    status = "PASS" if passed else "FAIL"
    print(
        f"verify dual: viscous complementarity residual "
        f"{res.viscous_residual:.3e} (tol {DUAL_RESIDUAL_TOL:g}), "
        f"viscosity-free residual order {slope:.2f} in the step "
        f"(min {DUAL_SLOPE_MIN:g}): {status}"
    )
    return EXIT_OK if passed else EXIT_NUMERICAL


def _verify_history(cfg: dict, out: str) -> int:
    scenario = build_scenario(cfg)
    traj, _ = solve_viscous(scenario, cfg["solver"]["eps"])
    res = history_lipschitz_check(scenario, traj)
    header = ["rate_index", "time", "slope", "bound", "excess"]
    rows = [[r[k] for k in header] for r in res.rows]
    _write_csv(os.path.join(out, "verify_history.csv"), cfg, header, rows)
    passed = res.max_excess <= HISTORY_SLOPE_TOL
    status = "PASS" if passed else "FAIL"
    print(
        f"verify history: worst potential slope excess {res.max_excess:.3e} "
        f"over the four-point bound (tol {HISTORY_SLOPE_TOL:g}): {status}"
    )
    return EXIT_OK if passed else EXIT_NUMERICAL


_VERIFY_HANDLERS = {
    "compat": _verify_compat,
    "bounds": _verify_bounds,
    "lipschitz": _verify_lipschitz,
    "unique": _verify_unique,
    "dual": _verify_dual,
    "history": _verify_history,
}


def cmd_verify(cfg: dict, out: str, args) -> int:
    return _VERIFY_HANDLERS[args.experiment](cfg, out)


def cmd_optimize(cfg: dict, out: str, args) -> int:
    problem, options = build_control(cfg)
    result = optimize(problem, **options)
    m = len(problem.basis)
    header = (
        ["eval", "total", "tracking", "regularization", "load_norm",
         "response_norm", "bound_ratio"]
        + [f"theta{j}" for j in range(m)]
    )
    rows = [
        [i, rep.total, rep.tracking, rep.regularization, rep.load_norm,
         rep.response_norm, rep.bound_ratio] + list(rep.theta)
        for i, rep in enumerate(result.history)
    ]
    _write_csv(os.path.join(out, "optimize_trace.csv"), cfg, header, rows)
    best = result.best
    theta_txt = ", ".join(f"{c:.6g}" for c in best.theta)
    print(
        f"optimize: best objective {best.total:.6e} "
        f"(tracking {best.tracking:.3e}, penalty {best.regularization:.3e}) "
        f"at theta=[{theta_txt}] after {result.n_evals} evaluations, "
        f"converged={result.converged}"
    )
    return EXIT_OK if math.isfinite(best.total) else EXIT_NUMERICAL


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="YAML scenario file; defaults apply when omitted")
    parser.add_argument("--out", default="histris-out",
                        help="directory for CSV artifacts (default: histris-out)")
    parser.add_argument("--eps", type=float,
                        help="viscosity override for the solver section")
    parser.add_argument("--jobs", type=int,
                        help="max concurrent solves in experiments")
    parser.add_argument("--seed", type=int, help="seed override")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="histris",
        description="Viscous and vanishing-viscosity solves of "
                    "history-dependent rate-independent evolutions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="one viscous solve; trajectory and report CSVs")
    _add_common(p)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("sweep", help="viscosity sweep with limit certificate")
    _add_common(p)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("verify", help="run one verification experiment")
    p.add_argument("experiment", choices=sorted(_VERIFY_HANDLERS),
                   help="which check to run")
    _add_common(p)
    p.set_defaults(handler=cmd_verify)

    p = sub.add_parser("optimize", help="pattern-search load design")
    _add_common(p)
    p.set_defaults(handler=cmd_optimize)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = (
            load_config_file(args.config)
            if args.config is not None
            else normalize_config({})
        )
        if args.seed is not None:
            cfg["seed"] = int(args.seed)
        if args.eps is not None:
            if not (args.eps > 0 and math.isfinite(args.eps)):
                raise ConfigError(f"--eps must be positive, got {args.eps!r}")
            cfg["solver"]["eps"] = float(args.eps)
        if args.jobs is not None:
            if args.jobs < 1:
                raise ConfigError(f"--jobs must be at least 1, got {args.jobs}")
            cfg["experiment"]["jobs"] = int(args.jobs)
        os.makedirs(args.out, exist_ok=True)
        return args.handler(cfg, args.out, args)
    except (ConfigError, ExpressionError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
