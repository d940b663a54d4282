"""Command-line entry point ``qecmet``.

Data goes to stdout (JSON or CSV); diagnostics go to stderr.  Exit codes:
0 success, 1 error, 2 for ``check`` when the signal lies in the span.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .codes import (
    build_recovery,
    canonical_code,
    check_conditions,
    compress_ancilla,
    effective_generator,
)
from .dynamics import (
    EXACT,
    FIRST_ORDER,
    SimulationConfig,
    crossover_slope,
    qec_evolve,
    robustness_experiment,
    sql_bound,
)
from .fileio import CodeFile, parse_code, parse_model, write_code, write_model
from .optimize import SolverOptions, optimize_model
from .presets import kerr_model, qubit_model
from .span import DEFAULT_HNLS_TOL, hnls_check

logger = logging.getLogger("qecmet")

OUT_ENV = "QECMET_OUT"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _out_dir() -> Path:
    p = Path(os.environ.get(OUT_ENV, "."))
    p.mkdir(parents=True, exist_ok=True)
    return p


def _emit_json(obj) -> None:
    sys.stdout.write(json.dumps(obj, indent=2, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not serialisable: {type(x)}")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def _write_data(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _code_file(code, model, provenance, s_star=None) -> CodeFile:
    return CodeFile(code, s_star, effective_generator(code, model.G).eigengap, provenance)


def cmd_check(args) -> int:
    model = parse_model(args.model)
    verdict = hnls_check(model, args.tol)
    _emit_json(verdict.as_dict())
    if verdict.marginal:
        print("warning: verdict is marginal (norm within 10x of tol)", file=sys.stderr)
    return 0 if verdict.holds else 2


def cmd_synth(args) -> int:
    model = parse_model(args.model)
    verdict = hnls_check(model, args.tol)
    if not verdict.holds:
        raise ValueError("G lies in the Lindblad span; no code gives Heisenberg scaling")
    code = canonical_code(verdict.g_perp)
    report = check_conditions(code, model)
    write_code(_code_file(code, model, "canonical"), args.output)
    _emit_json({"code": str(args.output), "d_A": code.d_A,
                "eigengap": effective_generator(code, model.G).eigengap,
                "conditions": report.as_dict()})
    return 0


def cmd_optimize(args) -> int:
    model = parse_model(args.model)
    opts = SolverOptions(gtol=args.gtol, obj_tol=args.obj_tol)
    res = optimize_model(model, opts, args.tol)
    if args.ancilla_free and res.reduced_code is not None:
        code = res.reduced_code
    else:
        code, _ = compress_ancilla(res.code)
    write_code(_code_file(code, model, "optimized", res.s_star), args.output)
    _emit_json({
        "code": str(args.output),
        "d_A": code.d_A,
        "ancilla_free_available": res.reduced_code is not None,
        "s_star": res.s_star,
        "qfi_coefficient": res.qfi_coefficient,
        "dual": res.dual.as_dict(),
        "primal": res.primal.as_dict(),
        "duality": res.duality.as_dict(),
        "conditions": check_conditions(code, model).as_dict(),
    })
    if not res.duality.ok:
        print("warning: duality check failed", file=sys.stderr)
    return 0


def _config(args, **kw) -> SimulationConfig:
    model_omega = kw.pop("omega")
    omega = args.omega if args.omega is not None else model_omega
    return SimulationConfig(dt=args.dt, omega=omega, omega_step=args.omega_step,
                            integrator=args.integrator, **kw)


def cmd_simulate(args) -> int:
    model = parse_model(args.model)
    code, _ = compress_ancilla(parse_code(args.code).code)
    cfg = _config(args, t_max=args.t_max, omega=model.omega, qec_enabled=not args.no_qec,
                  n_samples=args.samples)
    model = model.with_omega(cfg.omega)
    recovery = None if args.no_qec else build_recovery(code, model)
    traj = qec_evolve(model, code, recovery, cfg)
    _write_data(_csv(("t", "qfi", "fidelity", "offcode_weight"), traj.rows()), args.output)
    print(json.dumps({"fitted_exponent": traj.fitted_exponent,
                      "qfi_over_t2_final": float(traj.qfi[-1] / traj.times[-1] ** 2),
                      "richardson_ok": traj.richardson_ok}), file=sys.stderr)
    return 0


def cmd_sql_bound(args) -> int:
    model = parse_model(args.model)
    times = np.linspace(args.t_max / args.samples, args.t_max, args.samples)
    rep = sql_bound(model, args.dt, times)
    if not rep.solvable:
        raise ValueError(
            f"G is not in the Lindblad span (residual {rep.residual_beta2:.3e}); no linear bound applies"
        )
    _write_data(_csv(("t", "bound"), zip(rep.times, rep.bound)), args.output)
    print(json.dumps(rep.as_dict()), file=sys.stderr)
    return 0


def cmd_robustness(args) -> int:
    model = parse_model(args.model)
    code, _ = compress_ancilla(parse_code(args.code).code)
    eps = [float(x) for x in args.eps_grid.split(",") if x.strip()]
    if not eps:
        raise ValueError("empty --eps-grid")
    cfg = _config(args, omega=model.omega)
    model = model.with_omega(cfg.omega)
    reports = robustness_experiment(model, code, build_recovery(code, model), cfg, eps)
    rows = [row for r in reports for row in r.rows()]
    _write_data(_csv(("epsilon", "t", "distance", "qfi", "ideal_qfi"), rows), args.output)
    summary = {
        "crossover": [{"epsilon": r.epsilon, "crossover_time": r.crossover_time_estimate,
                       "distance_bound_ok": r.bound_ok} for r in reports],
        "log_log_slope": crossover_slope(reports),
    }
    path = Path(args.summary) if args.summary else _out_dir() / "robustness_summary.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    print(f"summary written to {path}", file=sys.stderr)
    return 0


def cmd_demo(args) -> int:
    if args.preset == "kerr":
        model = kerr_model(args.nbar, args.loss_rate, dephasing=args.dephasing)
    else:
        model = qubit_model([0, 0, 1], [1, 0, 0], args.loss_rate)
    out = _out_dir()
    model_path = write_model(model, out / f"{args.preset}_model.json")
    res = optimize_model(model)
    code, _ = compress_ancilla(res.code)
    code_path = write_code(_code_file(code, model, "optimized", res.s_star), out / f"{args.preset}_code.json")
    cfg = SimulationConfig(dt=1e-3, t_max=args.t_max, n_samples=20)
    traj = qec_evolve(model, code, build_recovery(code, model), cfg)
    _emit_json({
        "preset": args.preset,
        "s_star": res.s_star,
        "qfi_coefficient": res.qfi_coefficient,
        "simulated_qfi_over_t2": float(traj.qfi[-1] / traj.times[-1] ** 2),
        "fitted_exponent": traj.fitted_exponent,
        "ancilla_free_code": res.reduced_code is not None,
        "model_file": str(model_path),
        "code_file": str(code_path),
    })
    return 0


def _add_sim_flags(p, t_max: bool = True):
    p.add_argument("--dt", type=float, default=1e-3)
    if t_max:
        p.add_argument("--t-max", type=float, default=10.0)
    p.add_argument("--omega", type=float, default=None, help="override the model's omega")
    p.add_argument("--omega-step", type=float, default=None)
    p.add_argument("--integrator", choices=(EXACT, FIRST_ORDER), default=EXACT)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qecmet", description="Heisenberg-limit checks, optimal codes and simulations")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="test whether G has a component outside the Lindblad span")
    c.add_argument("model")
    c.add_argument("--tol", type=float, default=DEFAULT_HNLS_TOL)
    c.set_defaults(func=cmd_check)

    c = sub.add_parser("synth", help="canonical code from G_perp")
    c.add_argument("model")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--tol", type=float, default=DEFAULT_HNLS_TOL)
    c.set_defaults(func=cmd_synth)

    c = sub.add_parser("optimize", help="optimal code by operator-norm minimisation")
    c.add_argument("model")
    c.add_argument("-o", "--output", required=True)
    c.add_argument("--gtol", type=float, default=1e-9)
    c.add_argument("--obj-tol", type=float, default=1e-7)
    c.add_argument("--tol", type=float, default=DEFAULT_HNLS_TOL)
    c.add_argument("--ancilla-free", action="store_true",
                   help="write the ancilla-free code when one exists")
    c.set_defaults(func=cmd_optimize)

    c = sub.add_parser("simulate", help="QFI of corrected (or uncorrected) dynamics as CSV")
    c.add_argument("model")
    c.add_argument("--code", required=True)
    _add_sim_flags(c)
    c.add_argument("--samples", type=int, default=100)
    c.add_argument("--no-qec", action="store_true")
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_simulate)

    c = sub.add_parser("sql-bound", help="linear QFI bound when G lies in the span")
    c.add_argument("model")
    c.add_argument("--t-max", type=float, default=10.0)
    c.add_argument("--dt", type=float, default=None, help="also evaluate the finite-step bound")
    c.add_argument("--samples", type=int, default=100)
    c.add_argument("-o", "--output")
    c.set_defaults(func=cmd_sql_bound)

    c = sub.add_parser("robustness", help="crossover under perturbing noise")
    c.add_argument("model")
    c.add_argument("--code", required=True)
    c.add_argument("--eps-grid", required=True, help="comma-separated noise strengths")
    _add_sim_flags(c, t_max=False)
    c.set_defaults(dt=1e-4)
    c.add_argument("-o", "--output")
    c.add_argument("--summary", help=f"summary JSON path (default: ${OUT_ENV} or cwd)")
    c.set_defaults(func=cmd_robustness)

    c = sub.add_parser("demo", help="run the full pipeline on a preset")
    c.add_argument("preset", choices=("qubit", "kerr"))
    c.add_argument("--nbar", type=int, default=4)
    c.add_argument("--loss-rate", type=float, default=0.1)
    c.add_argument("--dephasing", type=float, default=0.0,
                   help="kerr only: add the perturbing jump sqrt(d) n to the written model")
    c.add_argument("--t-max", type=float, default=10.0)
    c.set_defaults(func=cmd_demo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"qecmet: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
