"""End-to-end acceptance checks, one test per criterion.

Each test prints and logs a ``PASS criterion N: ...`` or ``FAIL criterion N: ...``
line before asserting, so the terminal summary lists every outcome.
"""
import time

import numpy as np
import pytest

from qecmet.codes import (
    CodePair,
    build_recovery,
    canonical_code,
    check_conditions,
    code_fidelity,
    compress_ancilla,
)
from qecmet.dynamics import (
    SimulationConfig,
    crossover_slope,
    free_evolve,
    one_step_error,
    qec_evolve,
    robustness_experiment,
    sql_bound,
)
from qecmet.operators import trace_abs
from qecmet.optimize import brute_force_dual, optimize_model
from qecmet.presets import kerr_model, qubit_model
from qecmet.span import hnls_check

from modelgen import hnls_false_model, hnls_true_model, random_state

LOSS_RATE = 0.1


def _record(log, n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    log.append(line)
    assert ok, line


def _kerr_reference(n_bar):
    c0 = np.zeros(n_bar + 1)
    c0[n_bar // 2] = 1
    c1 = np.zeros(n_bar + 1)
    c1[[0, n_bar]] = 1 / np.sqrt(2)
    return CodePair(c0, c1, n_bar + 1, 1)


def _fit(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def test_criterion_1_kerr_headline(acceptance_log):
    worst_s, worst_q, slowest = 0.0, 0.0, 0.0
    for n_bar in (2, 4, 8):
        start = time.perf_counter()
        res = optimize_model(kerr_model(n_bar, LOSS_RATE))
        slowest = max(slowest, time.perf_counter() - start)
        worst_s = max(worst_s, abs(res.s_star - n_bar ** 2 / 8))
        worst_q = max(worst_q, abs(res.qfi_coefficient - n_bar ** 4 / 16))
    ok = worst_s < 1e-6 and worst_q < 1e-5 and slowest < 10.0
    _record(acceptance_log, 1, ok,
            f"max |s*-n^2/8|={worst_s:.2e}, max |4s*^2-n^4/16|={worst_q:.2e}, slowest {slowest:.2f}s")


def test_criterion_2_kerr_code(acceptance_log):
    res = optimize_model(kerr_model(4, LOSS_RATE))
    reduced = res.reduced_code
    ref = _kerr_reference(4)
    fid = code_fidelity(reduced, ref) if reduced is not None else 0.0
    proj_err = (float(np.max(np.abs(reduced.projector - ref.projector)))
                if reduced is not None else np.inf)
    ok = reduced is not None and fid >= 1 - 1e-8 and proj_err < 1e-8
    _record(acceptance_log, 2, ok, f"fidelity 1-{1 - fid:.1e}, projector error {proj_err:.1e}")


def test_criterion_3_canonical_codes(acceptance_log):
    rng = np.random.default_rng(3)
    worst_res, worst_gap, count = 0.0, 0.0, 0
    for k in range(200):
        d, r = 2 + k % 5, 1 + (k // 5) % 2
        model = hnls_true_model(rng, d, r)
        g_perp = hnls_check(model).g_perp
        rep = check_conditions(canonical_code(g_perp), model)
        expected = 2 * np.trace(g_perp @ g_perp).real / trace_abs(g_perp)
        worst_res = max(worst_res, rep.residual_1, rep.residual_2)
        worst_gap = max(worst_gap, abs(rep.gap_3 - expected))
        count += 1
    ok = count >= 200 and worst_res < 1e-9 and worst_gap < 1e-9
    _record(acceptance_log, 3, ok,
            f"{count} models, max residual {worst_res:.1e}, max gap error {worst_gap:.1e}")


def test_criterion_4_sql_bound(acceptance_log):
    rng = np.random.default_rng(4)
    times = tuple(np.linspace(0.1, 10, 12))
    worst_res, worst_ratio, count = 0.0, 0.0, 0
    for k in range(50):
        d, r = 2 + k % 4, 1 + (k // 4) % 2
        model = hnls_false_model(rng, d, r)
        rep = sql_bound(model)
        worst_res = max(worst_res, rep.residual_beta2)
        # entangled probe-ancilla input, the most general pure strategy
        psi = random_state(rng, d * d)
        traj = free_evolve(model, psi, SimulationConfig(dt=1e-3, sample_times=times))
        worst_ratio = max(worst_ratio, float(np.max(traj.qfi / (rep.bound_coeff * traj.times))))
        count += 1
    ok = count >= 50 and worst_res < 1e-9 and worst_ratio <= 1.05
    _record(acceptance_log, 4, ok,
            f"{count} models, max residual {worst_res:.1e}, max qfi/bound {worst_ratio:.3f}")


def test_criterion_5_kerr_heisenberg_scaling(acceptance_log):
    start = time.perf_counter()
    model = kerr_model(4, LOSS_RATE)
    code, _ = compress_ancilla(optimize_model(model).code)
    cfg = SimulationConfig(dt=1e-3, sample_times=tuple(np.linspace(1, 10, 10)))
    traj = qec_evolve(model, code, build_recovery(code, model), cfg)
    elapsed = time.perf_counter() - start
    ratio = traj.qfi / traj.times ** 2
    dev = float(np.max(np.abs(ratio / 16 - 1)))
    ok = 1.95 <= traj.fitted_exponent <= 2.05 and dev <= 0.02 and elapsed < 60
    _record(acceptance_log, 5, ok,
            f"exponent {traj.fitted_exponent:.4f}, max |qfi/(16t^2)-1|={dev:.2e}, {elapsed:.2f}s")


def _duality_gap(model):
    res = optimize_model(model)
    basis = res.basis
    gap = abs(res.duality.primal_objective - 2 * res.s_star)
    brute = None
    if len(basis) <= 4:
        brute = abs(brute_force_dual(res.dual.g_perp, basis, points=15, refinements=30,
                                     shrink=0.5) - res.s_star)
    return gap, brute


def test_criterion_6_duality(acceptance_log):
    rng = np.random.default_rng(6)
    models = [kerr_model(n, LOSS_RATE) for n in (2, 4, 8)]
    models.append(qubit_model([0, 0, 1], [1, 0, 0]))
    models += [hnls_true_model(rng, 2 + k % 4, 1 + (k // 4) % 2) for k in range(24)]
    worst_gap, worst_brute, n_brute = 0.0, 0.0, 0
    for model in models:
        gap, brute = _duality_gap(model)
        worst_gap = max(worst_gap, gap)
        if brute is not None:
            worst_brute = max(worst_brute, brute)
            n_brute += 1
    ok = worst_gap < 1e-6 and worst_brute < 1e-4 and n_brute > 0
    _record(acceptance_log, 6, ok,
            f"{len(models)} models, max gap {worst_gap:.1e}, "
            f"max brute-force diff {worst_brute:.1e} over {n_brute}")


def test_criterion_7_qubit_dichotomy(acceptance_log):
    good = qubit_model([0, 0, 1], [1, 0, 0])
    res = optimize_model(good)
    code, _ = compress_ancilla(res.code)
    cfg = SimulationConfig(dt=1e-3, sample_times=tuple(np.linspace(1, 10, 10)))
    traj = qec_evolve(good, code, build_recovery(code, good), cfg)
    dev = float(np.max(np.abs(traj.qfi / traj.times ** 2 - 1)))
    bad = qubit_model([0, 0, 1], [0, 0, 1])
    verdict = hnls_check(bad)
    rep = sql_bound(bad)
    plus = np.array([1, 1]) / np.sqrt(2)
    free = free_evolve(bad, plus, SimulationConfig(dt=1e-3, sample_times=tuple(np.linspace(0.1, 10, 12))))
    ratio = float(np.max(free.qfi / (rep.bound_coeff * free.times)))
    ok = (abs(res.s_star - 0.5) < 1e-9 and dev <= 0.02 and 1.95 <= traj.fitted_exponent <= 2.05
          and not verdict.holds and rep.solvable and ratio <= 1.0 + 1e-9)
    _record(acceptance_log, 7, ok,
            f"x-noise s*={res.s_star:.9f}, max |qfi/t^2-1|={dev:.1e}; "
            f"z-noise HNLS={verdict.holds}, qfi/bound <= {ratio:.3f}")


def test_criterion_8_robustness(acceptance_log):
    start = time.perf_counter()
    model = kerr_model(4, LOSS_RATE, dephasing=1.0)
    code, _ = compress_ancilla(optimize_model(model).code)
    reports = robustness_experiment(model, code, build_recovery(code, model), SimulationConfig(dt=1e-4),
                                    [1e-3, 3e-3, 1e-2])
    slope = crossover_slope(reports)
    elapsed = time.perf_counter() - start
    bounds = all(r.bound_ok for r in reports)
    ok = bounds and abs(slope + 1) <= 0.15 and elapsed < 300
    crossings = ", ".join(f"{r.crossover_time_estimate:.0f}" for r in reports)
    _record(acceptance_log, 8, ok,
            f"distance bound {'holds' if bounds else 'violated'}, crossovers [{crossings}], "
            f"slope {slope:.3f}, {elapsed:.1f}s")


@pytest.mark.parametrize("name", ["qubit", "kerr"])
def test_criterion_9_one_step_order(acceptance_log, name):
    model = (qubit_model([0, 0, 1], [1, 0, 0]) if name == "qubit" else kerr_model(4, LOSS_RATE))
    model = model.with_omega(1.0)
    code, _ = compress_ancilla(canonical_code(hnls_check(model).g_perp))
    rec = build_recovery(code, model)
    dts = [1e-2, 3e-3, 1e-3, 3e-4]
    slope = _fit(dts, [one_step_error(model, code, rec, dt) for dt in dts])
    _record(acceptance_log, 9, slope >= 1.9, f"{name} canonical code, one-step error exponent {slope:.3f}")
