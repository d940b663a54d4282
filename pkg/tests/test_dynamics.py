import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qecmet.codes import (
    build_recovery,
    canonical_code,
    compress_ancilla,
    effective_generator,
    embed_logical,
    optimal_input_state,
)
from qecmet.dynamics import (
    FIRST_ORDER,
    SimulationConfig,
    evolve_step,
    fitted_exponent,
    free_evolve,
    liouvillian,
    logical_step_map,
    mixed_state_qfi,
    one_step_error,
    qec_evolve,
    robustness_experiment,
    sld_qfi,
    sql_bound,
)
from qecmet.model import LindbladModel
from qecmet.operators import eig_hermitian, matrix_exp, operator_norm, trace_distance
from qecmet.optimize import optimize_model
from qecmet.presets import PAULI, kerr_model, qubit_model
from qecmet.span import hnls_check

from modelgen import hnls_false_model, hnls_true_model, random_hermitian, random_matrix, random_state

SX, SY, SZ = PAULI
PLUS = np.array([1, 1]) / np.sqrt(2)


def _pure_family(g, psi, t, omega):
    v = matrix_exp(g, -1j * omega * t) @ psi
    return np.outer(v, v.conj())


def _fit(xs, ys):
    return np.polyfit(np.log(xs), np.log(ys), 1)[0]


def test_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(dt=0)
    with pytest.raises(ValueError):
        SimulationConfig(dt=2, t_max=1)
    with pytest.raises(ValueError):
        SimulationConfig(omega_step=-1)
    with pytest.raises(ValueError):
        SimulationConfig(integrator="rk4")
    cfg = SimulationConfig(dt=0.1, t_max=1.0, n_samples=4)
    np.testing.assert_array_equal(cfg.step_counts(), [2, 5, 8, 10])
    assert SimulationConfig(omega=5.0).step == pytest.approx(5e-4)


def test_liouvillian_matches_master_equation(rng):
    model = LindbladModel(random_hermitian(rng, 3), (random_matrix(rng, 3),), (), 0.7)
    rho = np.outer(*(2 * [random_state(rng, 3)]))
    rho = rho @ rho.conj().T
    l = model.lindblad[0]
    direct = (-0.7j * (model.G @ rho - rho @ model.G) + l @ rho @ l.conj().T
              - 0.5 * (l.conj().T @ l @ rho + rho @ l.conj().T @ l))
    np.testing.assert_allclose((liouvillian(model) @ rho.reshape(-1)).reshape(3, 3), direct, atol=1e-12)


def test_pure_rotation_step():
    model = LindbladModel(SZ / 2, (), (), 1.3)
    rho = np.outer(PLUS, PLUS)
    out = evolve_step(model, rho, 0.01)
    assert trace_distance(out, _pure_family(SZ / 2, PLUS, 0.01, 1.3)) < 1e-12


def test_dephasing_fixed_point():
    model = LindbladModel(np.zeros((2, 2)), (SZ,))
    rho = np.outer(PLUS, PLUS)
    out = evolve_step(model, rho, 20.0)
    np.testing.assert_allclose(out, np.eye(2) / 2, atol=1e-12)


def test_first_order_vs_exact(rng):
    model = LindbladModel(random_hermitian(rng, 3), (random_matrix(rng, 3),), (), 1.0)
    rho = np.outer(random_state(rng, 3), random_state(rng, 3).conj())
    rho = rho @ rho.conj().T
    rho /= np.trace(rho)
    dts = [1e-2, 3e-3, 1e-3, 3e-4]
    dist = [trace_distance(evolve_step(model, rho, dt), evolve_step(model, rho, dt, FIRST_ORDER))
            for dt in dts]
    assert _fit(dts, dist) >= 1.9


def test_evolve_step_with_ancilla(rng):
    model = LindbladModel(random_hermitian(rng, 2), (random_matrix(rng, 2),))
    psi = random_state(rng, 6)
    rho = np.outer(psi, psi.conj())
    out = evolve_step(model, rho, 0.05)
    big = LindbladModel(np.kron(model.G, np.eye(3)), (np.kron(model.lindblad[0], np.eye(3)),))
    np.testing.assert_allclose(out, evolve_step(big, rho, 0.05), atol=1e-12)
    with pytest.raises(ValueError, match="incompatible"):
        evolve_step(model, np.eye(3) / 3, 0.1)


@settings(max_examples=30, deadline=None)
@given(d=st.integers(2, 5), r=st.integers(0, 3), seed=st.integers(0, 2**32 - 1),
       dt=st.floats(1e-4, 0.5))
def test_exact_step_is_physical(d, r, seed, dt):
    rng = np.random.default_rng(seed)
    model = LindbladModel(random_hermitian(rng, d), tuple(random_matrix(rng, d) for _ in range(r)),
                          (), rng.normal())
    psi = random_state(rng, d)
    out = evolve_step(model, np.outer(psi, psi.conj()), dt)
    assert abs(np.trace(out) - 1) < 1e-10
    assert np.max(np.abs(out - out.conj().T)) < 1e-10
    assert eig_hermitian(out)[0][0] >= -1e-10


def test_qfi_pure_family():
    t, h = 3.0, 1e-4
    f = mixed_state_qfi(_pure_family(SZ / 2, PLUS, t, -h / 2), _pure_family(SZ / 2, PLUS, t, h / 2), h)
    assert f == pytest.approx(t * t, rel=5e-3)
    still = np.eye(2) / 2
    assert mixed_state_qfi(still, still, h) == 0.0
    with pytest.raises(ValueError):
        mixed_state_qfi(still, np.eye(3) / 3, h)


@settings(max_examples=30, deadline=None)
@given(d=st.integers(2, 5), seed=st.integers(0, 2**32 - 1), t=st.floats(0.1, 5))
def test_qfi_matches_variance(d, seed, t):
    rng = np.random.default_rng(seed)
    g, psi, h = random_hermitian(rng, d), random_state(rng, d), 1e-4
    var = np.vdot(psi, g @ g @ psi).real - np.vdot(psi, g @ psi).real ** 2
    f = mixed_state_qfi(_pure_family(g, psi, t, -h / 2), _pure_family(g, psi, t, h / 2), h)
    assert f == pytest.approx(4 * t * t * var, rel=5e-3)
    # exact derivative through the SLD formula agrees as well
    v = matrix_exp(g, -0.0j) @ psi
    dv = -1j * t * g @ v
    exact = sld_qfi(np.outer(v, v.conj()), np.outer(dv, v.conj()) + np.outer(v, dv.conj()))
    assert exact == pytest.approx(4 * t * t * var, rel=1e-9)


def test_qfi_of_code_under_ideal_evolution():
    model = kerr_model(4, 0.1)
    code, _ = compress_ancilla(optimize_model(model).code)
    geff = effective_generator(code, model.G)
    psi = embed_logical(code, optimal_input_state(geff))
    pc = code.projector
    g = pc @ code.lift(model.G) @ pc  # logical dynamics see only the projected generator
    t, h = 2.0, 1e-4
    f = mixed_state_qfi(_pure_family(g, psi, t, -h / 2), _pure_family(g, psi, t, h / 2), h)
    assert f == pytest.approx(t * t * geff.eigengap ** 2, rel=5e-3)


def test_fitted_exponent():
    t = np.linspace(1, 10, 10)
    assert fitted_exponent(t, 3 * t ** 2) == pytest.approx(2.0)
    assert np.isnan(fitted_exponent(t, np.zeros(10)))


def _qubit_setup():
    model = qubit_model([0, 0, 1], [1, 0, 0])
    code, _ = compress_ancilla(optimize_model(model).code)
    return model, code, build_recovery(code, model)


def test_qec_qubit_heisenberg():
    model, code, rec = _qubit_setup()
    traj = qec_evolve(model, code, rec, SimulationConfig(dt=1e-3, t_max=5.0, n_samples=10))
    assert traj.qfi[-1] / traj.times[-1] ** 2 == pytest.approx(1.0, rel=0.02)
    assert traj.richardson_ok
    assert np.all(traj.qfi >= 0)
    assert np.all(traj.fidelity_to_ideal <= 1 + 1e-9)
    assert np.all(np.diff(traj.times) > 0)
    assert len(traj.states) == len(traj.times)


def test_logical_map_matches_direct_steps():
    model, code, rec = _qubit_setup()
    model = model.with_omega(0.8)
    phi, q = logical_step_map(model, code, rec, 1e-2)
    psi = embed_logical(code, optimal_input_state(effective_generator(code, model.G)))
    rho = np.outer(psi, psi.conj())
    sigma = code.basis.conj().T @ rho @ code.basis
    for _ in range(5):
        rho = rec(evolve_step(model, rho, 1e-2))
        sigma = (phi @ sigma.reshape(-1)).reshape(2, 2)
    np.testing.assert_allclose(code.basis @ sigma @ code.basis.conj().T, rho, atol=1e-12)


def test_qec_requires_recovery():
    model, code, _ = _qubit_setup()
    with pytest.raises(ValueError, match="recovery"):
        qec_evolve(model, code, None, SimulationConfig())


def test_kerr_without_qec_loses_scaling():
    model = kerr_model(4, 0.1)
    code, _ = compress_ancilla(optimize_model(model).code)
    traj = qec_evolve(model, code, None,
                      SimulationConfig(dt=1e-3, t_max=100.0, n_samples=20, qec_enabled=False))
    assert traj.fitted_exponent < 1.3
    assert np.all(traj.offcode_weight >= -1e-12)


@settings(max_examples=8, deadline=None)
@given(d=st.integers(2, 5), r=st.integers(1, 2), seed=st.integers(0, 2**32 - 1))
def test_canonical_code_heisenberg_scaling(d, r, seed):
    model = hnls_true_model(np.random.default_rng(seed), d, r)
    code, _ = compress_ancilla(canonical_code(hnls_check(model).g_perp))
    cfg = SimulationConfig(dt=1e-3, sample_times=tuple(np.linspace(1, 10, 10)))
    traj = qec_evolve(model, code, build_recovery(code, model), cfg)
    assert 1.95 <= traj.fitted_exponent <= 2.05


@settings(max_examples=8, deadline=None)
@given(d=st.integers(2, 4), seed=st.integers(0, 2**32 - 1))
def test_one_step_error_second_order(d, seed):
    model = hnls_true_model(np.random.default_rng(seed), d, 1).with_omega(1.0)
    code, _ = compress_ancilla(canonical_code(hnls_check(model).g_perp))
    rec = build_recovery(code, model)
    dts = [1e-2, 3e-3, 1e-3, 3e-4]
    assert _fit(dts, [one_step_error(model, code, rec, dt) for dt in dts]) >= 1.9


def test_sql_bound_dephasing():
    kappa = 0.7
    model = LindbladModel(SZ / 2, (np.sqrt(kappa) * SZ,))
    times = np.linspace(0.1, 10, 40)
    rep = sql_bound(model, 1e-4, times)
    assert rep.solvable and rep.residual_beta2 < 1e-12
    assert rep.bound_coeff == pytest.approx(1 / (4 * kappa), rel=1e-8)
    np.testing.assert_allclose(rep.bound, rep.bound_coeff * times)
    traj = free_evolve(model, PLUS, SimulationConfig(dt=1e-3, sample_times=tuple(times)))
    assert np.all(traj.qfi <= rep.bound * 1.0 + 1e-12)
    assert np.all(np.isnan(traj.offcode_weight))
    # the finite-step bound approaches the asymptotic one as dt shrinks
    assert rep.finite_dt_bound[-1] == pytest.approx(rep.bound[-1], rel=1e-2)


def test_sql_bound_unsolvable_when_hnls_holds():
    rep = sql_bound(LindbladModel(SZ / 2, (SX,)))
    assert not rep.solvable
    assert rep.residual_beta2 == pytest.approx(1 / np.sqrt(2), rel=1e-9)


def test_sql_bound_generator_in_span(rng):
    l = random_matrix(rng, 3)
    rep = sql_bound(LindbladModel(l.conj().T @ l, (l,)))
    assert rep.solvable and rep.residual_beta2 < 1e-10


@settings(max_examples=6, deadline=None)
@given(d=st.integers(2, 4), r=st.integers(1, 2), seed=st.integers(0, 2**32 - 1))
def test_sql_bound_dominates_uncorrected_qfi(d, r, seed):
    rng = np.random.default_rng(seed)
    model = hnls_false_model(rng, d, r)
    rep = sql_bound(model)
    assert rep.solvable
    times = np.linspace(0.1, 10, 25)
    psi = np.kron(random_state(rng, d), [1, 0])
    traj = free_evolve(model, psi, SimulationConfig(dt=1e-3, sample_times=tuple(times)))
    assert np.all(traj.qfi <= rep.bound_coeff * traj.times * 1.05)


def test_sql_bound_tightening_helps():
    kappa = 0.5
    model = LindbladModel(SZ / 2 + 0.3 * np.eye(2), (np.sqrt(kappa) * SZ + 0.2 * np.eye(2),))
    loose = sql_bound(model, tighten=False)
    tight = sql_bound(model)
    assert tight.bound_coeff <= loose.bound_coeff + 1e-12
    assert tight.bound_coeff == pytest.approx(1 / (4 * kappa), rel=1e-6)


def _kerr_robust_setup():
    model = kerr_model(4, 0.1, dephasing=1.0)
    res = optimize_model(model)
    code, _ = compress_ancilla(res.code)
    return model, code, build_recovery(code, model)


def test_robustness_zero_noise():
    model, code, rec = _kerr_robust_setup()
    (rep,) = robustness_experiment(model, code, rec, SimulationConfig(dt=1e-3, t_max=10.0), [0.0])
    assert rep.epsilon == 0.0 and rep.bound_ok
    assert np.max(rep.distance_curve) < 1e-3
    (fine,) = robustness_experiment(model, code, rec, SimulationConfig(dt=1e-4, t_max=10.0), [0.0])
    # the residual is a step-size artefact
    assert np.max(fine.distance_curve) == pytest.approx(np.max(rep.distance_curve) / 10, rel=0.05)


def test_robustness_effective_jumps_contract():
    model, code, rec = _kerr_robust_setup()
    reps = robustness_experiment(model, code, rec, SimulationConfig(dt=1e-4), [1e-2])
    e = reps[0]
    assert e.epsilon == pytest.approx(1e-2, rel=1e-12)
    total = sum(j.conj().T @ j for j in e.effective_jumps)
    assert operator_norm(total) <= e.epsilon + 1e-9
    assert e.bound_ok and np.isfinite(e.crossover_time_estimate)


def test_robustness_with_corrected_noise():
    # a perturbation equal to the corrected jump is absorbed by the code
    model, code, rec = _kerr_robust_setup()
    m = model.with_perturbation(model.lindblad)
    (rep,) = robustness_experiment(m, code, rec, SimulationConfig(dt=1e-3), [1e-2], horizon=1.0)
    for j in rep.effective_jumps:
        off = j - np.trace(j) / 2 * np.eye(2)
        assert np.max(np.abs(off)) < 1e-9  # logical action is a pure phase
    assert rep.bound_ok
    # generic noise would drift at order epsilon t; here only step-size residue remains
    assert np.max(rep.distance_curve / (rep.epsilon * rep.times)) < 1e-2


def test_robustness_requires_perturbation():
    model, code, rec = _qubit_setup()
    with pytest.raises(ValueError, match="perturbing"):
        robustness_experiment(model, code, rec, SimulationConfig(), [1e-3])
