"""Lindblad dynamics with and without error correction, Fisher information and bounds.

States of a probe with an ancilla live on ``H_P (x) H_A``; the noise acts on
the probe only, so a probe superoperator is applied block-wise over the
ancilla.  Superoperators use row-major vectorisation,
``vec(A X B) = (A (x) B^T) vec(X)``.

Under error correction the state after every recovery lies in the code
space, so one step ``R . E_dt`` is an exact linear map on 2x2 logical
density matrices.  Long runs raise that 4x4 map to integer powers instead of
stepping one ``dt`` at a time.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .codes import (
    CodePair,
    RecoveryChannel,
    effective_generator,
    embed_logical,
    optimal_input_state,
)
from .model import LindbladModel
from .operators import (
    check_density,
    eig_hermitian,
    matrix_exp,
    operator_norm,
    trace_abs,
)
from .optimize import SolverOptions, minimize_operator_norm
from .span import hnls_check

logger = logging.getLogger(__name__)

EXACT = "exact"
FIRST_ORDER = "first-order"
QFI_CUTOFF = 1e-12

__all__ = [
    "RobustnessReport",
    "SimulationConfig",
    "SqlBoundReport",
    "Trajectory",
    "crossover_slope",
    "evolve_step",
    "fitted_exponent",
    "free_evolve",
    "liouvillian",
    "logical_step_map",
    "mixed_state_qfi",
    "one_step_error",
    "qec_evolve",
    "robustness_experiment",
    "sld_qfi",
    "sql_bound",
    "step_superoperator",
]


@dataclass(frozen=True)
class SimulationConfig:
    """Time stepping and Fisher-information settings.

    ``sample_times`` overrides the default uniform grid of ``n_samples``
    points on ``(0, t_max]``; every sample time is rounded to a multiple of
    ``dt``.  ``omega_step`` defaults to ``1e-4 max(1, |omega|)``.
    """

    dt: float = 1e-3
    t_max: float = 10.0
    omega: float = 0.0
    omega_step: float | None = None
    integrator: str = EXACT
    qec_enabled: bool = True
    seed: int = 0
    n_samples: int = 100
    sample_times: tuple | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.sample_times is None and self.dt > self.t_max:
            raise ValueError("dt must not exceed t_max")
        if self.omega_step is not None and not self.omega_step > 0:
            raise ValueError("omega_step must be positive")
        if self.integrator not in (EXACT, FIRST_ORDER):
            raise ValueError(f"integrator must be {EXACT!r} or {FIRST_ORDER!r}")

    @property
    def step(self) -> float:
        return self.omega_step if self.omega_step is not None else 1e-4 * max(1.0, abs(self.omega))

    def step_counts(self) -> np.ndarray:
        if self.sample_times is not None:
            ts = np.asarray(self.sample_times, dtype=float)
        else:
            ts = np.linspace(self.t_max / self.n_samples, self.t_max, self.n_samples)
        ks = np.unique(np.maximum(np.rint(ts / self.dt).astype(np.int64), 1))
        return ks


@dataclass(frozen=True)
class Trajectory:
    """Sampled run.  ``states`` are joint probe-ancilla density matrices;
    ``logical_states`` holds the 2x2 code-space states of corrected runs."""

    times: np.ndarray
    states: tuple
    qfi: np.ndarray
    fidelity_to_ideal: np.ndarray
    offcode_weight: np.ndarray
    fitted_exponent: float
    richardson_ok: bool
    logical_states: tuple = ()

    def rows(self):
        for t, q, f, w in zip(self.times, self.qfi, self.fidelity_to_ideal, self.offcode_weight):
            yield float(t), float(q), float(f), float(w)


# ---------------------------------------------------------------- superoperators

def liouvillian(model: LindbladModel, omega: float | None = None,
                include_perturbation: bool = True) -> np.ndarray:
    """Generator of the master equation as a ``d^2 x d^2`` matrix."""
    w = model.omega if omega is None else omega
    d = model.dim
    eye = np.eye(d)
    g = model.G
    out = -1j * w * (np.kron(g, eye) - np.kron(eye, g.T))
    for l in model.jump_operators(include_perturbation):
        ll = l.conj().T @ l
        out = out + np.kron(l, l.conj()) - 0.5 * np.kron(ll, eye) - 0.5 * np.kron(eye, ll.T)
    return out


def _first_order_kraus(model: LindbladModel, omega: float, dt: float,
                       include_perturbation: bool = True) -> list[np.ndarray]:
    ls = model.jump_operators(include_perturbation)
    d = model.dim
    drift = -1j * omega * model.G
    for l in ls:
        drift = drift - 0.5 * l.conj().T @ l
    return [np.eye(d) + drift * dt] + [np.sqrt(dt) * l for l in ls]


def step_superoperator(model: LindbladModel, dt: float, omega: float | None = None,
                       integrator: str = EXACT, include_perturbation: bool = True) -> np.ndarray:
    """One-step probe map: Liouvillian exponential or the first-order Kraus set."""
    w = model.omega if omega is None else omega
    if integrator == EXACT:
        return matrix_exp(liouvillian(model, w, include_perturbation), dt)
    if integrator == FIRST_ORDER:
        ks = _first_order_kraus(model, w, dt, include_perturbation)
        return sum(np.kron(k, k.conj()) for k in ks)
    raise ValueError(f"unknown integrator {integrator!r}")


def _apply_probe_super(s: np.ndarray, rho: np.ndarray, d: int) -> np.ndarray:
    n = rho.shape[0]
    d_a = n // d
    x = rho.reshape(d, d_a, d, d_a)
    out = np.einsum("ijkl,kalb->iajb", s.reshape(d, d, d, d), x, optimize=True)
    return out.reshape(n, n)


def evolve_step(model: LindbladModel, rho, dt: float, integrator: str = EXACT,
                omega: float | None = None, include_perturbation: bool = True) -> np.ndarray:
    """Advance ``rho`` (probe, or probe with ancilla) by one step ``dt``."""
    rho = np.asarray(rho, dtype=complex)
    d = model.dim
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] % d:
        raise ValueError(f"state shape {rho.shape} incompatible with probe dimension {d}")
    s = step_superoperator(model, dt, omega, integrator, include_perturbation)
    out = _apply_probe_super(s, rho, d)
    lo = eig_hermitian(out)[0][0]
    if lo < -1e-8:
        raise ValueError(f"step produced eigenvalue {lo:.3e}; use a smaller dt")
    return out


# ---------------------------------------------------------------- Fisher information

def sld_qfi(rho, drho, cutoff: float = QFI_CUTOFF) -> float:
    """``sum 2 |<i|drho|j>|^2 / (p_i + p_j)`` over pairs with ``p_i + p_j > cutoff``."""
    p, u = eig_hermitian(rho)
    dr = u.conj().T @ np.asarray(drho, dtype=complex) @ u
    den = p[:, None] + p[None, :]
    mask = den > cutoff
    return float(np.sum(2.0 * np.abs(dr[mask]) ** 2 / den[mask]))


def mixed_state_qfi(rho_minus, rho_plus, omega_step: float, cutoff: float = QFI_CUTOFF) -> float:
    """QFI from states at ``omega -/+ omega_step/2`` by a central difference.

    The SLD sum is evaluated in the eigenbasis of the midpoint state.
    """
    rm = np.asarray(rho_minus, dtype=complex)
    rp = np.asarray(rho_plus, dtype=complex)
    if rm.shape != rp.shape:
        raise ValueError("states must share one shape")
    if not omega_step > 0:
        raise ValueError("omega_step must be positive")
    return sld_qfi(0.5 * (rm + rp), (rp - rm) / omega_step, cutoff)


def _richardson_agree(f_h: np.ndarray, f_h2: np.ndarray, rel: float = 0.05) -> bool:
    f_h = np.asarray(f_h)
    f_h2 = np.asarray(f_h2)
    scale = np.maximum(np.abs(f_h2), 1e-12 * max(1.0, float(np.max(np.abs(f_h2)))))
    return bool(np.all(np.abs(f_h - f_h2) <= rel * scale))


def fitted_exponent(times, qfi) -> float:
    """Log-log slope of ``qfi`` against ``t`` over the final decade of times."""
    t = np.asarray(times, dtype=float)
    q = np.asarray(qfi, dtype=float)
    sel = (t >= t[-1] / 10.0) & (q > 0)
    if sel.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(t[sel]), np.log(q[sel]), 1)[0])


# ---------------------------------------------------------------- error-corrected runs

def logical_step_map(model: LindbladModel, code: CodePair, recovery: RecoveryChannel, dt: float,
                     omega: float | None = None, integrator: str = EXACT,
                     include_perturbation: bool = True) -> tuple[np.ndarray, np.ndarray]:
    """Matrix of ``R . E_dt`` on 2x2 logical states, and the off-support weight.

    Returns ``phi`` (4x4, row-major logical vectorisation) and ``q`` (length
    4) with ``q . vec(sigma)`` the probability that an off-support recovery
    operator fires on the logical state ``sigma``.
    """
    s = step_superoperator(model, dt, omega, integrator, include_perturbation)
    v = code.basis
    p_off = recovery.off_support_projector()
    phi = np.zeros((4, 4), dtype=complex)
    q = np.zeros(4, dtype=complex)
    for i in range(2):
        for j in range(2):
            x = np.outer(v[:, i], v[:, j].conj())
            y = _apply_probe_super(s, x, model.dim)
            z = recovery(y)
            phi[:, 2 * i + j] = (v.conj().T @ z @ v).reshape(-1)
            q[2 * i + j] = np.trace(p_off @ y)
    return phi, q


def _augmented(phi: np.ndarray, q: np.ndarray) -> np.ndarray:
    m = np.zeros((5, 5), dtype=complex)
    m[:4, :4] = phi
    m[4, :4] = q
    m[4, 4] = 1.0
    return m


def _sample_powers(m: np.ndarray, ks: np.ndarray, v0: np.ndarray) -> list[np.ndarray]:
    out = []
    v = v0
    prev = 0
    for k in ks:
        v = np.linalg.matrix_power(m, int(k - prev)) @ v
        prev = k
        out.append(v)
    return out


def _omega_offsets(h: float) -> tuple:
    return (0.0, -h / 2, h / 2, -h / 4, h / 4)


def qec_evolve(model: LindbladModel, code: CodePair, recovery: RecoveryChannel | None,
               config: SimulationConfig, logical_input=None) -> Trajectory:
    """Alternate noisy steps and recovery from the optimal logical input.

    With ``config.qec_enabled`` false the same initial state evolves under
    the noise alone (see :func:`free_evolve`).
    """
    geff = effective_generator(code, model.G)
    psi_l = optimal_input_state(geff) if logical_input is None else np.asarray(logical_input, complex)
    if not config.qec_enabled:
        return free_evolve(model, embed_logical(code, psi_l), config, code)
    if recovery is None:
        raise ValueError("error-corrected run needs a recovery channel")
    ks = config.step_counts()
    times = ks * config.dt
    h = config.step
    sigma0 = np.outer(psi_l, psi_l.conj())
    v0 = np.concatenate([sigma0.reshape(-1), [0.0]])
    runs = []
    for off in _omega_offsets(h):
        phi, q = logical_step_map(model, code, recovery, config.dt, config.omega + off,
                                  config.integrator)
        runs.append([x for x in _sample_powers(_augmented(phi, q), ks, v0)])
    logical = [x[:4].reshape(2, 2) for x in runs[0]]
    weight = np.array([x[4].real for x in runs[0]])
    qfi = np.array([mixed_state_qfi(a[:4].reshape(2, 2), b[:4].reshape(2, 2), h)
                    for a, b in zip(runs[1], runs[2])])
    qfi_h2 = np.array([mixed_state_qfi(a[:4].reshape(2, 2), b[:4].reshape(2, 2), h / 2)
                       for a, b in zip(runs[3], runs[4])])
    ok = _richardson_agree(qfi, qfi_h2)
    if not ok:
        logger.warning("QFI finite difference disagrees with its half-step estimate by > 5%%")
    fid = []
    for t, sig in zip(times, logical):
        ideal = matrix_exp(geff.g_eff, -1j * config.omega * t) @ psi_l
        fid.append(float(np.real(np.vdot(ideal, sig @ ideal))))
    v = code.basis
    states = tuple(v @ s @ v.conj().T for s in logical)
    return Trajectory(times, states, qfi, np.array(fid), weight,
                      fitted_exponent(times, qfi), ok, tuple(logical))


def free_evolve(model: LindbladModel, psi, config: SimulationConfig,
                code: CodePair | None = None) -> Trajectory:
    """Uncorrected evolution of a pure joint state ``psi`` on ``H_P (x) H_A``.

    ``offcode_weight`` is ``1 - tr(Pi_C rho)`` when a code is given, else NaN.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    d = model.dim
    if psi.size % d:
        raise ValueError(f"state length {psi.size} incompatible with probe dimension {d}")
    d_a = psi.size // d
    ks = config.step_counts()
    times = ks * config.dt
    h = config.step
    rho0 = np.outer(psi, psi.conj())
    runs = []
    for off in _omega_offsets(h):
        s = step_superoperator(model, config.dt, config.omega + off, config.integrator)
        seq = []
        rho = rho0
        prev = 0
        for k in ks:
            rho = _apply_probe_super(np.linalg.matrix_power(s, int(k - prev)), rho, d)
            prev = k
            seq.append(rho)
        runs.append(seq)
    qfi = np.array([mixed_state_qfi(a, b, h) for a, b in zip(runs[1], runs[2])])
    qfi_h2 = np.array([mixed_state_qfi(a, b, h / 2) for a, b in zip(runs[3], runs[4])])
    ok = _richardson_agree(qfi, qfi_h2)
    if not ok:
        logger.warning("QFI finite difference disagrees with its half-step estimate by > 5%%")
    g_joint = np.kron(model.G, np.eye(d_a))
    fid = []
    for t, rho in zip(times, runs[0]):
        ideal = matrix_exp(g_joint, -1j * config.omega * t) @ psi
        fid.append(float(np.real(np.vdot(ideal, rho @ ideal))))
    if code is not None:
        pc = code.projector
        weight = np.array([1.0 - float(np.real(np.trace(pc @ r))) for r in runs[0]])
    else:
        weight = np.full(len(times), np.nan)
    return Trajectory(times, tuple(runs[0]), qfi, np.array(fid), weight,
                      fitted_exponent(times, qfi), ok)


def one_step_error(model: LindbladModel, code: CodePair, recovery: RecoveryChannel, dt: float,
                   logical_state=None, integrator: str = EXACT) -> float:
    """Trace norm of ``R(E_dt(rho)) - (rho - i omega [Pi G Pi, rho] dt)``."""
    geff = effective_generator(code, model.G)
    psi_l = optimal_input_state(geff) if logical_state is None else logical_state
    psi = embed_logical(code, psi_l)
    rho = np.outer(psi, psi.conj())
    out = recovery(evolve_step(model, rho, dt, integrator))
    pgp = code.projector @ code.lift(model.G) @ code.projector
    ideal = rho - 1j * model.omega * (pgp @ rho - rho @ pgp) * dt
    return trace_abs(out - ideal)


# ---------------------------------------------------------------- linear bound

@dataclass(frozen=True)
class SqlBoundReport:
    """Linear-in-time Fisher information bound from a gauge choice ``h``.

    ``h0`` (r x r Hermitian), ``h1`` (length r) and ``h2`` (real) solve
    ``G + h2 I + sum_k (h1_k L_k + h.c.) + sum_jk h0_jk L_j^dag L_k = 0``;
    ``alpha2 = sum_a A_a^dag A_a`` with ``A_a = conj(h1_a) I + sum_k h0_ak L_k``.
    """

    h0: np.ndarray | None
    h1: np.ndarray | None
    h2: float | None
    alpha2: np.ndarray | None
    bound_coeff: float
    residual_beta2: float
    solvable: bool
    condition: float
    times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    bound: np.ndarray = field(default_factory=lambda: np.zeros(0))
    dt: float | None = None
    finite_dt_bound: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def h_coeffs(self) -> dict:
        return {"h0": self.h0, "h1": self.h1, "h2": self.h2}

    def as_dict(self) -> dict:
        return {
            "solvable": self.solvable,
            "bound_coeff": self.bound_coeff,
            "residual_beta2": self.residual_beta2,
            "condition": self.condition,
        }


def _gauge_columns(model: LindbladModel):
    """Real parameters of (h0, h1, h2) and the operator each multiplies in beta2."""
    ls = model.lindblad
    r = len(ls)
    d = model.dim
    params = []  # (kind, payload)
    ops = []
    for j in range(r):
        for k in range(r):
            if j == k:
                params.append(("h0", j, k, 1.0))
                ops.append(ls[j].conj().T @ ls[k])
            elif j < k:
                pjk = ls[j].conj().T @ ls[k]
                params.append(("h0", j, k, 1.0))
                ops.append(pjk + pjk.conj().T)
                params.append(("h0", j, k, 1j))
                ops.append(1j * (pjk - pjk.conj().T))
    for k in range(r):
        params.append(("h1", k, None, 1.0))
        ops.append(ls[k] + ls[k].conj().T)
        params.append(("h1", k, None, 1j))
        ops.append(1j * (ls[k] - ls[k].conj().T))
    params.append(("h2", None, None, 1.0))
    ops.append(np.eye(d, dtype=complex))
    return params, ops


def _assemble_h(params, x, r):
    h0 = np.zeros((r, r), dtype=complex)
    h1 = np.zeros(r, dtype=complex)
    h2 = 0.0
    for (kind, j, k, unit), val in zip(params, x):
        if kind == "h0":
            h0[j, k] += unit * val
            if j != k:
                h0[k, j] += np.conj(unit) * val
        elif kind == "h1":
            h1[j] += unit * val
        else:
            h2 += val
    return h0, h1, h2


def _stacked_a(model: LindbladModel, h0, h1) -> np.ndarray:
    d = model.dim
    ls = model.lindblad
    blocks = []
    for a in range(len(ls)):
        blocks.append(np.conj(h1[a]) * np.eye(d) + sum(h0[a, k] * ls[k] for k in range(len(ls))))
    return np.vstack(blocks)


def _vec_real(m: np.ndarray) -> np.ndarray:
    f = np.asarray(m, dtype=complex).reshape(-1)
    return np.concatenate([f.real, f.imag])


def _finite_dt_bound(model: LindbladModel, h0, h1, h2, dt, times):
    # exact alpha, beta for the first-order Kraus set with h = h0 + h1 sqrt(dt) + h2 dt
    ks = _first_order_kraus(model, model.omega, dt, include_perturbation=False)
    r = len(model.lindblad)
    h = np.zeros((r + 1, r + 1), dtype=complex)
    h[1:, 1:] = h0
    h[0, 1:] = h1 * np.sqrt(dt)
    h[1:, 0] = np.conj(h1) * np.sqrt(dt)
    h[0, 0] = h2 * dt
    kdot = [-1j * model.G * dt] + [np.zeros_like(model.G)] * r
    mod = [kdot[i] - 1j * sum(h[i, j] * ks[j] for j in range(r + 1)) for i in range(r + 1)]
    alpha = sum(m.conj().T @ m for m in mod)
    beta = 1j * sum(m.conj().T @ k for m, k in zip(mod, ks))
    a = operator_norm(0.5 * (alpha + alpha.conj().T))
    b = float(np.linalg.norm(beta, 2))
    n = np.asarray(times, dtype=float) / dt
    return 4 * n * a + 4 * n * np.maximum(n - 1, 0) * b * (b + 2 * np.sqrt(a))


def sql_bound(model: LindbladModel, dt: float | None = None, t_grid=None, tol: float = 1e-9,
              tighten: bool = True) -> SqlBoundReport:
    """Solve ``beta2 = 0`` for the gauge ``h`` and report ``4 ||alpha2|| t``.

    ``beta2 = 0`` is solvable exactly when ``G`` lies in the Lindblad span.
    With ``tighten`` the remaining gauge freedom is used to minimise
    ``||alpha2||``; any feasible choice already gives a valid bound.
    ``dt`` adds the finite-step bound of the first-order channel.
    """
    ls = model.lindblad
    r = len(ls)
    params, ops = _gauge_columns(model)
    a = np.column_stack([_vec_real(o) for o in ops])
    b = -_vec_real(model.G)
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    sv = np.linalg.svd(a, compute_uv=False)
    nz = sv[sv > 1e-12 * sv[0]]
    cond = float(nz[0] / nz[-1]) if len(nz) else float("inf")
    if cond > 1e12:
        logger.warning("gauge least squares is ill-conditioned (condition number %.3e)", cond)
    resid_op = model.G + sum(xi * o for xi, o in zip(x, ops))
    residual = float(np.linalg.norm(resid_op))
    solvable = residual < tol * max(1.0, float(np.linalg.norm(model.G)))
    holds = hnls_check(model).holds
    if solvable == holds:
        logger.warning("linear-bound solvability (%s) disagrees with the span test (HNLS %s)",
                       solvable, holds)
    times = np.zeros(0) if t_grid is None else np.asarray(t_grid, dtype=float)
    if not solvable:
        nanc = np.full(times.shape, np.nan)
        return SqlBoundReport(None, None, None, None, float("nan"), residual, False, cond,
                              times, nanc, dt, nanc)
    if tighten and r:
        x = _tighten(model, params, a, x)
    h0, h1, h2 = _assemble_h(params, x, r)
    if r:
        stack = _stacked_a(model, h0, h1)
        alpha2 = stack.conj().T @ stack
    else:
        alpha2 = np.zeros_like(model.G)
    coeff = 4.0 * operator_norm(alpha2)
    fin = _finite_dt_bound(model, h0, h1, h2, dt, times) if dt else np.zeros(0)
    return SqlBoundReport(h0, h1, h2, alpha2, coeff, residual, True, cond, times, coeff * times,
                          dt, fin)


def _tighten(model, params, a, x0):
    """Minimise ``||A||`` over the nullspace of the ``beta2`` system."""
    r = len(model.lindblad)
    _, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > 1e-12 * s[0]))
    null = vt[rank:].T
    if null.shape[1] == 0:
        return x0

    def dilation(x):
        h0, h1, _ = _assemble_h(params, x, r)
        m = _stacked_a(model, h0, h1)
        p, q = m.shape
        out = np.zeros((p + q, p + q), dtype=complex)
        out[:p, p:] = m
        out[p:, :p] = m.conj().T
        return out

    c = dilation(x0)
    dirs = [dilation(x0 + null[:, i]) - c for i in range(null.shape[1])]
    mat = np.column_stack([_vec_real(dd) for dd in dirs])
    u, s2, vt2 = np.linalg.svd(mat, full_matrices=False)
    if s2.size == 0 or s2[0] == 0:
        return x0
    keep = s2 > 1e-10 * s2[0]
    coeff = vt2[keep].T / s2[keep]  # columns: null-coords of orthonormal directions
    basis = [sum(coeff[i, j] * dirs[i] for i in range(len(dirs))) for j in range(coeff.shape[1])]
    res = minimize_operator_norm(c, basis, SolverOptions(mu_schedule=tuple(10.0 ** -k for k in range(1, 9))))
    return x0 + null @ (coeff @ res.nu)


# ---------------------------------------------------------------- robustness

@dataclass(frozen=True)
class RobustnessReport:
    epsilon: float
    effective_jumps: tuple
    times: np.ndarray
    distance_curve: np.ndarray
    qfi: np.ndarray
    ideal_qfi: np.ndarray
    crossover_time_estimate: float
    bound_ok: bool

    def rows(self):
        for t, dist, q, qi in zip(self.times, self.distance_curve, self.qfi, self.ideal_qfi):
            yield self.epsilon, float(t), float(dist), float(q), float(qi)


def _crossover(times, qfi, ideal) -> float:
    ratio = np.asarray(qfi) / np.asarray(ideal)
    below = np.nonzero(ratio < 0.5)[0]
    if not len(below):
        return float("nan")
    i = int(below[0])
    if i == 0:
        return float(times[0])
    # log-linear interpolation of the ratio between the bracketing samples
    x0, x1 = np.log(times[i - 1]), np.log(times[i])
    y0, y1 = np.log(ratio[i - 1]), np.log(ratio[i])
    return float(np.exp(x0 + (np.log(0.5) - y0) * (x1 - x0) / (y1 - y0)))


def robustness_experiment(model: LindbladModel, code: CodePair, recovery: RecoveryChannel,
                          config: SimulationConfig, epsilon_grid, n_samples: int = 80,
                          horizon: float = 20.0) -> list[RobustnessReport]:
    """Corrected dynamics under extra, uncorrected jumps of strength ``epsilon``.

    The model's perturbing jumps are rescaled so ``||sum J^dag J|| = epsilon``.
    Times are log-spaced from ``10 dt`` to ``horizon / epsilon``, extended
    (doubling, at most five times) until the QFI crosses half its ideal
    value ``gap^2 t^2``.  The distance check is ``dist <= 1.1 epsilon t`` for
    ``t <= 1 / (10 epsilon)``; at ``epsilon = 0`` it is the discretisation
    floor ``dt ||sum L^dag L||^2 t``.
    """
    if not model.perturbation:
        raise ValueError("model has no perturbing jump operators")
    rep = recovery.report
    if not (rep.passes[1] and rep.passes[2]):
        raise ValueError("code does not correct the model's Lindblad noise")
    j0 = model.perturbation
    eps0 = operator_norm(sum(j.conj().T @ j for j in j0))
    geff = effective_generator(code, model.G)
    psi_l = optimal_input_state(geff)
    sigma0 = np.outer(psi_l, psi_l.conj())
    v = code.basis
    h = config.step
    out = []
    for eps in epsilon_grid:
        eps = float(eps)
        if eps < 0:
            raise ValueError("noise strength must be non-negative")
        if eps > 0 and eps0 == 0:
            raise ValueError("perturbing jumps vanish; cannot rescale to positive strength")
        scale = np.sqrt(eps / eps0) if eps > 0 else 0.0
        js = tuple(scale * j for j in j0)
        m = model.with_perturbation(js if eps > 0 else ())
        eps_exact = operator_norm(sum((j.conj().T @ j for j in js), np.zeros_like(model.G)))
        eff = tuple(v.conj().T @ rk @ code.lift(j) @ v for j in js for rk in recovery.kraus_ops)
        eff_norm = operator_norm(sum((e.conj().T @ e for e in eff), np.zeros((2, 2), complex)))
        if eff_norm > eps_exact + 1e-9:
            raise RuntimeError(f"effective jumps exceed the noise strength: {eff_norm} > {eps_exact}")
        maps = [logical_step_map(m, code, recovery, config.dt, config.omega + off, config.integrator)[0]
                for off in (0.0, -h / 2, h / 2)]
        t_end = horizon / eps if eps > 0 else config.t_max
        for _ in range(6):
            ks = np.unique(np.rint(np.geomspace(10 * config.dt, t_end, n_samples) / config.dt)
                           .astype(np.int64))
            times = ks * config.dt
            runs = [[x.reshape(2, 2) for x in _sample_powers(p, ks, sigma0.reshape(-1))] for p in maps]
            qfi = np.array([mixed_state_qfi(a, b, h) for a, b in zip(runs[1], runs[2])])
            ideal = geff.eigengap ** 2 * times ** 2
            cross = _crossover(times, qfi, ideal)
            if eps == 0 or np.isfinite(cross):
                break
            t_end *= 2.0
        dist = []
        for t, sig in zip(times, runs[0]):
            u = matrix_exp(geff.g_eff, -1j * config.omega * t)
            target = u @ sigma0 @ u.conj().T
            dist.append(0.5 * trace_abs(sig - target))
        dist = np.array(dist)
        if eps > 0:
            early = times <= 1.0 / (10.0 * eps)
            bound_ok = bool(np.all(dist[early] <= 1.1 * eps_exact * times[early]))
        else:
            # only the uncorrected second-order jump terms remain, O(dt) per unit time
            rate = operator_norm(sum((l.conj().T @ l for l in model.lindblad), np.zeros_like(model.G)))
            bound_ok = bool(np.all(dist <= config.dt * rate ** 2 * times + 1e-12))
        if not bound_ok:
            logger.warning("trace-distance bound violated at epsilon=%g", eps)
        out.append(RobustnessReport(eps_exact, eff, times, dist, qfi, ideal, cross, bound_ok))
    return out


def crossover_slope(reports) -> float:
    """Log-log slope of crossover time against noise strength."""
    pts = [(r.epsilon, r.crossover_time_estimate) for r in reports
           if r.epsilon > 0 and np.isfinite(r.crossover_time_estimate)]
    if len(pts) < 2:
        return float("nan")
    e, t = np.array(pts).T
    return float(np.polyfit(np.log(e), np.log(t), 1)[0])
