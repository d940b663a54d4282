"""Optimal code search: operator-norm distance from G_perp to the Lindblad span.

The dual problem ``min_nu || G_perp + sum_k nu_k E_k ||`` is convex but
nonsmooth.  It is solved by minimising the smoothed spectral surrogate

    f_mu(nu) = mu * log sum_i [exp(l_i / mu) + exp(-l_i / mu)]

(``l_i`` the eigenvalues) with damped Newton steps, annealing ``mu`` down a
geometric schedule.  ``f <= f_mu <= f + mu log(2d)``, so the final stage
pins the true optimum to within ``mu log(2d)``.  The primal optimum, and
from it the optimal code, is recovered from the extreme eigenspaces of the
dual optimiser.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np

from .codes import (
    CodePair,
    ancilla_free_reduction,
    check_conditions,
    effective_generator,
    purified_code,
)
from .model import LindbladModel
from .operators import check_hermitian, eig_hermitian, hs_inner, hs_norm, operator_norm, trace_abs
from .span import DEFAULT_HNLS_TOL, HnlsVerdict, SpanBasis, hnls_check, lindblad_span

logger = logging.getLogger(__name__)

__all__ = [
    "DualSolution",
    "DualityReport",
    "InfeasiblePrimalError",
    "OptimizationResult",
    "PrimalSolution",
    "SolverOptions",
    "brute_force_dual",
    "dual_minimize",
    "minimize_operator_norm",
    "optimal_code",
    "optimal_qfi",
    "optimize_model",
    "primal_recover",
    "verify_duality",
]


@dataclass(frozen=True)
class SolverOptions:
    gtol: float = 1e-9
    max_iters: int = 100_000
    obj_tol: float = 1e-7
    # smoothing widths relative to ||G_perp||
    mu_schedule: tuple = tuple(10.0 ** -k for k in range(1, 12))
    cluster_tol: float = 1e-6
    newton_iters_per_stage: int = 200


class InfeasiblePrimalError(ValueError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class _NormResult:
    nu: np.ndarray
    value: float
    iterations: int
    converged: bool
    gradient_norm: float


class _Smoothed:
    """Value, gradient and Hessian of the log-sum-exp spectral surrogate."""

    def __init__(self, c: np.ndarray, ops: np.ndarray):
        self.c = c
        self.ops = ops

    def matrix(self, nu):
        if len(self.ops) == 0:
            return self.c
        return self.c + np.tensordot(nu, self.ops, axes=1)

    def true_value(self, nu) -> float:
        w = np.linalg.eigvalsh(self.matrix(nu))
        return float(np.max(np.abs(w)))

    def value(self, nu, mu) -> float:
        w = np.linalg.eigvalsh(self.matrix(nu))
        s = np.max(np.abs(w))
        return float(s + mu * np.log(np.sum(np.exp((w - s) / mu) + np.exp((-w - s) / mu))))

    def derivatives(self, nu, mu, hessian: bool = True):
        w, u = eig_hermitian(self.matrix(nu))
        s = np.max(np.abs(w))
        p = np.exp((w - s) / mu)
        q = np.exp((-w - s) / mu)
        t = np.sum(p + q)
        f = float(s + mu * np.log(t))
        rot = np.einsum("ai,kab,bj->kij", u.conj(), self.ops, u, optimize=True)
        diag = np.real(np.einsum("kii->ki", rot))
        grad = diag @ ((p - q) / t)
        if not hessian:
            return f, grad, None
        gamma = _divided_difference(w, p, q, mu)
        h = (mu / t) * np.real(np.einsum("ij,kij,lij->kl", gamma, rot, rot.conj(), optimize=True))
        h -= np.outer(grad, grad) / mu
        return f, grad, 0.5 * (h + h.T)


def _divided_difference(w, p, q, mu):
    """Divided differences of ``(p(x) - q(x)) / mu`` on the spectrum ``w``.

    ``p(x) = exp((x - s)/mu)``, ``q(x) = exp((-x - s)/mu)``; the form with
    ``expm1`` of a non-positive argument is overflow-free.
    """
    dx = w[:, None] - w[None, :]
    adx = np.abs(dx)
    same = adx <= 1e-300
    safe = np.where(same, 1.0, adx)
    em = np.expm1(-adx / mu)  # in (-1, 0]
    pmax = np.maximum(p[:, None], p[None, :])
    qmax = np.maximum(q[:, None], q[None, :])
    ddp = np.where(same, p[:, None] / mu, -pmax * em / safe)
    ddq = np.where(same, -q[:, None] / mu, qmax * em / safe)
    return (ddp - ddq) / mu


def minimize_operator_norm(c, ops, opts: SolverOptions | None = None,
                           nu0=None, scale: float | None = None) -> _NormResult:
    """Minimise ``|| c + sum_k nu_k ops[k] ||`` over real ``nu``.

    ``c`` and every ``ops[k]`` must be Hermitian and the ``ops`` linearly
    independent.
    """
    opts = opts or SolverOptions()
    c = np.asarray(c, dtype=complex)
    ops = np.asarray(list(ops), dtype=complex).reshape(-1, *c.shape)
    fn = _Smoothed(c, ops)
    m = len(ops)
    nu = np.zeros(m) if nu0 is None else np.array(nu0, dtype=float)
    if m == 0:
        return _NormResult(nu, fn.true_value(nu), 0, True, 0.0)
    if scale is None:
        scale = operator_norm(c)
    if scale <= 0.0:
        scale = 1.0
    best_nu, best_f = nu.copy(), fn.true_value(nu)
    iters = 0
    gnorm = np.inf
    converged = False
    for rel in opts.mu_schedule:
        mu = rel * scale
        stage_done = False
        for _ in range(opts.newton_iters_per_stage):
            if iters >= opts.max_iters:
                break
            iters += 1
            f, g, h = fn.derivatives(nu, mu)
            gnorm = float(np.linalg.norm(g))
            if gnorm < opts.gtol:
                stage_done = True
                break
            step = _newton_direction(h, g)
            slope = float(g @ step)
            t = 1.0
            accepted = False
            for _ in range(60):
                trial = nu + t * step
                ft = fn.value(trial, mu)
                if ft <= f + 1e-4 * t * slope:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                # no decrease representable at this precision
                stage_done = abs(slope) < 1e-24 * max(1.0, scale) or gnorm < 1e3 * opts.gtol
                break
            nu = trial
            tv = fn.true_value(nu)
            if tv < best_f:
                best_nu, best_f = nu.copy(), tv
            if abs(f - ft) <= 1e-15 * max(1.0, abs(f)) and t * np.linalg.norm(step) < 1e-14:
                stage_done = True
                break
        converged = stage_done
        # the surrogate overestimates by at most mu log(2n)
        if mu * np.log(2 * c.shape[0]) <= 1e-2 * opts.obj_tol:
            break
    _, g, _ = fn.derivatives(best_nu, mu, hessian=False)
    return _NormResult(best_nu, best_f, iters, converged, float(np.linalg.norm(g)))


def _newton_direction(h, g):
    try:
        lc = np.linalg.cholesky(h)
        step = -np.linalg.solve(lc.conj().T, np.linalg.solve(lc, g))
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(h)
        floor = max(1e-12 * np.max(np.abs(w)), 1e-300)
        step = -(v / np.maximum(w, floor)) @ (v.T @ g)
    if not np.all(np.isfinite(step)) or g @ step >= 0:
        step = -g
    return step


@dataclass(frozen=True)
class DualSolution:
    nu: np.ndarray
    g_tilde_diamond: np.ndarray
    s_star: float
    g_perp: np.ndarray
    iterations: int
    converged: bool
    gradient_norm: float

    def as_dict(self) -> dict:
        return {
            "nu": [float(x) for x in self.nu],
            "s_star": self.s_star,
            "iterations": self.iterations,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
        }


def dual_minimize(g_perp, basis: SpanBasis, opts: SolverOptions | None = None) -> DualSolution:
    """Operator-norm distance from ``g_perp`` to the span, with its minimiser.

    Starts from ``nu = 0``, which is always feasible, so the result never
    exceeds ``||g_perp||``.
    """
    opts = opts or SolverOptions()
    g = check_hermitian(g_perp, name="G_perp")
    if basis.basis:
        if basis.dim != g.shape[0]:
            raise ValueError(f"dimension mismatch: {g.shape[0]} vs basis {basis.dim}")
        overlap = np.max(np.abs(basis.coefficients(g)))
        if overlap > 1e-8 * max(1.0, hs_norm(g)):
            raise ValueError(f"G_perp is not orthogonal to the span (overlap {overlap:.3e})")
    res = minimize_operator_norm(g, basis.basis, opts)
    if not res.converged:
        logger.warning("dual minimisation stopped without meeting gtol (|grad| = %.3e)",
                       res.gradient_norm)
    gd = g + (np.tensordot(res.nu, np.asarray(basis.basis), axes=1) if basis.basis else 0)
    gd = 0.5 * (gd + gd.conj().T)
    return DualSolution(res.nu, gd, operator_norm(gd), g, res.iterations, res.converged,
                        res.gradient_norm)


def brute_force_dual(g_perp, basis: SpanBasis, points: int = 21, refinements: int = 2,
                     chunk: int = 200_000, shrink: float | None = None) -> float:
    """Grid-search oracle for the dual optimum (span dimension at most 4).

    Every coefficient obeys ``|nu_k| <= ||g_perp|| tr|E_k|`` at any point
    no worse than ``nu = 0``, which bounds the initial box.  Each refinement
    re-grids a box around the best point, scaled by ``shrink`` (default: two
    cells on either side).  A slow shrink lets the box travel along narrow
    valleys of the nonsmooth objective.
    """
    g = np.asarray(g_perp, dtype=complex)
    m = len(basis)
    if m > 4:
        raise ValueError(f"brute force oracle limited to span dimension 4, got {m}")
    f0 = float(np.max(np.abs(np.linalg.eigvalsh(g))))
    if m == 0:
        return f0
    ops = np.asarray(basis.basis)
    radius = np.array([f0 * trace_abs(e) for e in basis.basis])
    center = np.zeros(m)
    best = f0
    for _ in range(refinements + 1):
        axes = [np.linspace(c - r, c + r, points) for c, r in zip(center, radius)]
        grid = np.array(list(itertools.product(*axes)))
        vals = np.empty(len(grid))
        for start in range(0, len(grid), chunk):
            part = grid[start:start + chunk]
            mats = g[None] + np.tensordot(part, ops, axes=1)
            w = np.linalg.eigvalsh(mats)
            vals[start:start + chunk] = np.max(np.abs(w), axis=1)
        i = int(np.argmin(vals))
        best = min(best, float(vals[i]))
        center = grid[i]
        radius = radius * (4.0 / (points - 1) if shrink is None else shrink)
    return best


@dataclass(frozen=True)
class PrimalSolution:
    rho0_tilde: np.ndarray
    rho1_tilde: np.ndarray
    g_tilde_star: np.ndarray
    objective: float
    constraint_residual: float
    cluster_tol: float
    rank0: int
    rank1: int

    def as_dict(self) -> dict:
        return {
            "objective": self.objective,
            "constraint_residual": self.constraint_residual,
            "cluster_tol": self.cluster_tol,
            "rank0": self.rank0,
            "rank1": self.rank1,
            "trace_norm": trace_abs(self.g_tilde_star),
        }


def _herm_basis(m: int) -> list[np.ndarray]:
    # orthonormal in tr(AB), so Euclidean norm of coordinates = Frobenius norm
    out = []
    for i in range(m):
        e = np.zeros((m, m), dtype=complex)
        e[i, i] = 1.0
        out.append(e)
    r2 = 1.0 / np.sqrt(2.0)
    for i in range(m):
        for j in range(i + 1, m):
            e = np.zeros((m, m), dtype=complex)
            e[i, j] = e[j, i] = r2
            out.append(e)
            e = np.zeros((m, m), dtype=complex)
            e[i, j] = -1j * r2
            e[j, i] = 1j * r2
            out.append(e)
    return out


def _psd_part(x: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh(0.5 * (x + x.conj().T))
    return (u * np.clip(w, 0.0, None)) @ u.conj().T


def _solve_extremal(gd, s, ctol, basis, tol, max_rounds):
    w, u = eig_hermitian(gd)
    up = u[:, w >= s - ctol]
    dn = u[:, w <= -s + ctol]
    mp, mn = up.shape[1], dn.shape[1]
    if mp == 0 or mn == 0:
        raise InfeasiblePrimalError("no extremal eigenspace at this cluster tolerance", np.inf)
    hp, hn = _herm_basis(mp), _herm_basis(mn)
    rows = []
    for e in basis.basis:
        ep = up.conj().T @ e @ up
        en = dn.conj().T @ e @ dn
        rows.append([hs_inner(h, ep) for h in hp] + [-hs_inner(h, en) for h in hn])
    rows.append([np.trace(h).real for h in hp] + [0.0] * len(hn))
    rows.append([0.0] * len(hp) + [np.trace(h).real for h in hn])
    a = np.array(rows)
    b = np.zeros(len(rows))
    b[-2:] = 1.0
    pinv = np.linalg.pinv(a, rcond=1e-12)
    z = pinv @ b

    def split(z):
        x = np.tensordot(z[:len(hp)], np.asarray(hp), axes=1)
        y = np.tensordot(z[len(hp):], np.asarray(hn), axes=1)
        return x, y

    def coords(x, y):
        return np.array([hs_inner(h, x) for h in hp] + [hs_inner(h, y) for h in hn])

    for _ in range(max_rounds):
        x, y = split(z)
        lo = min(np.linalg.eigvalsh(x)[0], np.linalg.eigvalsh(y)[0])
        if lo >= -1e-12:
            break
        zp = coords(_psd_part(x), _psd_part(y))
        z = zp - pinv @ (a @ zp - b)
    x, y = split(z)
    rho0 = up @ x @ up.conj().T
    rho1 = dn @ y @ dn.conj().T
    gt = rho0 - rho1
    residual = max(abs(hs_inner(gt, e)) for e in basis.basis) if basis.basis else 0.0
    residual = max(residual, abs(np.trace(rho0).real - 1.0), abs(np.trace(rho1).real - 1.0))
    lo = min(np.linalg.eigvalsh(x)[0], np.linalg.eigvalsh(y)[0])
    if residual > tol or lo < -1e-10:
        raise InfeasiblePrimalError(
            f"primal infeasible at cluster tolerance {ctol:.3e}: residual {residual:.3e}, "
            f"min eigenvalue {lo:.3e}", residual)
    rank = lambda m: int(np.sum(np.linalg.eigvalsh(m) > 1e-9))
    return rho0, rho1, gt, residual, rank(x), rank(y)


def primal_recover(dual: DualSolution, basis: SpanBasis, tol: float = 1e-8,
                   cluster_tol: float = 1e-6, max_rounds: int = 1000) -> PrimalSolution:
    """Optimal ``rho0 - rho1`` supported on the extreme eigenspaces of the dual point.

    Among feasible pairs the minimum-Frobenius-norm least-squares solution is
    taken, then pushed into the positive cone by alternating projections.
    ``cluster_tol`` is relative to ``s_star``; if the eigenspaces it selects
    admit no feasible pair, it is widened by factors of ten up to ``1e-3``.
    """
    if not dual.converged:
        logger.warning("recovering the primal from an unconverged dual point")
    s = dual.s_star
    if s <= 0:
        raise InfeasiblePrimalError("s_star is zero: the signal lies in the span", 0.0)
    err = None
    rel = cluster_tol
    while rel <= 1e-3 * (1 + 1e-9):
        try:
            rho0, rho1, gt, residual, r0, r1 = _solve_extremal(
                dual.g_tilde_diamond, s, rel * s, basis, tol, max_rounds)
        except InfeasiblePrimalError as exc:
            err = exc
            rel *= 10.0
            continue
        objective = float(np.real(np.trace(gt @ dual.g_perp)))
        return PrimalSolution(rho0, rho1, gt, objective, residual, rel * s, r0, r1)
    raise err


def optimal_code(primal: PrimalSolution) -> CodePair:
    """Purify the optimal pair with orthogonal ancilla support."""
    if primal.constraint_residual > 1e-6:
        raise InfeasiblePrimalError("primal solution is not feasible", primal.constraint_residual)
    return purified_code(primal.rho0_tilde, primal.rho1_tilde)


def optimal_qfi(dual: DualSolution, t: float) -> float:
    if t < 0:
        raise ValueError("time must be non-negative")
    return float(4.0 * t * t * dual.s_star ** 2)


@dataclass(frozen=True)
class DualityReport:
    primal_objective: float
    two_s_star: float
    gap: float
    eigengap: float | None
    tol: float

    @property
    def ok(self) -> bool:
        eg_ok = self.eigengap is None or abs(self.eigengap - self.two_s_star) <= self.tol
        return self.gap <= self.tol and eg_ok

    def as_dict(self) -> dict:
        return {
            "primal_objective": self.primal_objective,
            "two_s_star": self.two_s_star,
            "gap": self.gap,
            "eigengap": self.eigengap,
            "tol": self.tol,
            "ok": self.ok,
        }


def verify_duality(dual: DualSolution, primal: PrimalSolution, tol: float = 1e-6,
                   code: CodePair | None = None, G=None, strict: bool = True) -> DualityReport:
    """Check zero duality gap and, given a code and ``G``, its eigengap."""
    two_s = 2.0 * dual.s_star
    eg = None
    if code is not None and G is not None:
        eg = effective_generator(code, G).eigengap
    rep = DualityReport(primal.objective, two_s, abs(primal.objective - two_s), eg, tol)
    if strict and not rep.ok:
        raise ValueError(
            f"duality check failed: primal {primal.objective!r}, 2 s* {two_s!r}, eigengap {eg!r}"
        )
    return rep


@dataclass(frozen=True)
class OptimizationResult:
    verdict: HnlsVerdict
    basis: SpanBasis
    dual: DualSolution
    primal: PrimalSolution
    code: CodePair
    duality: DualityReport
    reduced_code: CodePair | None = field(default=None)

    @property
    def s_star(self) -> float:
        return self.dual.s_star

    @property
    def qfi_coefficient(self) -> float:
        return 4.0 * self.dual.s_star ** 2


def optimize_model(model: LindbladModel, opts: SolverOptions | None = None,
                   hnls_tol: float = DEFAULT_HNLS_TOL, duality_tol: float = 1e-6) -> OptimizationResult:
    """HNLS check, dual solve, primal recovery and optimal code for a model."""
    opts = opts or SolverOptions()
    verdict = hnls_check(model, hnls_tol)
    if not verdict.holds:
        raise ValueError("G lies in the Lindblad span: no code gives Heisenberg scaling")
    basis = lindblad_span(model)
    dual = dual_minimize(verdict.g_perp, basis, opts)
    primal = primal_recover(dual, basis, cluster_tol=opts.cluster_tol)
    code = optimal_code(primal)
    report = check_conditions(code, model)
    if not report.ok:
        logger.warning("optimal code fails conditions: %s", report.as_dict())
    duality = verify_duality(dual, primal, duality_tol, code, model.G, strict=False)
    reduced = ancilla_free_reduction(code, model)
    return OptimizationResult(verdict, basis, dual, primal, code, duality, reduced)
