"""Two-dimensional error-correcting codes on probe plus ancilla.

A code is a pair of orthonormal vectors on ``H_P (x) H_A``.  Amplitudes are
stored as flat vectors with the probe index major, i.e. entry
``p * d_A + a`` is the coefficient of ``|p>_P |a>_A``.  All noise and signal
operators act as ``O (x) I_A``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import LindbladModel
from .operators import QuantumChannel, check_hermitian, eig_hermitian, trace_abs
from .span import DEFAULT_RANK_TOL

logger = logging.getLogger(__name__)

ORTHO_TOL = 1e-10
DEFAULT_QEC_TOL = 1e-9

__all__ = [
    "CodePair",
    "EffectiveGenerator",
    "QecReport",
    "RecoveryChannel",
    "ancilla_free_reduction",
    "build_recovery",
    "canonical_code",
    "check_conditions",
    "code_fidelity",
    "compress_ancilla",
    "concatenate_codes",
    "effective_generator",
    "embed_logical",
    "g_perp_gap",
    "generalized_condition_residual",
    "noiseless_qfi",
    "optimal_input_state",
    "purified_code",
]


@dataclass(frozen=True)
class CodePair:
    """Orthonormal code basis ``{|c0>, |c1>}`` on ``H_P (x) H_A``."""

    c0: np.ndarray
    c1: np.ndarray
    d_P: int
    d_A: int

    def __post_init__(self):
        n = self.d_P * self.d_A
        vs = []
        for name in ("c0", "c1"):
            v = np.array(getattr(self, name), dtype=complex).reshape(-1)
            if v.shape != (n,):
                raise ValueError(f"{name} has length {v.size}, expected {n} = {self.d_P}*{self.d_A}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} has non-finite entries")
            v.setflags(write=False)
            vs.append(v)
        gram = np.array([[np.vdot(a, b) for b in vs] for a in vs])
        if np.max(np.abs(gram - np.eye(2))) > ORTHO_TOL:
            raise ValueError(f"code vectors are not orthonormal (Gram matrix {gram})")
        object.__setattr__(self, "c0", vs[0])
        object.__setattr__(self, "c1", vs[1])
        object.__setattr__(self, "d_P", int(self.d_P))
        object.__setattr__(self, "d_A", int(self.d_A))

    @property
    def dim(self) -> int:
        return self.d_P * self.d_A

    @property
    def basis(self) -> np.ndarray:
        """Isometry ``V = [c0 c1]`` of shape (dim, 2)."""
        return np.column_stack([self.c0, self.c1])

    @property
    def projector(self) -> np.ndarray:
        v = self.basis
        return v @ v.conj().T

    def blocks(self) -> tuple[np.ndarray, np.ndarray]:
        """Amplitudes reshaped to (d_P, d_A) matrices."""
        return self.c0.reshape(self.d_P, self.d_A), self.c1.reshape(self.d_P, self.d_A)

    def reduced_states(self) -> tuple[np.ndarray, np.ndarray]:
        """Probe marginals ``tr_A |c_i><c_i|``."""
        return tuple(c @ c.conj().T for c in self.blocks())

    def logical_matrix(self, op) -> np.ndarray:
        """2x2 matrix ``<c_i| op (x) I |c_j>`` for a probe operator ``op``."""
        op = np.asarray(op, dtype=complex)
        if op.shape != (self.d_P, self.d_P):
            raise ValueError(f"operator shape {op.shape} does not match probe dimension {self.d_P}")
        cs = self.blocks()
        return np.array([[np.trace(a.conj().T @ op @ b) for b in cs] for a in cs])

    def lift(self, op) -> np.ndarray:
        """``op (x) I_A`` on the joint space."""
        return np.kron(np.asarray(op, dtype=complex), np.eye(self.d_A))


def purified_code(rho0, rho1, zero_tol: float = 1e-14) -> CodePair:
    """Purify two orthogonally supported states with disjoint ancilla support.

    The ancilla has dimension ``2 d``: ``rho0`` is purified into ancilla
    indices ``0..d-1`` and ``rho1`` into ``d..2d-1`` (an ancilla qubit tag
    on top of a ``d``-level register).
    """
    rho0 = check_hermitian(rho0, tol=1e-9, name="rho0")
    rho1 = check_hermitian(rho1, tol=1e-9, name="rho1")
    d = rho0.shape[0]
    if rho1.shape != (d, d):
        raise ValueError("rho0 and rho1 must have the same shape")
    d_a = 2 * d
    vecs = []
    for tag, rho in enumerate((rho0, rho1)):
        w, u = eig_hermitian(rho)
        w = np.where(w > zero_tol * max(w.max(), 0.0), w, 0.0)
        if w.sum() <= 0:
            raise ValueError("cannot purify a zero operator")
        w = w / w.sum()
        block = np.zeros((d, d_a), dtype=complex)
        block[:, tag * d:(tag + 1) * d] = u * np.sqrt(w)[None, :]
        vecs.append(block.reshape(-1))
    # orthogonality is exact by the disjoint ancilla blocks
    return CodePair(vecs[0], vecs[1], d, d_a)


def canonical_code(g_perp, traceless_tol: float = 1e-10) -> CodePair:
    """Code built from the positive and negative parts of ``G_perp``.

    ``G_perp = (tr|G_perp| / 2) (rho0 - rho1)`` with ``rho0`` and ``rho1``
    the normalised positive and negative parts; the code vectors purify them
    with orthogonal ancilla support.
    """
    g = check_hermitian(g_perp, name="G_perp")
    w, u = eig_hermitian(g)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if scale == 0.0:
        raise ValueError("G_perp vanishes; no code can sense the signal")
    tr = float(np.trace(g).real)
    if abs(tr) > traceless_tol * max(1.0, scale):
        raise ValueError(f"G_perp must be traceless, got trace {tr:.3e}")
    pos = np.clip(w, 0.0, None)
    neg = np.clip(-w, 0.0, None)
    rho0 = (u * pos) @ u.conj().T / pos.sum()
    rho1 = (u * neg) @ u.conj().T / neg.sum()
    return purified_code(rho0, rho1)


@dataclass(frozen=True)
class QecReport:
    lambdas: np.ndarray
    mu: np.ndarray
    residual_1: float
    residual_2: float
    gap_3: float
    tol: float

    @property
    def passes(self) -> dict:
        return {
            1: self.residual_1 <= self.tol,
            2: self.residual_2 <= self.tol,
            3: self.gap_3 > self.tol,
        }

    @property
    def ok(self) -> bool:
        return all(self.passes.values())

    def as_dict(self) -> dict:
        return {
            "lambda": [[float(z.real), float(z.imag)] for z in self.lambdas],
            "mu": [[[float(z.real), float(z.imag)] for z in row] for row in self.mu],
            "residual_1": self.residual_1,
            "residual_2": self.residual_2,
            "gap_3": self.gap_3,
            "tol": self.tol,
            "passes": {str(k): bool(v) for k, v in self.passes.items()},
        }


def _scalar_residual(m: np.ndarray) -> tuple[complex, float]:
    """Value ``<c0|.|c0>`` and deviation of a 2x2 logical matrix from a multiple of I."""
    lam = m[0, 0]
    return lam, float(np.max(np.abs(m - lam * np.eye(2))))


def check_conditions(code: CodePair, model: LindbladModel, tol: float = DEFAULT_QEC_TOL) -> QecReport:
    """Evaluate the correctability conditions [1], [2] and signal condition [3]."""
    if code.d_P != model.dim:
        raise ValueError(f"code probe dimension {code.d_P} != model dimension {model.dim}")
    ls = model.lindblad
    r = len(ls)
    lambdas = np.zeros(r, dtype=complex)
    mu = np.zeros((r, r), dtype=complex)
    res1 = 0.0
    res2 = 0.0
    for k, l in enumerate(ls):
        lambdas[k], dev = _scalar_residual(code.logical_matrix(l))
        res1 = max(res1, dev)
    for k, lk in enumerate(ls):
        for j, lj in enumerate(ls):
            mu[k, j], dev = _scalar_residual(code.logical_matrix(lk.conj().T @ lj))
            res2 = max(res2, dev)
    g = code.logical_matrix(model.G)
    gap3 = float(abs(g[0, 0] - g[1, 1]) + abs(g[0, 1]))
    return QecReport(lambdas, mu, res1, res2, gap3, tol)


@dataclass(frozen=True)
class EffectiveGenerator:
    """``Pi_C G Pi_C`` written in the code basis."""

    g_eff: np.ndarray
    eigengap: float


def effective_generator(code: CodePair, G) -> EffectiveGenerator:
    m = code.logical_matrix(check_hermitian(G, name="G"))
    m = 0.5 * (m + m.conj().T)
    w, _ = eig_hermitian(m)
    return EffectiveGenerator(m, float(w[-1] - w[0]))


def optimal_input_state(g_eff: EffectiveGenerator, tol: float = 1e-12) -> np.ndarray:
    """Equal superposition of the extreme eigenvectors, in the code basis."""
    if g_eff.eigengap <= tol:
        raise ValueError("effective generator is degenerate; the code cannot sense the signal")
    _, v = eig_hermitian(g_eff.g_eff)
    return (v[:, 0] + v[:, -1]) / np.sqrt(2.0)


def embed_logical(code: CodePair, amplitudes) -> np.ndarray:
    """Joint-space vector ``a0 |c0> + a1 |c1>``."""
    a = np.asarray(amplitudes, dtype=complex).reshape(2)
    return code.basis @ a


def noiseless_qfi(g_eff: EffectiveGenerator, t: float) -> float:
    if t < 0:
        raise ValueError("time must be non-negative")
    return float(t * t * g_eff.eigengap ** 2)


@dataclass(frozen=True)
class RecoveryChannel:
    """Recovery ``R(s) = Pi_C s Pi_C + R_E(Pi_E s Pi_E)`` as a Kraus set.

    Kraus operator 0 is ``Pi_C``; the next ones map the orthonormalised
    error subspace back onto the code; the indices in
    ``channel.off_support`` complete the set to a trace-preserving map by
    sending the unreachable remainder to ``|c0>``.
    """

    channel: QuantumChannel
    code: CodePair
    error_rank: int
    report: QecReport = field(compare=False)

    @property
    def kraus_ops(self) -> tuple:
        return self.channel.kraus_ops

    @property
    def off_support(self) -> tuple:
        return self.channel.off_support

    def off_support_projector(self) -> np.ndarray:
        ops = [self.channel.kraus_ops[i] for i in self.channel.off_support]
        if not ops:
            return np.zeros((self.code.dim, self.code.dim), dtype=complex)
        stack = np.asarray(ops)
        return np.einsum("kji,kjl->il", stack.conj(), stack)

    def __call__(self, sigma):
        return self.channel(sigma)


def _lowdin(vectors: np.ndarray) -> np.ndarray:
    """Symmetric orthonormalisation of the columns of ``vectors``."""
    s = vectors.conj().T @ vectors
    w, u = eig_hermitian(s)
    return vectors @ (u * (1.0 / np.sqrt(w))) @ u.conj().T


def build_recovery(code: CodePair, model: LindbladModel, tol: float = DEFAULT_QEC_TOL,
                   rank_tol: float = DEFAULT_RANK_TOL) -> RecoveryChannel:
    """Recovery that undoes single jumps of the model's Lindblad operators.

    The error operators ``L_k - lambda_k`` are diagonalised against the
    matrix ``M_kj = mu_kj - conj(lambda_k) lambda_j``; each eigen-combination
    with nonzero weight maps the code isometrically to an error subspace,
    which is sent back to the code.  Refuses codes that fail [1] or [2].
    """
    report = check_conditions(code, model, tol)
    if not (report.passes[1] and report.passes[2]):
        raise ValueError(
            "code does not satisfy the correctability conditions: "
            f"residual_1={report.residual_1:.3e}, residual_2={report.residual_2:.3e}, tol={tol:.1e}"
        )
    n = code.dim
    v = code.basis
    pi_c = v @ v.conj().T
    kraus = [pi_c]
    error_rank = 0
    used = np.zeros((n, 0), dtype=complex)
    ls = model.lindblad
    if ls:
        lam = report.lambdas
        m = report.mu - np.outer(lam.conj(), lam)
        m = 0.5 * (m + m.conj().T)
        dvals, u = eig_hermitian(m)
        top = max(float(dvals.max()), 0.0)
        cols = []
        for a in range(len(dvals)):
            if dvals[a] <= rank_tol * max(top, 1e-300) or dvals[a] <= 0:
                continue
            f = sum(u[k, a] * (ls[k] - lam[k] * np.eye(model.dim)) for k in range(len(ls)))
            fv = code.lift(f) @ v / np.sqrt(dvals[a])
            fv = fv - pi_c @ fv
            cols.append(fv)
        if cols:
            err = _lowdin(np.concatenate(cols, axis=1))
            error_rank = len(cols)
            for a in range(error_rank):
                block = err[:, 2 * a:2 * a + 2]
                kraus.append(v @ block.conj().T)
            used = err
    rest = np.eye(n) - pi_c - used @ used.conj().T
    w, f = eig_hermitian(rest)
    off = []
    for idx in np.nonzero(w > 0.5)[0]:
        off.append(len(kraus))
        kraus.append(np.outer(code.c0, f[:, idx].conj()))
    ch = QuantumChannel(tuple(kraus), trace_preserving=True, off_support=tuple(off))
    return RecoveryChannel(ch, code, error_rank, report)


def compress_ancilla(code: CodePair, tol: float = 1e-12) -> tuple[CodePair, np.ndarray]:
    """Re-express a code on the minimal ancilla subspace it occupies.

    Returns the compressed code and the isometry ``W`` (old d_A x new d_A)
    with ``|b>_new = sum_a W[a, b] |a>_old``.  Conditions and dynamics with
    operators ``O (x) I_A`` are unchanged.
    """
    b0, b1 = code.blocks()
    stacked = np.vstack([b0, b1])
    _, s, vh = np.linalg.svd(stacked, full_matrices=False)
    keep = s > tol * max(s[0], 1e-300)
    w = vh[keep].T  # columns span the ancilla support (row space of stacked)
    new = [(b @ w.conj()).reshape(-1) for b in (b0, b1)]
    return CodePair(new[0], new[1], code.d_P, int(keep.sum())), w


def concatenate_codes(outer: CodePair, inner_basis) -> CodePair:
    """Replace each ancilla basis state ``|k>_A`` by an inner code word.

    ``inner_basis`` either has one state per ancilla level of ``outer``
    (length ``d_A``) or one state per ancilla level actually used by
    ``outer``, assigned in increasing level order.
    """
    states = [np.asarray(s, dtype=complex).reshape(-1) for s in inner_basis]
    if not states:
        raise ValueError("inner basis is empty")
    d_new = states[0].size
    if any(s.size != d_new for s in states):
        raise ValueError("inner basis states must share one dimension")
    b = np.array(states)
    if np.max(np.abs(b.conj() @ b.T - np.eye(len(states)))) > ORTHO_TOL:
        raise ValueError("inner basis is not orthonormal")
    b0, b1 = outer.blocks()
    used = np.nonzero(np.any(np.abs(np.vstack([b0, b1])) > 0, axis=0))[0]
    if len(states) == outer.d_A:
        levels = np.arange(outer.d_A)
    elif len(states) == len(used):
        levels = used
    else:
        raise ValueError(
            f"inner basis has {len(states)} states; need {outer.d_A} or {len(used)} (levels in use)"
        )
    new = [(blk[:, levels] @ b).reshape(-1) for blk in (b0, b1)]
    return CodePair(new[0], new[1], outer.d_P, d_new)


def generalized_condition_residual(code: CodePair, probe_ops, ancilla_ops) -> float:
    """Largest deviation of ``Pi (O (x) O') Pi`` from a multiple of ``Pi``.

    ``probe_ops`` and ``ancilla_ops`` should span the probe and ancilla
    Lindblad spans; bilinearity makes checking spanning sets sufficient.
    """
    cs = code.blocks()
    worst = 0.0
    for o in probe_ops:
        o = np.asarray(o, dtype=complex)
        for o2 in ancilla_ops:
            o2 = np.asarray(o2, dtype=complex)
            if o2.shape != (code.d_A, code.d_A):
                raise ValueError(f"ancilla operator shape {o2.shape} != ({code.d_A}, {code.d_A})")
            m = np.array([[np.sum((a.conj().T @ o @ b) * o2) for b in cs] for a in cs])
            worst = max(worst, _scalar_residual(m)[1])
    return worst


def ancilla_free_reduction(code: CodePair, model: LindbladModel,
                           tol: float = DEFAULT_QEC_TOL) -> CodePair | None:
    """Try to drop the ancilla by picking pure representatives of the marginals.

    Candidates for each marginal ``rho`` are ``sqrt(rho)`` applied to the
    all-ones vector and, for rank-one marginals, the supporting vector.  The
    first candidate pair that is orthonormal and passes [1]-[3] is returned.
    """
    d = code.d_P
    cands = []
    ones = np.ones(d, dtype=complex)
    for rho in code.reduced_states():
        w, u = eig_hermitian(rho)
        w = np.clip(w, 0.0, None)
        opts = []
        root = (u * np.sqrt(w)) @ u.conj().T
        v = root @ ones
        if np.linalg.norm(v) > 1e-8:
            opts.append(v / np.linalg.norm(v))
        if np.sum(w > 1e-10 * w.max()) == 1:
            opts.append(u[:, -1])
        cands.append(opts)
    for p0 in cands[0]:
        for p1 in cands[1]:
            if abs(np.vdot(p0, p1)) > ORTHO_TOL:
                continue
            reduced = CodePair(p0, p1, d, 1)
            if check_conditions(reduced, model, tol).ok:
                return reduced
    return None


def code_fidelity(a: CodePair, b: CodePair) -> float:
    """``tr(Pi_a Pi_b) / 2``: 1 iff the code spaces coincide."""
    if a.dim != b.dim:
        raise ValueError("codes live on different spaces")
    return float(np.real(np.trace(a.projector @ b.projector)) / 2.0)


def g_perp_gap(g_perp) -> float:
    """``2 tr(G_perp^2) / tr|G_perp|``, the canonical code's eigengap."""
    g = np.asarray(g_perp, dtype=complex)
    return float(2.0 * np.real(np.trace(g @ g)) / trace_abs(g))
