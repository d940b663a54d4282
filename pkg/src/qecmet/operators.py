"""Dense complex-matrix algebra with Hermitian-operator semantics.

Operators are plain ``numpy`` arrays of dtype ``complex128``.  The helpers
in this module validate the invariants the rest of the package relies on
(Hermiticity, unit trace, normalisation) and provide the handful of
primitives everything else is built from.  A single eigendecomposition
backend (:func:`eig_hermitian`) serves norms, trace norms and spectral
splits so that every module sees identical spectra.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

HERMITIAN_TOL = 1e-12
DENSITY_TRACE_TOL = 1e-10
DENSITY_EIG_TOL = -1e-10
PURE_NORM_TOL = 1e-12
CHANNEL_TP_TOL = 1e-9

__all__ = [
    "QuantumChannel",
    "apply_channel",
    "as_matrix",
    "check_density",
    "check_hermitian",
    "check_pure",
    "dagger",
    "eig_hermitian",
    "hs_inner",
    "hs_norm",
    "matrix_exp",
    "operator_norm",
    "partial_trace",
    "tensor",
    "trace_abs",
    "trace_distance",
]


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def check_hermitian(a, tol: float = HERMITIAN_TOL, name: str = "operator") -> np.ndarray:
    """Validate that ``a`` is square and Hermitian.

    The tolerance is relative to the largest entry magnitude of ``a``.
    Returns the validated complex array.
    """
    m = as_matrix(a, name)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    dev = np.abs(m - m.conj().T)
    worst = float(dev.max()) if m.size else 0.0
    if worst > tol * scale:
        i, j = np.unravel_index(int(np.argmax(dev)), dev.shape)
        raise ValueError(
            f"{name} is not Hermitian: |A[{i},{j}] - conj(A[{j},{i}])| = {worst:.3e}"
        )
    return m


def check_density(rho, trace_tol: float = DENSITY_TRACE_TOL,
                  eig_tol: float = DENSITY_EIG_TOL) -> np.ndarray:
    """Validate a density operator: Hermitian, unit trace, positive."""
    m = check_hermitian(rho, name="density operator")
    tr = np.trace(m).real
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"density operator has trace {tr!r}")
    lo = eig_hermitian(m)[0][0]
    if lo < eig_tol:
        raise ValueError(f"density operator has negative eigenvalue {lo:.3e}")
    return m


def check_pure(psi, tol: float = PURE_NORM_TOL) -> np.ndarray:
    """Validate a normalised state vector."""
    v = np.asarray(psi, dtype=complex).reshape(-1)
    if not np.all(np.isfinite(v)):
        raise ValueError("state vector has non-finite entries")
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"state vector has norm {nrm!r}")
    return v


def hs_inner(a, b) -> float:
    """Hilbert-Schmidt inner product ``tr(a b)`` of two Hermitian operators."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    # tr(AB) = sum_ij A_ij B_ji, real for Hermitian arguments
    return float(np.real(np.sum(a * b.T)))


def hs_norm(a) -> float:
    a = np.asarray(a, dtype=complex)
    return float(np.sqrt(max(hs_inner(a, a.conj().T), 0.0)))


def eig_hermitian(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors (columns).

    Eigenvectors belonging to a degenerate cluster form an arbitrary
    orthonormal basis of that cluster; callers must treat the cluster as a
    subspace.
    """
    m = as_matrix(a, "operator")
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"operator must be square, got shape {m.shape}")
    m = 0.5 * (m + m.conj().T)
    try:
        w, v = np.linalg.eigh(m)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise np.linalg.LinAlgError(f"Hermitian eigensolver did not converge: {exc}") from exc
    return w, v


def operator_norm(a) -> float:
    """Largest absolute eigenvalue of a Hermitian operator."""
    w, _ = eig_hermitian(a)
    return float(np.max(np.abs(w))) if w.size else 0.0


def trace_abs(a) -> float:
    """Trace norm ``tr|a|`` of a Hermitian operator."""
    w, _ = eig_hermitian(a)
    return float(np.sum(np.abs(w)))


def trace_distance(a, b) -> float:
    """Half the trace norm of ``a - b``."""
    return 0.5 * trace_abs(np.asarray(a) - np.asarray(b))


def tensor(*ops) -> np.ndarray:
    """Kronecker product of any number of matrices (or vectors)."""
    out = np.asarray(ops[0], dtype=complex)
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op, dtype=complex))
    return out


def partial_trace(m, dims: tuple[int, int], keep: int = 0) -> np.ndarray:
    """Trace out one factor of a bipartite operator.

    Parameters
    ----------
    m : array, shape (dP*dA, dP*dA)
    dims : (dP, dA)
    keep : 0 keeps the first factor, 1 keeps the second.
    """
    m = as_matrix(m)
    d_p, d_a = (int(x) for x in dims)
    if m.shape != (d_p * d_a, d_p * d_a):
        raise ValueError(f"shape {m.shape} does not factor as {d_p}x{d_a}")
    t = m.reshape(d_p, d_a, d_p, d_a)
    if keep == 0:
        return np.einsum("iaja->ij", t)
    if keep == 1:
        return np.einsum("iaib->ab", t)
    raise ValueError("keep must be 0 or 1")


def matrix_exp(a, scale: complex = 1.0) -> np.ndarray:
    """``exp(scale * a)`` by scaling-and-squaring Pade (scipy)."""
    m = as_matrix(a)
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    x = complex(scale) * m
    nrm = np.linalg.norm(x, 1)
    if nrm > 700.0:
        raise OverflowError(f"exponent norm {nrm:.3e} too large for a finite result")
    return scipy.linalg.expm(x)


@dataclass(frozen=True)
class QuantumChannel:
    """A channel given by Kraus operators ``rho -> sum K rho K^dag``.

    ``trace_preserving=False`` marks a trace-non-increasing operation, for
    which ``sum K^dag K <= I`` is checked instead of equality.
    ``off_support`` lists indices of Kraus operators that should never act on
    physically reachable states (see :mod:`qecmet.codes`).
    """

    kraus_ops: tuple
    trace_preserving: bool = True
    off_support: tuple = field(default=())
    tol: float = CHANNEL_TP_TOL

    def __post_init__(self):
        ops = tuple(as_matrix(k, "Kraus operator") for k in self.kraus_ops)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        shape = ops[0].shape
        if any(k.shape != shape for k in ops):
            raise ValueError("Kraus operators must share one shape")
        for k in ops:
            k.setflags(write=False)
        object.__setattr__(self, "kraus_ops", ops)
        s = self.completeness()
        eye = np.eye(shape[1])
        if self.trace_preserving:
            err = np.max(np.abs(s - eye))
            if err > self.tol:
                raise ValueError(f"Kraus set is not trace preserving (deviation {err:.3e})")
        else:
            top = eig_hermitian(s)[0][-1]
            if top > 1.0 + self.tol:
                raise ValueError(f"Kraus set is trace increasing (max eigenvalue {top:.6g})")

    @property
    def shape(self) -> tuple[int, int]:
        return self.kraus_ops[0].shape

    def completeness(self) -> np.ndarray:
        """``sum_j K_j^dag K_j``."""
        stack = np.asarray(self.kraus_ops)
        return np.einsum("kji,kjl->il", stack.conj(), stack)

    def __call__(self, rho):
        return _apply_kraus(self.kraus_ops, rho)


def _apply_kraus(kraus_ops, x) -> np.ndarray:
    stack = np.asarray(kraus_ops)
    return np.einsum("kij,jl,kml->im", stack, x, stack.conj())


def apply_channel(ch: QuantumChannel, rho) -> np.ndarray:
    """Apply ``ch`` to a density operator.

    For a trace-non-increasing channel the result is unnormalised; its trace
    is the success weight.
    """
    rho = as_matrix(rho, "density operator")
    if rho.shape != (ch.shape[1], ch.shape[1]):
        raise ValueError(f"state shape {rho.shape} does not match channel input {ch.shape[1]}")
    return ch(rho)
