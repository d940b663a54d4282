"""The Lindblad span and the Hamiltonian-not-in-Lindblad-span test.

The span ``S`` is the real vector space of Hermitian matrices generated by
``I``, the Hermitian and anti-Hermitian parts of each ``L_k`` and of each
product ``L_k^dag L_j``.  A generator ``G`` admits Heisenberg scaling iff it
has a nonzero component orthogonal to ``S`` in the Hilbert-Schmidt inner
product.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import LindbladModel
from .operators import check_hermitian, hs_inner, hs_norm

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-9
DEFAULT_HNLS_TOL = 1e-8

__all__ = [
    "HnlsVerdict",
    "SpanBasis",
    "decompose",
    "hermitian_generators",
    "hnls_check",
    "lindblad_span",
    "orthonormal_basis",
]


@dataclass(frozen=True)
class SpanBasis:
    """Orthonormal (under ``tr(AB)``) Hermitian basis of a real span."""

    basis: tuple
    generator_count: int
    rank_tol: float

    def __len__(self) -> int:
        return len(self.basis)

    @property
    def dim(self) -> int | None:
        return self.basis[0].shape[0] if self.basis else None

    def coefficients(self, g) -> np.ndarray:
        """Coordinates ``tr(g E_k)`` of ``g`` along the basis."""
        return np.array([hs_inner(g, e) for e in self.basis])

    def combine(self, coeffs) -> np.ndarray:
        """``sum_k coeffs[k] E_k``."""
        coeffs = np.asarray(coeffs, dtype=float)
        if len(coeffs) != len(self.basis):
            raise ValueError("coefficient count does not match basis size")
        if not self.basis:
            raise ValueError("empty basis has no ambient dimension")
        return np.tensordot(coeffs, np.asarray(self.basis), axes=1)

    def extended(self, extra, rank_tol: float | None = None) -> "SpanBasis":
        """Basis of the span enlarged by the Hermitian operators ``extra``."""
        tol = self.rank_tol if rank_tol is None else rank_tol
        return orthonormal_basis(list(self.basis) + list(extra), tol)


@dataclass(frozen=True)
class HnlsVerdict:
    holds: bool
    g_perp: np.ndarray
    g_par: np.ndarray
    perp_hs_norm: float
    tol: float
    marginal: bool

    def as_dict(self) -> dict:
        return {
            "holds": self.holds,
            "perp_hs_norm": self.perp_hs_norm,
            "tol": self.tol,
            "marginal": self.marginal,
        }


def hermitian_generators(model: LindbladModel) -> list[np.ndarray]:
    """Hermitian spanning set of the Lindblad span, duplicates kept.

    Order: ``I``; then ``L_k + L_k^dag``, ``i(L_k - L_k^dag)`` for each k;
    then ``L_k^dag L_j + L_j^dag L_k`` for each pair ``k <= j``, followed by
    ``i(L_k^dag L_j - L_j^dag L_k)`` when ``k < j`` (it vanishes for ``k = j``).
    Length ``1 + 2r + r^2``.
    """
    d = model.dim
    ls = model.lindblad
    gens = [np.eye(d, dtype=complex)]
    for l in ls:
        ld = l.conj().T
        gens.append(l + ld)
        gens.append(1j * (l - ld))
    for k, lk in enumerate(ls):
        for j, lj in enumerate(ls):
            if j < k:
                continue
            p = lk.conj().T @ lj
            gens.append(p + p.conj().T)
            if j != k:
                gens.append(1j * (p - p.conj().T))
    return gens


def _vec(a: np.ndarray) -> np.ndarray:
    # Real coordinates in which the Euclidean product equals tr(AB) for Hermitian A, B.
    flat = np.asarray(a, dtype=complex).reshape(-1)
    return np.concatenate([flat.real, flat.imag])


def orthonormal_basis(generators, rank_tol: float = DEFAULT_RANK_TOL) -> SpanBasis:
    """Orthonormalise Hermitian generators by modified Gram-Schmidt.

    Each candidate is orthogonalised twice against the accepted vectors.  A
    residual whose norm is at most ``rank_tol`` times the largest generator
    norm is discarded as linearly dependent.
    """
    gens = [check_hermitian(g, tol=1e-10, name="generator") for g in generators]
    if not gens:
        raise ValueError("need at least one generator")
    shape = gens[0].shape
    if any(g.shape != shape for g in gens):
        raise ValueError("generators must share one shape")
    scale = max(hs_norm(g) for g in gens)
    if scale == 0.0:
        logger.warning("all span generators vanish; returning an empty basis")
        return SpanBasis((), len(gens), rank_tol)
    cutoff = rank_tol * scale
    accepted: list[np.ndarray] = []
    for g in gens:
        v = _vec(g)
        for _ in range(2):
            for q in accepted:
                v = v - np.dot(q, v) * q
        n = np.linalg.norm(v)
        if n > cutoff:
            accepted.append(v / n)
    n2 = shape[0] * shape[1]
    basis = []
    for q in accepted:
        m = (q[:n2] + 1j * q[n2:]).reshape(shape)
        m = 0.5 * (m + m.conj().T)
        m.setflags(write=False)
        basis.append(m)
    return SpanBasis(tuple(basis), len(gens), rank_tol)


def lindblad_span(model: LindbladModel, rank_tol: float = DEFAULT_RANK_TOL) -> SpanBasis:
    return orthonormal_basis(hermitian_generators(model), rank_tol)


def decompose(g, basis: SpanBasis) -> tuple[np.ndarray, np.ndarray]:
    """Split ``g`` into its projection on the span and the orthogonal rest."""
    g = check_hermitian(g, name="generator")
    if basis.dim is not None and basis.dim != g.shape[0]:
        raise ValueError(f"dimension mismatch: {g.shape[0]} vs basis {basis.dim}")
    if not basis.basis:
        return np.zeros_like(g), g.copy()
    g_par = basis.combine(basis.coefficients(g))
    g_perp = g - g_par
    g_perp = 0.5 * (g_perp + g_perp.conj().T)
    return g - g_perp, g_perp


def hnls_check(model: LindbladModel, tol: float = DEFAULT_HNLS_TOL,
               rank_tol: float = DEFAULT_RANK_TOL) -> HnlsVerdict:
    """Decide whether ``G`` has a component outside the Lindblad span."""
    basis = lindblad_span(model, rank_tol)
    g_par, g_perp = decompose(model.G, basis)
    nrm = hs_norm(g_perp)
    marginal = tol / 10.0 < nrm < tol * 10.0
    if marginal:
        logger.warning("HNLS verdict is marginal: |G_perp| = %.3e with tol %.3e", nrm, tol)
    return HnlsVerdict(nrm > tol, g_perp, g_par, nrm, tol, marginal)
