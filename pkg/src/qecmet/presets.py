"""Ready-made probe models: a qubit with one jump, and a Kerr oscillator with loss."""
from __future__ import annotations

import numpy as np

from .model import LindbladModel

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

__all__ = ["PAULI", "annihilation", "kerr_model", "qubit_model"]


def annihilation(dim: int) -> np.ndarray:
    """Truncated lowering operator, ``a|n> = sqrt(n)|n-1>``."""
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def kerr_model(n_bar: int, loss_rate: float = 1.0, omega: float = 0.0,
               dephasing: float = 0.0) -> LindbladModel:
    """Kerr generator ``n^2`` on Fock levels ``0..n_bar`` with photon loss.

    ``dephasing > 0`` adds the perturbing jump ``sqrt(dephasing) n``.
    """
    if int(n_bar) != n_bar or n_bar < 2 or n_bar % 2:
        raise ValueError(f"n_bar must be an even integer >= 2, got {n_bar!r}")
    if loss_rate < 0:
        raise ValueError("loss_rate must be non-negative")
    n_bar = int(n_bar)
    n = np.arange(n_bar + 1)
    g = np.diag(n.astype(float) ** 2).astype(complex)
    a = annihilation(n_bar + 1)
    if dephasing < 0:
        raise ValueError("dephasing must be non-negative")
    pert = (np.sqrt(dephasing) * np.diag(n).astype(complex),) if dephasing > 0 else ()
    return LindbladModel(g, (np.sqrt(loss_rate) * a,), pert, omega,
                         {"preset": "kerr", "n_bar": str(n_bar), "loss_rate": repr(float(loss_rate))})


def qubit_model(m, n, rate: float = 1.0, omega: float = 0.0) -> LindbladModel:
    """``G = m.sigma / 2`` with one jump ``sqrt(rate) n.sigma`` (``n`` may be complex)."""
    m = np.asarray(m, dtype=float).reshape(3)
    n = np.asarray(n, dtype=complex).reshape(3)
    if not np.any(m):
        raise ValueError("m must be nonzero")
    if rate < 0:
        raise ValueError("rate must be non-negative")
    g = 0.5 * np.tensordot(m, np.asarray(PAULI), axes=1)
    l = np.sqrt(rate) * np.tensordot(n, np.asarray(PAULI), axes=1)
    return LindbladModel(g, (l,), (), omega, {"preset": "qubit"})
