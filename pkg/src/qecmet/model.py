"""The Markovian probe model: signal generator plus jump operators."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .operators import as_matrix, check_hermitian


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class LindbladModel:
    """Probe dynamics ``d rho/dt = -i omega [G, rho] + sum_k D[L_k] rho``.

    Attributes
    ----------
    G : (d, d) Hermitian array
        Signal generator; the Hamiltonian is ``omega * G``.
    lindblad : tuple of (d, d) arrays
        Jump operators ``L_k`` of the noise the code must correct.
    perturbation : tuple of (d, d) arrays
        Optional weak jump operators ``J_m`` (not corrected by design).
    omega : float
        Parameter value at which dynamics and Fisher information are
        evaluated.

    The number of jump operators is taken as given; no attempt is made to
    find a minimal presentation.
    """

    G: np.ndarray
    lindblad: tuple = ()
    perturbation: tuple = ()
    omega: float = 0.0
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        g = check_hermitian(self.G, name="G")
        d = g.shape[0]
        if d < 1:
            raise ValueError("model dimension must be positive")
        ls = []
        for kind, ops in (("lindblad", self.lindblad), ("perturbation", self.perturbation)):
            out = []
            for k, op in enumerate(ops):
                m = as_matrix(op, f"{kind}[{k}]")
                if m.shape != (d, d):
                    raise ValueError(f"{kind}[{k}] has shape {m.shape}, expected {(d, d)}")
                out.append(_frozen(m))
            ls.append(tuple(out))
        if not np.isfinite(self.omega):
            raise ValueError("omega must be finite")
        object.__setattr__(self, "G", _frozen(g))
        object.__setattr__(self, "lindblad", ls[0])
        object.__setattr__(self, "perturbation", ls[1])
        object.__setattr__(self, "omega", float(self.omega))

    @property
    def dim(self) -> int:
        return self.G.shape[0]

    @property
    def rank(self) -> int:
        return len(self.lindblad)

    def with_perturbation(self, ops) -> "LindbladModel":
        return LindbladModel(self.G, self.lindblad, tuple(ops), self.omega, dict(self.metadata))

    def with_omega(self, omega: float) -> "LindbladModel":
        return LindbladModel(self.G, self.lindblad, self.perturbation, omega, dict(self.metadata))

    def jump_operators(self, include_perturbation: bool = True) -> tuple:
        if include_perturbation:
            return self.lindblad + self.perturbation
        return self.lindblad
