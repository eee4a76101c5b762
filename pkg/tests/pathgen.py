"""Random Lagrangian paths shared by the Maslov and acceptance tests."""

from __future__ import annotations

import numpy as np

from graphindex.maslov import LagrangianPath
from graphindex.symplectic import SymplecticForm, lagrangian_from_unitary, random_unitary


def _hermitian(n: int, rng: np.random.Generator, scale: float) -> np.ndarray:
    h = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return scale * 0.5 * (h + h.conj().T)


def random_piecewise_path(space: SymplecticForm, rng: np.random.Generator,
                          pieces: int = 2, scale: float = 2.0,
                          samples: int = 129) -> LagrangianPath:
    """Piecewise unitary path ``U0 exp(i t H_1) exp(i (t - t_1) H_2) ...`` on [0, 1].

    Each piece uses its own Hermitian generator, so the path is continuous with
    kinks at the break points ``k / pieces``.
    """
    n = space.n
    u0 = random_unitary(n, rng)
    eig = [np.linalg.eigh(_hermitian(n, rng, scale)) for _ in range(pieces)]
    breaks = np.linspace(0.0, 1.0, pieces + 1)

    def piece(k: int, s: float) -> np.ndarray:
        lam, v = eig[k]
        return (v * np.exp(1j * lam * s)) @ v.conj().T

    starts = [u0]
    for k in range(pieces - 1):
        starts.append(starts[-1] @ piece(k, breaks[k + 1] - breaks[k]))

    def evaluator(t: float):
        k = min(int(np.searchsorted(breaks, t, side="right")) - 1, pieces - 1)
        k = max(k, 0)
        return lagrangian_from_unitary(space, starts[k] @ piece(k, t - breaks[k]))

    return LagrangianPath(evaluator, (0.0, 1.0), np.linspace(0.0, 1.0, samples))
