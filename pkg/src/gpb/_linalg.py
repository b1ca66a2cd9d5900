from __future__ import annotations

import numpy as np
from scipy import linalg

DEFAULT_JITTER = 1e-10


class NumericalError(RuntimeError):
    """A factorization or eigensolve could not be completed."""


def symmetrize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + A.T)


def jittered_cholesky(K: np.ndarray, nugget: float = 0.0, jitter: float = DEFAULT_JITTER):
    """Lower Cholesky factor of ``K + (nugget + jitter * max diag K) I``.

    Returns the factor and the total diagonal shift actually added.
    """
    n = K.shape[0]
    scale = float(np.max(np.diag(K))) if n else 0.0
    shift = nugget + jitter * max(scale, 0.0)
    try:
        L = linalg.cholesky(symmetrize(K) + shift * np.eye(n), lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(
            f"Cholesky failed on a {n}x{n} Gram matrix (diagonal shift {shift:.3g}); "
            f"min eigenvalue {np.linalg.eigvalsh(symmetrize(K)).min():.3g}"
        ) from exc
    return L, shift


def tri_solve(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    return linalg.solve_triangular(L, B, lower=True, check_finite=False)


def cho_solve(L: np.ndarray, B: np.ndarray) -> np.ndarray:
    return linalg.cho_solve((L, True), B, check_finite=False)
