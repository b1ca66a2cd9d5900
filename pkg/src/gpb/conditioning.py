"""Gaussian processes conditioned on values over a constraint set.

Given a prior with mean ``mu`` and kernel ``k`` and a function ``g`` known on
``T0``, the constrained process has

    mu_0(s)     = mu(s) + < k_s|T0, (g - mu)|T0 >
    k_0(s1, s2) = k(s1, s2) - < k_s1|T0, k_s2|T0 >

where ``<., .>`` is the RKHS inner product on ``T0``, approximated by one of
the forms in :mod:`gpb.spectral`. Finite observations elsewhere are then
folded in with the ordinary multivariate-Gaussian formulas, using the
constrained process as the prior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.spatial.distance import pdist, squareform

from ._linalg import DEFAULT_JITTER, NumericalError, cho_solve, jittered_cholesky, symmetrize, tri_solve
from .domain import FinitePoints
from .kernels import Kernel, as_points
from .spectral import FormSpec, RkhsForm, SpectralForm, build_form

__all__ = [
    "GP",
    "ConstrainedGP",
    "PredictiveGP",
    "zero_mean",
    "finite_condition",
    "constrain",
    "posterior",
    "sample_paths",
]


def zero_mean(points: np.ndarray) -> np.ndarray:
    return np.zeros(np.shape(points)[0])


@dataclass(frozen=True, eq=False)
class GP:
    """Prior process: a vectorized mean function and a kernel."""

    kernel: Kernel
    mean_fn: Callable[[np.ndarray], np.ndarray] = zero_mean

    @property
    def dimension(self) -> int:
        return self.kernel.dimension

    def mean(self, points) -> np.ndarray:
        P = as_points(points, self.dimension)
        return np.asarray(self.mean_fn(P), dtype=float).reshape(P.shape[0])

    def cov(self, A, B=None) -> np.ndarray:
        return self.kernel.gram(A, B)

    def var(self, points) -> np.ndarray:
        return self.kernel.diag(points)


@dataclass(frozen=True, eq=False)
class ConstrainedGP:
    """Prior conditioned on ``X = g`` over a constraint set.

    ``residual_coeffs`` is the nodal dual vector of ``(g - mu)`` at the form
    nodes, so the mean costs one kernel row per probe point.
    """

    prior: GP
    constraint_set: object
    g: Callable[[np.ndarray], np.ndarray]
    form: RkhsForm
    constraint_values: np.ndarray
    residual_coeffs: np.ndarray
    _residual_white: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.prior.dimension

    @property
    def kernel(self) -> Kernel:
        return self.prior.kernel

    def mean(self, points) -> np.ndarray:
        P = as_points(points, self.dimension)
        return self.prior.mean(P) + self.form.sections(P).T @ self.residual_coeffs

    def _white_sections(self, P):
        return self.form.whiten(self.form.sections(P))

    def cov(self, A, B=None) -> np.ndarray:
        A = as_points(A, self.dimension)
        WA = self._white_sections(A)
        if B is None:
            return self.prior.cov(A) - WA.T @ WA
        B = as_points(B, self.dimension)
        return self.prior.cov(A, B) - WA.T @ self._white_sections(B)

    def var(self, points) -> np.ndarray:
        P = as_points(points, self.dimension)
        W = self._white_sections(P)
        return self.prior.var(P) - np.sum(W * W, axis=0)

    def residual_norm2(self) -> float:
        """Form value ``a(g - mu, g - mu)``: a proxy for the squared RKHS norm."""
        return float(self._residual_white @ self._residual_white)

    def residual_norm_profile(self) -> np.ndarray:
        """Partial sums of ``a_n(g - mu, g - mu)`` over retained eigenpairs.

        Steady growth with ``n`` is evidence that ``g - mu`` is not in the
        RKHS on the constraint set. Interpolation forms give one value.
        """
        if isinstance(self.form, SpectralForm):
            return np.cumsum(self._residual_white**2)
        return np.array([self.residual_norm2()])


def _near_duplicates(X: np.ndarray, count: int = 3) -> list[tuple[list, list, float]]:
    if X.shape[0] < 2:
        return []
    D = squareform(pdist(X))
    iu = np.triu_indices(X.shape[0], 1)
    order = np.argsort(D[iu])[:count]
    return [(X[iu[0][k]].tolist(), X[iu[1][k]].tolist(), float(D[iu][k])) for k in order]


@dataclass(frozen=True, eq=False)
class PredictiveGP:
    """A base process conditioned on finitely many (possibly noisy) values."""

    base: object
    observation_points: np.ndarray
    observation_values: np.ndarray
    noise_variance: float
    method: str
    _factor: np.ndarray | None = field(repr=False)
    _alpha: np.ndarray = field(repr=False)

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def kernel(self) -> Kernel:
        return self.base.kernel

    def mean(self, points) -> np.ndarray:
        P = as_points(points, self.dimension)
        if self._alpha.size == 0:
            return self.base.mean(P)
        return self.base.mean(P) + self.base.cov(P, self.observation_points) @ self._alpha

    def _reduction(self, A, B):
        X = self.observation_points
        if self.method == "inverse":
            return self.base.cov(A, X) @ self._factor @ self.base.cov(X, B)
        VA = tri_solve(self._factor, self.base.cov(X, A))
        VB = VA if B is A else tri_solve(self._factor, self.base.cov(X, B))
        return VA.T @ VB

    def cov(self, A, B=None) -> np.ndarray:
        A = as_points(A, self.dimension)
        if B is None:
            base, B = self.base.cov(A), A
        else:
            B = as_points(B, self.dimension)
            base = self.base.cov(A, B)
        if self._alpha.size == 0:
            return base
        return base - self._reduction(A, B)

    def var(self, points) -> np.ndarray:
        P = as_points(points, self.dimension)
        if self._alpha.size == 0:
            return self.base.var(P)
        if self.method == "inverse":
            return np.diag(self.cov(P))
        V = tri_solve(self._factor, self.base.cov(self.observation_points, P))
        return self.base.var(P) - np.sum(V * V, axis=0)


def finite_condition(prior, t, x, noise_variance: float = 0.0, method: str = "cholesky",
                     jitter: float = DEFAULT_JITTER) -> PredictiveGP:
    """Condition ``prior`` on values ``x`` at finitely many points ``t``.

    mean(s) = mu(s) + k(s, t) [k(t, t) + v I]^{-1} (x - mu(t))
    cov(s, s') = k(s, s') - k(s, t) [k(t, t) + v I]^{-1} k(t, s')

    Parameters
    ----------
    prior : GP, ConstrainedGP or PredictiveGP
        Anything exposing ``mean``, ``cov`` and ``var``.
    t : array_like, shape (n, d)
    x : array_like, shape (n,)
    noise_variance : float
        Observation noise ``v`` added to the Gram diagonal.
    method : {"cholesky", "inverse"}
        Factored solve (default) or an explicit inverse of the Gram matrix;
        the second route exists for cross-checking.
    jitter : float
        Relative diagonal jitter, scaled by the largest Gram diagonal entry.

    Raises
    ------
    NumericalError
        If the Gram matrix cannot be factored even with the jitter; the
        message names the closest pairs of points.
    """
    if noise_variance < 0:
        raise ValueError("noise_variance must be nonnegative")
    if method not in ("cholesky", "inverse"):
        raise ValueError(f"unknown method {method!r}")
    d = prior.dimension
    T = as_points(t, d) if np.size(t) else np.zeros((0, d))
    xv = np.asarray(x, dtype=float).reshape(-1)
    if xv.shape[0] != T.shape[0]:
        raise ValueError(f"{T.shape[0]} points but {xv.shape[0]} values")
    if T.shape[0] == 0:
        return PredictiveGP(prior, T, xv, float(noise_variance), method, None, np.zeros(0))
    K = prior.cov(T)
    residual = xv - prior.mean(T)
    try:
        L, shift = jittered_cholesky(K, nugget=noise_variance, jitter=jitter)
    except NumericalError as exc:
        pairs = "; ".join(f"{a} ~ {b} (distance {dist:.3g})" for a, b, dist in _near_duplicates(T))
        raise NumericalError(f"{exc}. Closest point pairs: {pairs}") from exc
    if method == "inverse":
        Kinv = linalg.inv(symmetrize(K) + shift * np.eye(T.shape[0]))
        return PredictiveGP(prior, T, xv, float(noise_variance), method, Kinv, Kinv @ residual)
    return PredictiveGP(prior, T, xv, float(noise_variance), method, L, cho_solve(L, residual))


def posterior(base, obs_points, obs_values, noise_variance: float = 0.0) -> PredictiveGP:
    """Fold finite observations into a (constrained) process.

    The constraint is applied first and cached; the observations are then
    conditioned on with the constrained mean and covariance as the prior.
    """
    return finite_condition(base, obs_points, obs_values, noise_variance)


def _check_consistent(nodes: np.ndarray, values: np.ndarray, tol: float = 1e-12) -> None:
    if nodes.shape[0] < 2:
        return
    D = squareform(pdist(nodes))
    i, j = np.nonzero(np.triu(D <= tol, 1))
    bad = np.abs(values[i] - values[j]) > tol * (1.0 + np.abs(values[i]))
    if np.any(bad):
        k = np.flatnonzero(bad)[0]
        raise ValueError(
            f"inconsistent constraint: node {nodes[i[k]].tolist()} is given values "
            f"{values[i[k]]!r} and {values[j[k]]!r}"
        )


def constrain(prior: GP, T0, g: Callable[[np.ndarray], np.ndarray], spec: FormSpec | None = None,
              form: RkhsForm | None = None) -> ConstrainedGP:
    """Condition ``prior`` on ``X = g`` over the constraint set ``T0``.

    Parameters
    ----------
    prior : GP
    T0 : FinitePoints or ParameterizedPath
    g : callable
        Vectorized; evaluated once at the form nodes.
    spec : FormSpec, optional
        Backend and resolution; interpolation on 64 midpoint nodes by
        default. Ignored when ``form`` is given.
    form : RkhsForm, optional
        A prebuilt form whose nodes lie on ``T0``.
    """
    if form is None:
        spec = FormSpec() if spec is None else spec
        if isinstance(T0, FinitePoints):
            _check_consistent(T0.points, np.asarray(g(T0.points), dtype=float).reshape(-1))
            # drop repeats but keep first-seen order so the Gram matches a direct finite solve
            _, first = np.unique(T0.points, axis=0, return_index=True)
            T0 = FinitePoints(T0.points[np.sort(first)])
        form = build_form(prior.kernel, T0, spec)
    nodes = form.nodes
    gv = np.asarray(g(nodes), dtype=float).reshape(nodes.shape[0])
    _check_consistent(nodes, gv)
    residual = gv - prior.mean(nodes)
    return ConstrainedGP(
        prior=prior,
        constraint_set=T0,
        g=g,
        form=form,
        constraint_values=gv,
        residual_coeffs=form.coeffs(residual),
        _residual_white=form.whiten(residual),
    )


def sample_paths(gp, grid, count: int, seed: int, max_jitter: float = 1e-6) -> np.ndarray:
    """Draw ``count`` joint samples of ``gp`` on ``grid``.

    The covariance is factored with a diagonal jitter escalated from
    ``1e-12`` by decades up to ``max_jitter`` (relative to
    ``max(1, max variance)``).

    Returns
    -------
    ndarray, shape (count, len(grid))
    """
    P = as_points(grid, gp.dimension)
    if P.shape[0] == 0:
        raise ValueError("grid must be non-empty")
    if count < 0:
        raise ValueError("count must be nonnegative")
    m = gp.mean(P)
    C = symmetrize(gp.cov(P))
    scale = max(1.0, float(np.max(np.diag(C))))
    jitter = 1e-12
    while True:
        try:
            L = linalg.cholesky(C + jitter * scale * np.eye(P.shape[0]), lower=True)
            break
        except linalg.LinAlgError:
            jitter *= 10.0
            if jitter > max_jitter * (1 + 1e-9):
                raise NumericalError(
                    f"covariance on {P.shape[0]} grid points not factorizable with jitter up to "
                    f"{max_jitter:g}; min eigenvalue {np.linalg.eigvalsh(C).min():.3g}"
                ) from None
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((count, P.shape[0]))
    return m[None, :] + Z @ L.T
