"""Nyström eigenpairs on a constraint set and RKHS bilinear forms built on them.

Every form exposes the same three operations on vectors of function values
at its nodes:

``whiten(f)``
    coordinates in which the form is the Euclidean dot product,
``coeffs(f)``
    the nodal dual vector ``a`` with ``inner(f, g) == a @ g``,
``inner(f, g)``
    the bilinear form itself.

Backends
--------
interpolation
    ``f^T (K + nugget I)^{-1} g`` on the node Gram ``K`` (plus jitter).
spectral
    ``sum_{n<=N} <f, e_n><g, e_n> / lambda_n`` from Nyström eigenpairs.
nugget
    as spectral with ``lambda_n + sigma^2`` (white noise on the operator).
sum_kernel
    as spectral, with eigenpairs of ``k + q`` and sections of ``k``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ._linalg import DEFAULT_JITTER, NumericalError, cho_solve, jittered_cholesky, symmetrize, tri_solve
from .domain import QUADRATURE_RULES, QuadratureRule, quadrature
from .kernels import Kernel, Sum, as_points, kernel_from_dict

__all__ = [
    "SpectralBasis",
    "RkhsForm",
    "InterpolationForm",
    "SpectralForm",
    "FormSpec",
    "nystrom_eig",
    "interpolation_form",
    "spectral_form",
    "sum_kernel_form",
    "build_form",
    "rkhs_inner",
    "inner_coeffs",
    "write_eigen_csv",
    "BACKENDS",
    "DEFAULT_TRUNCATION",
]

BACKENDS = ("interpolation", "spectral", "nugget", "sum_kernel")
DEFAULT_TRUNCATION = 1e-12


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Truncated Nyström eigenpairs of the kernel integral operator.

    ``eigenfunction_values[:, n]`` is ``e_n`` at the quadrature points,
    orthonormal in the discrete L2 inner product weighted by the rule.
    """

    kernel: Kernel
    quadrature: QuadratureRule
    eigenvalues: np.ndarray
    eigenfunction_values: np.ndarray
    truncation_threshold: float

    def __len__(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def points(self) -> np.ndarray:
        return self.quadrature.points

    def project(self, values: np.ndarray) -> np.ndarray:
        """L2 coefficients ``<f, e_n>`` by the basis quadrature."""
        w = self.quadrature.weights
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            return self.eigenfunction_values.T @ (w * values)
        return self.eigenfunction_values.T @ (w[:, None] * values)

    def extend(self, points) -> np.ndarray:
        """Nyström extension ``e_n(s) = sum_i w_i k(s, x_i) e_n(x_i) / lambda_n``."""
        G = self.kernel.gram(points, self.points)
        return G @ (self.quadrature.weights[:, None] * self.eigenfunction_values) / self.eigenvalues

    def mercer(self, n: int | None = None) -> np.ndarray:
        """Node Gram reconstructed from the first ``n`` eigenpairs."""
        E = self.eigenfunction_values[:, :n]
        return (E * self.eigenvalues[:n]) @ E.T


def nystrom_eig(kernel: Kernel, quad: QuadratureRule, truncation_threshold: float = DEFAULT_TRUNCATION) -> SpectralBasis:
    """Eigendecompose the integral operator of ``kernel`` on a quadrature rule.

    Forms ``W^{1/2} G W^{1/2}`` for the node Gram ``G`` and weights ``W``,
    symmetric-eigendecomposes it, and rescales eigenvectors by ``W^{-1/2}``.
    Pairs with ``lambda_n < truncation_threshold * lambda_1`` (and any
    non-positive ones) are dropped.
    """
    if not 0 <= truncation_threshold < 1:
        raise ValueError("truncation_threshold must lie in [0, 1)")
    sw = np.sqrt(quad.weights)
    A = symmetrize(sw[:, None] * kernel.gram(quad.points) * sw[None, :])
    try:
        lam, V = linalg.eigh(A)
    except linalg.LinAlgError as exc:
        raise NumericalError(
            f"symmetric eigensolve failed on a {A.shape[0]}x{A.shape[0]} operator matrix; "
            f"finite: {np.all(np.isfinite(A))}, trace {np.trace(A):.3g}"
        ) from exc
    lam, V = lam[::-1], V[:, ::-1]
    keep = (lam > 0) & (lam >= truncation_threshold * lam[0])
    return SpectralBasis(
        kernel=kernel,
        quadrature=quad,
        eigenvalues=lam[keep].copy(),
        eigenfunction_values=V[:, keep] / sw[:, None],
        truncation_threshold=float(truncation_threshold),
    )


class RkhsForm:
    """Base class; subclasses provide ``whiten`` and ``coeffs``."""

    kernel: Kernel
    nodes: np.ndarray
    backend: str

    def __len__(self) -> int:
        return self.nodes.shape[0]

    def _check(self, values) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        if values.shape[0] != self.nodes.shape[0]:
            raise ValueError(
                f"expected values at {self.nodes.shape[0]} nodes, got {values.shape[0]}"
            )
        return values

    def whiten(self, values) -> np.ndarray:
        raise NotImplementedError

    def coeffs(self, values) -> np.ndarray:
        raise NotImplementedError

    def inner(self, f, g) -> float:
        return float(self.whiten(f) @ self.whiten(g))

    def sections(self, points) -> np.ndarray:
        """Kernel sections ``k_s`` restricted to the nodes, one column per point."""
        return self.kernel.gram(self.nodes, points)


@dataclass(frozen=True, eq=False)
class InterpolationForm(RkhsForm):
    kernel: Kernel
    nodes: np.ndarray
    gram_factor: np.ndarray
    shift: float
    nugget: float = 0.0
    backend: str = "interpolation"

    def whiten(self, values):
        return tri_solve(self.gram_factor, self._check(values))

    def coeffs(self, values):
        return cho_solve(self.gram_factor, self._check(values))


@dataclass(frozen=True, eq=False)
class SpectralForm(RkhsForm):
    kernel: Kernel
    basis: SpectralBasis
    n: int
    nugget: float = 0.0
    backend: str = "spectral"
    _scale: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not 1 <= self.n <= len(self.basis):
            raise ValueError(f"N={self.n} outside 1..{len(self.basis)} available eigenpairs")
        if self.nugget < 0:
            raise ValueError("nugget must be nonnegative")
        lam = self.basis.eigenvalues[: self.n]
        floor = np.finfo(float).eps * lam[0] * len(self.basis.quadrature)
        if self.nugget == 0 and lam[-1] < floor:
            raise NumericalError(
                f"lambda_N={lam[-1]:.3g} is below the safe floor {floor:.3g}; "
                "truncate to fewer eigenpairs or add a nugget"
            )
        object.__setattr__(self, "_scale", 1.0 / (lam + self.nugget))

    @property
    def nodes(self) -> np.ndarray:
        return self.basis.points

    def whiten(self, values):
        proj = self.basis.project(self._check(values))[: self.n]
        s = np.sqrt(self._scale)
        return proj * (s if proj.ndim == 1 else s[:, None])

    def coeffs(self, values):
        proj = self.basis.project(self._check(values))[: self.n]
        E = self.basis.eigenfunction_values[:, : self.n]
        return self.basis.quadrature.weights * (E @ (self._scale * proj))


def interpolation_form(kernel: Kernel, points, nugget: float = 0.0, jitter: float = DEFAULT_JITTER) -> InterpolationForm:
    """Finite-case form ``f^T (k(t, t) + nugget I)^{-1} g`` on ``points``.

    A relative jitter ``jitter * max diag`` is always added before the
    Cholesky factorization.
    """
    P = as_points(points, kernel.dimension)
    L, shift = jittered_cholesky(kernel.gram(P), nugget=nugget, jitter=jitter)
    return InterpolationForm(kernel, P, L, shift, nugget)


def spectral_form(basis: SpectralBasis, n: int | None = None, nugget: float = 0.0,
                  kernel: Kernel | None = None, backend: str | None = None) -> SpectralForm:
    """Truncated series form on the first ``n`` eigenpairs of ``basis``.

    With ``nugget > 0`` each eigenvalue is shifted to ``lambda_n + nugget``.
    ``kernel`` supplies the sections and defaults to the basis kernel.
    """
    n = len(basis) if n is None else int(n)
    if backend is None:
        backend = "nugget" if nugget > 0 else "spectral"
    return SpectralForm(
        kernel=basis.kernel if kernel is None else kernel,
        basis=basis,
        n=n,
        nugget=float(nugget),
        backend=backend,
    )


def sum_kernel_form(kernel: Kernel, q: Kernel, quad: QuadratureRule, n: int | None = None,
                    nugget: float = 0.0, truncation_threshold: float = DEFAULT_TRUNCATION) -> SpectralForm:
    """Series form for the RKHS of ``k + q``, paired against sections of ``k``."""
    basis = nystrom_eig(Sum(kernel, q), quad, truncation_threshold)
    return spectral_form(basis, n, nugget, kernel=kernel, backend="sum_kernel")


def rkhs_inner(form: RkhsForm, f, g) -> float:
    return form.inner(f, g)


def inner_coeffs(form: RkhsForm, f) -> np.ndarray:
    return form.coeffs(f)


@dataclass(frozen=True)
class FormSpec:
    """Backend choice and resolution for building a form on a constraint set.

    ``n_eig`` is the retained eigenpair count for series backends (all
    available when ``None``, clamped to what the basis holds when
    ``clamp`` is set).
    """

    backend: str = "interpolation"
    n_nodes: int = 64
    n_eig: int | None = None
    nugget: float = 0.0
    q: Kernel | None = None
    rule: str = "midpoint"
    truncation: float = DEFAULT_TRUNCATION
    jitter: float = DEFAULT_JITTER
    clamp: bool = False

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; expected one of {BACKENDS}")
        if self.rule not in QUADRATURE_RULES:
            raise ValueError(f"unknown quadrature rule {self.rule!r}")
        if self.backend == "sum_kernel" and self.q is None:
            raise ValueError("sum_kernel backend needs a second kernel q")
        if self.backend == "nugget" and self.nugget <= 0:
            raise ValueError("nugget backend needs nugget > 0")

    def to_dict(self) -> dict:
        out = {
            "backend": self.backend,
            "n_nodes": self.n_nodes,
            "n_eig": self.n_eig,
            "nugget": self.nugget,
            "rule": self.rule,
            "truncation": self.truncation,
            "jitter": self.jitter,
            "clamp": self.clamp,
        }
        if self.q is not None:
            out["q"] = self.q.to_dict()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "FormSpec":
        d = dict(d)
        if d.get("q") is not None:
            d["q"] = kernel_from_dict(d["q"])
        return cls(**d)


def build_form(kernel: Kernel, cset, spec: FormSpec) -> RkhsForm:
    """Discretize ``cset`` and build the requested form for ``kernel``."""
    quad = quadrature(cset, spec.n_nodes, spec.rule)
    if spec.backend == "interpolation":
        return interpolation_form(kernel, quad.points, spec.nugget, spec.jitter)
    if spec.backend == "sum_kernel":
        basis = nystrom_eig(Sum(kernel, spec.q), quad, spec.truncation)
    else:
        basis = nystrom_eig(kernel, quad, spec.truncation)
    n = spec.n_eig
    if n is not None and spec.clamp:
        n = min(n, len(basis))
    backend = "sum_kernel" if spec.backend == "sum_kernel" else None
    return spectral_form(basis, n, spec.nugget, kernel=kernel, backend=backend)


def write_eigen_csv(basis: SpectralBasis, fh) -> None:
    """Rows ``index, eigenvalue, e_n(x_1), ..., e_n(x_m)``."""
    w = csv.writer(fh, lineterminator="\n")
    m = basis.eigenfunction_values.shape[0]
    w.writerow(["index", "eigenvalue"] + [f"node_{i}" for i in range(m)])
    for n, lam in enumerate(basis.eigenvalues):
        w.writerow([n + 1, repr(float(lam))] + [repr(float(v)) for v in basis.eigenfunction_values[:, n]])
