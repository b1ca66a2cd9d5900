"""Covariance kernels, Gram assembly and kernel combinators.

Every kernel is an immutable value object. Points are passed as arrays of
shape ``(n, d)``; for ``d == 1`` a flat array of length ``n`` is accepted
as ``n`` one-dimensional points.

The squared exponential is parameterized as ``exp(-|s - t|**2 / l**2)``
(no factor 1/2), so ``lengthscale=1`` gives ``exp(-|s - t|**2)``.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "Kernel",
    "SquaredExponential",
    "Matern",
    "PoweredExponential",
    "VarianceScaled",
    "Sum",
    "RadialPolynomial",
    "as_points",
    "eval_kernel",
    "gram",
    "scale_variance",
    "kernel_from_dict",
]


def as_points(X, dimension: int) -> np.ndarray:
    """Coerce ``X`` to a float array of shape ``(n, dimension)``.

    A scalar or flat array is read as one point when ``dimension > 1`` and
    its length matches, and as ``n`` scalar points when ``dimension == 1``.
    """
    A = np.asarray(X, dtype=float)
    if A.size == 0:
        return np.zeros((0, dimension))
    if A.ndim == 0:
        A = A.reshape(1, 1)
    elif A.ndim == 1:
        if dimension == 1:
            A = A.reshape(-1, 1)
        else:
            A = A.reshape(1, -1)
    if A.ndim != 2:
        raise ValueError(f"points must be at most 2-D, got shape {np.shape(X)}")
    if A.shape[0] == 0:
        return np.zeros((0, dimension))
    if A.shape[1] != dimension:
        raise ValueError(
            f"dimension mismatch: kernel expects d={dimension}, got points of width {A.shape[1]}"
        )
    return A


class Kernel(ABC):
    """Symmetric positive-semidefinite covariance function on R^d."""

    dimension: int

    @property
    @abstractmethod
    def holder_exponent(self) -> float:
        """Declared Hölder exponent of the kernel's squared RKHS distance."""

    @abstractmethod
    def _gram(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def to_dict(self) -> dict:
        ...

    def gram(self, A, B=None) -> np.ndarray:
        """Matrix of kernel values ``k(A_i, B_j)``; ``B`` defaults to ``A``."""
        A = as_points(A, self.dimension)
        B = A if B is None else as_points(B, self.dimension)
        if A.shape[0] == 0 or B.shape[0] == 0:
            return np.zeros((A.shape[0], B.shape[0]))
        return self._gram(A, B)

    def diag(self, A) -> np.ndarray:
        """``k(a, a)`` for every row of ``A``."""
        A = as_points(A, self.dimension)
        return np.array([self._gram(a[None, :], a[None, :])[0, 0] for a in A])

    def __call__(self, s, t) -> float:
        s = as_points(s, self.dimension)
        t = as_points(t, self.dimension)
        if s.shape[0] != 1 or t.shape[0] != 1:
            raise ValueError("kernel evaluation takes single points; use gram() for sets")
        return float(self._gram(s, t)[0, 0])

    def __add__(self, other: "Kernel") -> "Sum":
        return Sum(self, other)


def _check_positive(name: str, value: float) -> None:
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class SquaredExponential(Kernel):
    lengthscale: float = 1.0
    dimension: int = 1

    def __post_init__(self):
        _check_positive("lengthscale", self.lengthscale)

    @property
    def holder_exponent(self) -> float:
        return 2.0

    def _gram(self, A, B):
        return np.exp(-cdist(A, B, "sqeuclidean") / self.lengthscale**2)

    def diag(self, A):
        return np.ones(as_points(A, self.dimension).shape[0])

    def to_dict(self):
        return {
            "family": "squared_exponential",
            "params": {"lengthscale": self.lengthscale, "dimension": self.dimension},
        }


_MATERN_NU = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class Matern(Kernel):
    """Matérn kernel for half-integer smoothness ``nu`` in {1/2, 3/2, 5/2}."""

    nu: float = 1.5
    lengthscale: float = 1.0
    dimension: int = 1

    def __post_init__(self):
        if self.nu not in _MATERN_NU:
            raise ValueError(f"nu must be one of {_MATERN_NU}, got {self.nu!r}")
        _check_positive("lengthscale", self.lengthscale)

    @property
    def holder_exponent(self) -> float:
        return min(2.0 * self.nu, 2.0)

    def _gram(self, A, B):
        r = cdist(A, B, "euclidean") / self.lengthscale
        if self.nu == 0.5:
            return np.exp(-r)
        if self.nu == 1.5:
            c = np.sqrt(3.0) * r
            return (1.0 + c) * np.exp(-c)
        c = np.sqrt(5.0) * r
        return (1.0 + c + c * c / 3.0) * np.exp(-c)

    def diag(self, A):
        return np.ones(as_points(A, self.dimension).shape[0])

    def to_dict(self):
        return {
            "family": "matern",
            "params": {"nu": self.nu, "lengthscale": self.lengthscale, "dimension": self.dimension},
        }


@dataclass(frozen=True)
class PoweredExponential(Kernel):
    """``C * exp(-sum_i rates[i] * |s_i - t_i| ** exponents[i])``."""

    amplitude: float = 1.0
    rates: tuple = (1.0,)
    exponents: tuple = (2.0,)

    def __post_init__(self):
        _check_positive("amplitude", self.amplitude)
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        object.__setattr__(self, "exponents", tuple(float(p) for p in self.exponents))
        if len(self.rates) != len(self.exponents) or not self.rates:
            raise ValueError("rates and exponents need one entry per input dimension")
        for r in self.rates:
            _check_positive("rate", r)
        for p in self.exponents:
            if not 0 < p <= 2:
                raise ValueError(f"exponents must lie in (0, 2], got {p!r}")

    @property
    def dimension(self) -> int:
        return len(self.rates)

    @property
    def holder_exponent(self) -> float:
        return min(self.exponents)

    def _gram(self, A, B):
        expo = np.zeros((A.shape[0], B.shape[0]))
        for i, (rate, p) in enumerate(zip(self.rates, self.exponents)):
            expo += rate * np.abs(A[:, i, None] - B[None, :, i]) ** p
        return self.amplitude * np.exp(-expo)

    def diag(self, A):
        return np.full(as_points(A, self.dimension).shape[0], self.amplitude)

    def to_dict(self):
        return {
            "family": "powered_exponential",
            "params": {
                "amplitude": self.amplitude,
                "rates": list(self.rates),
                "exponents": list(self.exponents),
            },
        }


@dataclass(frozen=True)
class RadialPolynomial:
    """``sigma(s) = sum_i coeffs[i] * |s| ** (2 i)``; JSON-serializable scale function."""

    coeffs: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        r2 = np.sum(X * X, axis=1)
        return np.polynomial.polynomial.polyval(r2, self.coeffs)

    def to_dict(self):
        return {"coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class VarianceScaled(Kernel):
    """``sigma(s) * sigma(t) * base(s, t)`` with ``lower <= sigma <= upper``.

    ``sigma`` is vectorized: it maps an ``(n, d)`` array to ``n`` values.
    """

    base: Kernel
    sigma: Callable[[np.ndarray], np.ndarray]
    lower: float
    upper: float

    def __post_init__(self):
        _check_positive("lower bound", self.lower)
        _check_positive("upper bound", self.upper)
        if self.lower > self.upper:
            raise ValueError("lower bound exceeds upper bound")

    @property
    def dimension(self) -> int:
        return self.base.dimension

    @property
    def holder_exponent(self) -> float:
        return self.base.holder_exponent

    def _sigma(self, A):
        return np.asarray(self.sigma(A), dtype=float).reshape(A.shape[0])

    def _gram(self, A, B):
        return (self._sigma(A)[:, None] * self._sigma(B)[None, :]) * self.base._gram(A, B)

    def diag(self, A):
        A = as_points(A, self.dimension)
        return self._sigma(A) ** 2 * self.base.diag(A)

    def bounds_hold(self, points) -> bool:
        """Check the declared bounds on ``sigma`` at the given points."""
        s = self._sigma(as_points(points, self.dimension))
        return bool(np.all((s >= self.lower) & (s <= self.upper)))

    def to_dict(self):
        if not hasattr(self.sigma, "to_dict"):
            raise TypeError("only RadialPolynomial scale functions are serializable")
        return {
            "family": "variance_scaled",
            "params": {
                "base": self.base.to_dict(),
                "sigma": self.sigma.to_dict(),
                "lower": self.lower,
                "upper": self.upper,
            },
        }


@dataclass(frozen=True)
class Sum(Kernel):
    left: Kernel
    right: Kernel

    def __post_init__(self):
        if self.left.dimension != self.right.dimension:
            raise ValueError("summands must share an input dimension")

    @property
    def dimension(self) -> int:
        return self.left.dimension

    @property
    def holder_exponent(self) -> float:
        return min(self.left.holder_exponent, self.right.holder_exponent)

    def _gram(self, A, B):
        return self.left._gram(A, B) + self.right._gram(A, B)

    def diag(self, A):
        return self.left.diag(A) + self.right.diag(A)

    def to_dict(self):
        return {
            "family": "sum",
            "params": {"left": self.left.to_dict(), "right": self.right.to_dict()},
        }


def eval_kernel(kernel: Kernel, s, t) -> float:
    return kernel(s, t)


def gram(kernel: Kernel, A, B=None) -> np.ndarray:
    return kernel.gram(A, B)


def scale_variance(base: Kernel, sigma, lower: float, upper: float) -> VarianceScaled:
    """Non-stationary kernel ``sigma(s) sigma(t) base(s, t)``.

    Scaling a universal kernel by a continuous ``sigma`` bounded away from
    zero and infinity keeps it universal.

    Parameters
    ----------
    base : Kernel
    sigma : callable or RadialPolynomial
        Vectorized positive scale function.
    lower, upper : float
        Declared bounds ``0 < lower <= sigma <= upper``; recorded, and
        checkable with :meth:`VarianceScaled.bounds_hold`.
    """
    return VarianceScaled(base, sigma, float(lower), float(upper))


def kernel_from_dict(spec: dict) -> Kernel:
    """Inverse of ``Kernel.to_dict``."""
    try:
        family = spec["family"]
        params = dict(spec.get("params", {}))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed kernel spec: {spec!r}") from exc
    if family == "squared_exponential":
        return SquaredExponential(**params)
    if family == "matern":
        return Matern(**params)
    if family == "powered_exponential":
        return PoweredExponential(**params)
    if family == "variance_scaled":
        return VarianceScaled(
            kernel_from_dict(params["base"]),
            RadialPolynomial(**params["sigma"]),
            params["lower"],
            params["upper"],
        )
    if family == "sum":
        return Sum(kernel_from_dict(params["left"]), kernel_from_dict(params["right"]))
    raise ValueError(f"unknown kernel family {family!r}")
