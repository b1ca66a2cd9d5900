"""Gaussian processes conditioned on function values over curves and boundaries."""

from ._linalg import NumericalError
from .conditioning import GP, ConstrainedGP, PredictiveGP, constrain, finite_condition, posterior, sample_paths
from .domain import FinitePoints, ParameterizedPath, diagonal, latin_hypercube, quadrature, rect_boundary, segment
from .kernels import Matern, PoweredExponential, SquaredExponential, Sum, VarianceScaled, scale_variance
from .spectral import FormSpec, build_form, inner_coeffs, interpolation_form, nystrom_eig, rkhs_inner, spectral_form

__version__ = "0.1.0"
