"""Reproducing-property checks and small verification probes.

For ``f`` in the RKHS, ``<f, k_t> = f(t)`` at every ``t``. Evaluating the
left side with an approximate form and comparing to ``f(t)`` measures how
well the form approximates the true inner product.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy import linalg
from scipy.interpolate import BarycentricInterpolator

from .kernels import Kernel, as_points
from .spectral import RkhsForm

__all__ = [
    "ReproducingReport",
    "reproduce_check",
    "interpolant_build",
    "psd_probe",
    "write_reports_csv",
]


@dataclass
class ReproducingReport:
    backend: str
    n: int
    errors: np.ndarray
    test_points: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        return float(np.max(self.errors)) if self.errors.size else 0.0


def reproduce_check(form: RkhsForm, f: Callable, test_points, n: int | None = None) -> ReproducingReport:
    """Per-point error ``|form(f|nodes, k_t|nodes) - f(t)|`` over ``test_points``.

    ``n`` labels the report (basis or node count); it defaults to the form's
    retained eigenpair count or node count.
    """
    P = as_points(test_points, form.kernel.dimension)
    fw = form.whiten(np.asarray(f(form.nodes), dtype=float).reshape(-1))
    reproduced = fw @ form.whiten(form.sections(P))
    errors = np.abs(reproduced - np.asarray(f(P), dtype=float).reshape(-1))
    if n is None:
        n = getattr(form, "n", len(form))
    return ReproducingReport(form.backend, int(n), errors, P)


def interpolant_build(points: Iterable, basis: str = "kernel_sections", kernel: Kernel | None = None) -> Callable:
    """Interpolant through ``(x_j, y_j)`` pairs.

    ``basis="kernel_sections"`` returns ``sum_j c_j k(., x_j)`` with
    ``k(x, x) c = y``, an element of the RKHS. ``basis="polynomial"``
    returns the degree ``J - 1`` polynomial through the data, evaluated in
    barycentric form. Nodes are scalars (one-dimensional domain).
    """
    pts = list(points)
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    if np.unique(x).size != x.size:
        raise ValueError("interpolation nodes must be distinct")
    if basis == "polynomial":
        # fixed rng: scipy permutes nodes at random when forming the weights
        interp = BarycentricInterpolator(x, y, rng=0)
        return lambda s: np.asarray(interp(np.asarray(s, dtype=float).reshape(-1)), dtype=float)
    if basis != "kernel_sections":
        raise ValueError(f"unknown basis {basis!r}")
    if kernel is None:
        raise ValueError("kernel_sections basis needs a kernel")
    G = kernel.gram(x)
    try:
        c = linalg.solve(G, y, assume_a="pos")
    except (linalg.LinAlgError, ValueError) as exc:
        raise ValueError(f"kernel interpolation system is singular: {exc}") from exc
    if np.max(np.abs(G @ c - y)) > 1e-8 * max(1.0, np.max(np.abs(y))):
        raise ValueError("kernel interpolation system too ill-conditioned to interpolate")
    return lambda s: kernel.gram(np.asarray(s, dtype=float).reshape(-1), x) @ c


def psd_probe(cov: Callable, points) -> float:
    """Smallest eigenvalue of the symmetrized Gram ``cov(points, points)``."""
    C = np.asarray(cov(points, points), dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (C + C.T))[0])


def write_reports_csv(rows: Iterable[dict], fh, columns: list[str]) -> None:
    w = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v) for k, v in row.items()})
