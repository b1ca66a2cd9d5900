import io

import numpy as np
import pytest
from scipy import linalg

from gpb import spectral
from gpb._linalg import NumericalError
from gpb.domain import FinitePoints, diagonal, quadrature, rect_boundary, segment
from gpb.kernels import Matern, SquaredExponential
from gpb.spectral import (
    FormSpec,
    build_form,
    inner_coeffs,
    interpolation_form,
    nystrom_eig,
    rkhs_inner,
    spectral_form,
    sum_kernel_form,
    write_eigen_csv,
)

BOX = ((-1.0, -1.0), (1.0, 1.0))
SE2 = SquaredExponential(1.0, 2)


@pytest.fixture(scope="module")
def diag_basis():
    return nystrom_eig(SE2, quadrature(diagonal(*BOX), 64))


def sections(form, S):
    return form.sections(np.atleast_2d(S))


def test_single_point_basis():
    basis = nystrom_eig(SquaredExponential(), quadrature(FinitePoints([[0.0]]), 1))
    assert len(basis) == 1
    assert basis.eigenvalues[0] == pytest.approx(1.0)
    assert abs(basis.eigenfunction_values[0, 0]) == pytest.approx(1.0)


def test_leading_eigenvalue_refinement(diag_basis):
    fine = nystrom_eig(SE2, quadrature(diagonal(*BOX), 128))
    assert abs(fine.eigenvalues[0] - diag_basis.eigenvalues[0]) <= 1e-4 * fine.eigenvalues[0]


def test_trace_identity(diag_basis):
    assert diag_basis.eigenvalues.sum() == pytest.approx(2 * np.sqrt(2), abs=1e-3)


def test_eigenfunctions_orthonormal(diag_basis):
    E, w = diag_basis.eigenfunction_values, diag_basis.quadrature.weights
    np.testing.assert_allclose(E.T @ (w[:, None] * E), np.eye(len(diag_basis)), atol=1e-8)


def test_eigenvalues_sorted_and_truncated(diag_basis):
    lam = diag_basis.eigenvalues
    assert np.all(np.diff(lam) <= 0)
    assert lam[-1] >= 1e-12 * lam[0]


def test_nystrom_extension_matches_nodes(diag_basis):
    np.testing.assert_allclose(
        diag_basis.extend(diag_basis.points)[:, :5], diag_basis.eigenfunction_values[:, :5], atol=1e-8
    )


def test_mercer_reconstruction():
    basis = nystrom_eig(Matern(0.5, 1.0, 2), quadrature(rect_boundary(*BOX), 32), 0.0)
    np.testing.assert_allclose(basis.mercer(), basis.kernel.gram(basis.points), atol=1e-10)


def test_eigensolve_failure(monkeypatch):
    def broken(*args, **kwargs):
        raise linalg.LinAlgError("no convergence")

    monkeypatch.setattr(spectral.linalg, "eigh", broken)
    with pytest.raises(NumericalError, match="eigensolve"):
        nystrom_eig(SE2, quadrature(diagonal(*BOX), 8))


def test_interpolation_inner_examples():
    form = interpolation_form(SquaredExponential(), [0.0], jitter=0.0)
    assert rkhs_inner(form, [1.0], [1.0]) == pytest.approx(1.0)
    np.testing.assert_allclose(inner_coeffs(form, [2.0]), [2.0])
    np.testing.assert_array_equal(inner_coeffs(form, [0.0]), [0.0])


def test_jitter_is_relative():
    form = interpolation_form(SquaredExponential(), [0.0])
    np.testing.assert_allclose(inner_coeffs(form, [2.0]), [2.0 / (1 + 1e-10)], rtol=1e-15)


def test_large_nugget_vanishes(diag_basis, rng):
    f, g = rng.standard_normal((2, 64))
    values = [abs(rkhs_inner(spectral_form(diag_basis, nugget=s2), f, g)) for s2 in (1e2, 1e4, 1e6)]
    assert values[2] < values[1] < values[0]
    assert values[2] < 1e-3


def test_spectral_matches_interpolation_on_sections(diag_basis):
    spec = spectral_form(diag_basis, min(40, len(diag_basis)))
    interp = interpolation_form(SE2, diag_basis.points)
    ks = sections(spec, [0.0, 0.0])[:, 0]
    assert rkhs_inner(spec, ks, ks) == pytest.approx(rkhs_inner(interp, ks, ks), abs=1e-4)


def test_spectral_interpolation_agree_on_section_pairs(diag_basis, rng):
    spec = spectral_form(diag_basis)
    interp = interpolation_form(SE2, diag_basis.points)
    S = rng.uniform(-1, 1, (10, 2))
    Ks = spec.sections(S)
    A = spec.whiten(Ks).T @ spec.whiten(Ks)
    B = interp.whiten(Ks).T @ interp.whiten(Ks)
    assert np.max(np.abs(A - B)) <= 1e-6


def test_coefficient_path(rng):
    basis = nystrom_eig(SE2, quadrature(diagonal(*BOX), 16))
    for form in (spectral_form(basis), interpolation_form(SE2, basis.points)):
        f, g = rng.standard_normal((2, 16))
        assert inner_coeffs(form, f) @ g == pytest.approx(rkhs_inner(form, f, g), rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("backend", ["interpolation", "spectral", "nugget", "sum_kernel"])
def test_symmetry_and_positivity(backend, rng):
    spec = FormSpec(backend=backend, n_nodes=32, nugget=1e-3 if backend == "nugget" else 0.0,
                    q=Matern(0.5, 1.0, 2) if backend == "sum_kernel" else None)
    form = build_form(SE2, rect_boundary(*BOX), spec)
    S = rng.uniform(-1, 1, (100, 2))
    F = form.sections(S)
    G = rng.standard_normal((32, 100))
    for i in range(100):
        a, b = F[:, i], G[:, i]
        assert abs(rkhs_inner(form, a, b) - rkhs_inner(form, b, a)) <= 1e-12 * (1 + abs(rkhs_inner(form, a, b)))
        assert rkhs_inner(form, b, b) >= -1e-10


def test_monotone_in_n(diag_basis, rng):
    S = rng.uniform(-1, 1, (20, 2))
    K = spectral_form(diag_basis).sections(S)
    prev = np.zeros(20)
    for n in range(1, len(diag_basis) + 1):
        W = spectral_form(diag_basis, n).whiten(K)
        cur = np.sum(W * W, axis=0)
        assert np.all(cur >= prev - 1e-12)
        prev = cur


def test_nugget_ordering(diag_basis, rng):
    K = spectral_form(diag_basis).sections(rng.uniform(-1, 1, (20, 2)))
    plain = np.sum(spectral_form(diag_basis).whiten(K) ** 2, axis=0)
    shifted = np.sum(spectral_form(diag_basis, nugget=1e-4).whiten(K) ** 2, axis=0)
    assert np.all(shifted <= plain + 1e-14)


def test_uniform_convergence(diag_basis):
    g = np.linspace(-1, 1, 20)
    P = np.stack(np.meshgrid(g, g), axis=-1).reshape(-1, 2)
    K = spectral_form(diag_basis).sections(P)

    def a(n):
        W = spectral_form(diag_basis, n).whiten(K)
        return W.T @ W

    full = a(len(diag_basis))
    gaps = [np.max(np.abs(a(n) - full)) for n in (2, 4, 8, 12)]
    assert all(b < a_ for a_, b in zip(gaps[:-1], gaps[1:]))


def test_length_mismatch(diag_basis):
    for form in (spectral_form(diag_basis), interpolation_form(SE2, diag_basis.points)):
        with pytest.raises(ValueError, match="64 nodes"):
            rkhs_inner(form, np.ones(3), np.ones(3))


def test_machine_floor_error():
    basis = nystrom_eig(SquaredExponential(), quadrature(segment(-1, 1), 64), truncation_threshold=0.0)
    with pytest.raises(NumericalError, match="truncation|nugget"):
        spectral_form(basis, len(basis))
    spectral_form(basis, len(basis), nugget=1e-6)


def test_n_out_of_range(diag_basis):
    with pytest.raises(ValueError):
        spectral_form(diag_basis, len(diag_basis) + 1)
    with pytest.raises(ValueError):
        spectral_form(diag_basis, 0)


def test_form_spec_validation_and_round_trip():
    with pytest.raises(ValueError):
        FormSpec(backend="magic")
    with pytest.raises(ValueError):
        FormSpec(backend="nugget", nugget=0.0)
    with pytest.raises(ValueError):
        FormSpec(backend="sum_kernel")
    spec = FormSpec(backend="sum_kernel", n_eig=10, q=Matern(1.5, 0.5, 2), rule="gauss_legendre")
    again = FormSpec.from_dict(spec.to_dict())
    assert again.to_dict() == spec.to_dict()


def test_clamp(diag_basis):
    spec = FormSpec(backend="spectral", n_nodes=64, n_eig=40, clamp=True)
    assert build_form(SE2, diagonal(*BOX), spec).n == len(diag_basis)
    with pytest.raises(ValueError):
        build_form(SE2, diagonal(*BOX), FormSpec(backend="spectral", n_nodes=64, n_eig=40))


def test_sum_kernel_finite_matches_matrix(rng):
    q = Matern(0.5, 1.0, 2)
    P = rng.uniform(-1, 1, (6, 2))
    form = sum_kernel_form(SE2, q, quadrature(FinitePoints(P), 6), truncation_threshold=0.0)
    f, g = rng.standard_normal((2, 6))
    expected = f @ np.linalg.solve(SE2.gram(P) + q.gram(P), g)
    assert rkhs_inner(form, f, g) == pytest.approx(expected, rel=1e-8)
    np.testing.assert_array_equal(form.sections(P), SE2.gram(P))


def test_eigen_csv():
    basis = nystrom_eig(SquaredExponential(), quadrature(segment(-1, 1), 8))
    buf = io.StringIO()
    write_eigen_csv(basis, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].split(",")[:3] == ["index", "eigenvalue", "node_0"]
    assert len(lines) == 1 + len(basis)
    assert len(lines[1].split(",")) == 2 + 8
