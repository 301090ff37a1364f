import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hitchin_sov.algebra import (
    CPoly,
    aberth_batch,
    cluster_multiplicities,
    match_roots,
    min_root_separation,
    poly_roots,
    relative_residual,
    solve_cramer,
    solve_dense,
    solve_quartic_radicals,
)
from hitchin_sov.errors import NonConvergence, SingularMatrix, ZeroPolynomial

complexes = st.complex_numbers(max_magnitude=3.0, allow_nan=False, allow_infinity=False)


def test_trailing_zeros_are_trimmed():
    p = CPoly([1, 2, 0, 0])
    assert p.degree == 1
    assert CPoly([0, 0]).is_zero


def test_arithmetic_matches_numpy():
    p, q = CPoly([1, 2j, 3]), CPoly([-1, 1])
    x = np.array([0.3 + 0.1j, -2.0, 1j])
    assert np.allclose((p * q)(x), p(x) * q(x))
    assert np.allclose((p + q)(x), p(x) + q(x))
    assert np.allclose((p - q)(x), p(x) - q(x))
    assert np.allclose(p.derivative()(x), 2j + 6 * x)


def test_horner_against_polyval():
    c = np.array([1 - 1j, 0.5, 2j, -3])
    x = np.linspace(-2, 2, 7) + 0.3j
    assert np.allclose(CPoly(c)(x), np.polyval(c[::-1], x))


@given(st.lists(complexes, min_size=1, max_size=9))
def test_roots_of_product_of_linear_factors(roots):
    roots = np.array(roots)
    if min_root_separation(roots) < 1e-2:
        return
    found = poly_roots(CPoly.from_roots(roots)).roots
    assert match_roots(found, roots) < 1e-7 * max(1.0, np.abs(roots).max())


def test_roots_against_numpy_oracle(rng):
    for deg in (3, 6, 12, 20):
        c = rng.normal(size=deg + 1) + 1j * rng.normal(size=deg + 1)
        ours = poly_roots(CPoly(c)).roots
        ref = np.roots(c[::-1])
        assert match_roots(ours, ref) < 1e-8


def test_zero_roots_split_off():
    r = poly_roots(CPoly([0, 0, 2, 1])).roots
    assert match_roots(r, [0, 0, -2]) < 1e-12


def test_batch_iteration_converges(rng):
    c = rng.normal(size=(5, 7)) + 1j * rng.normal(size=(5, 7))
    z, _ = aberth_batch(c)
    for row, zr in zip(c, z):
        assert relative_residual(row, zr).max() < 1e-12


def test_zero_polynomial_raises():
    with pytest.raises(ZeroPolynomial):
        poly_roots(CPoly([0.0]))


def test_residual_failure_is_reported():
    with pytest.raises(NonConvergence):
        poly_roots(CPoly([1, -3, 3, -1]), tol=1e-30)


def test_multiplicity_clusters():
    m = cluster_multiplicities(np.array([1.0, 1.0 + 1e-9, 2.0, 3.0, 3.0, 3.0]))
    assert list(m) == [2, 2, 1, 3, 3, 3]


def test_double_root_flagged():
    r = poly_roots(CPoly.from_roots([1.0, 1.0, -2.0]), cluster_radius=1e-6)
    assert r.has_multiple


def test_dense_solve_and_cramer_agree(rng):
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    b = rng.normal(size=6) + 0j
    sol = solve_dense(a, b)
    assert np.allclose(a @ sol.x, b)
    assert np.allclose(solve_cramer(a, b), sol.x)
    assert sol.residual < 1e-14
    assert sol.condition >= 1.0


def test_singular_matrix_detected():
    a = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularMatrix):
        solve_dense(a, np.ones(2))
    with pytest.raises(SingularMatrix):
        solve_cramer(np.zeros((2, 2)), np.ones(2))


def test_shape_mismatch():
    with pytest.raises(ValueError):
        solve_dense(np.eye(3), np.ones(2))


@given(st.lists(complexes, min_size=4, max_size=4), complexes.filter(lambda z: abs(z) > 0.1))
def test_quartic_radicals_recover_roots(roots, lead):
    c = CPoly.from_roots(roots, leading=lead).coeffs
    found = solve_quartic_radicals(c[4], c[3], c[2], c[1], c[0])
    # clustered roots are only determined to about eps^(1/m)
    tol = 1e-6 if min_root_separation(roots) > 1e-2 else 1e-3
    assert match_roots(found, roots) < tol * max(1.0, np.abs(roots).max())


def test_quartic_biquadratic_branch():
    found = solve_quartic_radicals(1, 0, -5, 0, 4)
    assert match_roots(found, [1, -1, 2, -2]) < 1e-12


def test_quartic_needs_leading_term():
    with pytest.raises(ValueError):
        solve_quartic_radicals(0, 1, 1, 1, 1)


def test_dense_solve_badly_scaled_rows(rng):
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    b = rng.normal(size=5) + 0j
    scale = np.array([1e14, 1.0, 1e-9, 1.0, 1e6])
    sol = solve_dense(a * scale[:, None], b * scale)
    assert np.allclose(sol.x, np.linalg.solve(a, b), rtol=1e-10)
    assert sol.condition < 1e4
    sol = solve_dense(a * scale[None, :], b)
    assert np.allclose(sol.x * scale, np.linalg.solve(a, b), rtol=1e-10)


def test_dense_solve_graded_column_needs_columns_first(rng):
    # a graded row of m is a graded column of m.T; scaling rows first hides it
    a = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    a[0] *= np.array([1e20, 1e15, 1e10, 1e5, 1.0])
    b = rng.normal(size=5) + 0j
    sol = solve_dense(a.T, b)
    assert sol.condition < 1e4
    assert np.allclose(a.T @ sol.x, b, rtol=1e-10, atol=0)
