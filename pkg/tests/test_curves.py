import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hitchin_sov.algebra import CPoly
from hitchin_sov.curves import (
    BaseCurve,
    CurveFunction,
    base_curve_new,
    monomial_basis,
    parse_complex_list,
    random_base_curve,
)
from hitchin_sov.errors import NotSquarefree, SchemaError


@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_json_round_trip(g, seed):
    c = random_base_curve(g, np.random.default_rng(seed))
    back = BaseCurve.from_json(c.to_json())
    assert np.array_equal(back.p.coeffs, c.p.coeffs)
    assert back.genus == g


def test_roots_satisfy_P(rng):
    c = random_base_curve(3, rng)
    assert len(c.roots) == 7
    assert np.abs(c.P(c.roots)).max() < 1e-12


def test_factored_and_expanded_P_agree(rng):
    c = random_base_curve(2, rng)
    x = rng.normal(size=10) + 1j * rng.normal(size=10)
    assert np.allclose(c.P_factored(x), c.P(x), rtol=1e-12)


def test_lift_sheets():
    c = base_curve_new([1, 0, 0, 0, 0], 2)
    p0, p1 = c.lift(0.5, 0), c.lift(0.5, 1)
    assert p0.y == -p1.y
    assert abs(p0.y**2 - c.P(0.5)) < 1e-14


def test_branch_points_include_infinity(rng):
    pts = random_base_curve(2, rng).branch_points()
    assert len(pts) == 6 and pts[-1].at_infinity


def test_near_infinity_chart_lies_on_curve(rng):
    c = random_base_curve(2, rng)
    z = np.array([0.1, 0.05j, 0.02 + 0.01j])
    x, y = c.near_infinity(z)
    assert np.allclose(y**2, c.P(x), rtol=1e-12)


def test_near_infinity_is_continuous(rng):
    c = random_base_curve(2, rng)
    z = 0.05 * np.exp(1j * np.linspace(0, 0.2, 20))
    _, y = c.near_infinity(z)
    w = y * z**5
    assert np.abs(np.diff(w)).max() < 0.05


def test_singular_curve_rejected():
    p = CPoly.from_roots([0, 0, 1, 2, 3])
    with pytest.raises(NotSquarefree):
        base_curve_new(p.coeffs[:-1], 2)


def test_wrong_coefficient_count():
    with pytest.raises(ValueError):
        base_curve_new([1, 2, 3], 2)


@pytest.mark.parametrize(
    "data, path",
    [
        ({"coeffs": []}, "base"),
        ({"genus": "2", "coeffs": []}, "base.genus"),
        ({"genus": 2, "coeffs": [[1, 0]] * 4}, "base.coeffs"),
        ({"genus": 2, "coeffs": [[1, 0], [0, 0], [1], [0, 0], [0, 0]]}, "base.coeffs[2]"),
    ],
)
def test_schema_errors_name_the_field(data, path):
    with pytest.raises(SchemaError) as exc:
        BaseCurve.from_json(data)
    assert exc.value.path == path


def test_parse_rejects_non_finite():
    with pytest.raises(SchemaError):
        parse_complex_list([[float("nan"), 0]], "v")


@pytest.mark.parametrize("d, g, n0, n1", [(2, 2, 3, 0), (4, 2, 5, 2), (2, 3, 5, 1), (3, 4, 10, 5)])
def test_monomial_counts(d, g, n0, n1):
    b = monomial_basis(d, g)
    assert (len(b.family0), len(b.family1)) == (n0, n1)
    # total matches the dimension of the space of degree-d differentials
    assert len(b) == (2 * d - 1) * (g - 1)


def test_curve_function_product_and_norm(rng):
    c = random_base_curve(2, rng)
    f = CurveFunction(CPoly([1, 2]), CPoly([0.5j]), c.p)
    h = CurveFunction(CPoly([0, 1]), CPoly([1.0]), c.p)
    x = 0.3 + 0.7j
    y = np.sqrt(c.P(x))
    assert np.isclose((f * h)(x, y), f(x, y) * h(x, y))
    assert np.isclose(f.norm()(x), f(x, y) * f(x, -y))


def test_curve_function_derivative(rng):
    c = random_base_curve(2, rng)
    f = CurveFunction(CPoly([1, 2, 1j]), CPoly([0.5, 1]), c.p)
    x, dx = 0.4 + 0.2j, 1e-6
    y0 = np.sqrt(c.P(x))
    y1 = np.sqrt(c.P(x + dx))
    y1 = y1 if abs(y1 - y0) < abs(y1 + y0) else -y1
    fd = (f(x + dx, y1) - f(x, y0)) / dx
    assert abs(fd - f.deriv(x, y0)) < 1e-5


def test_zeros_lie_on_curve(rng):
    c = random_base_curve(2, rng)
    for f in (CurveFunction(CPoly([1, 2, 3]), CPoly([0.0]), c.p), CurveFunction(CPoly([1, 0, 1, 1]), CPoly([2.0]), c.p)):
        pts = f.zeros()
        assert len(pts) == (4 if not f.has_y else f.norm().degree)
        for x, y in pts:
            assert abs(y * y - c.P(x)) < 1e-10
            assert abs(f(x, y)) < 1e-9
