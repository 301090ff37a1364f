import numpy as np
import pytest
from scipy.integrate import quad

from hitchin_sov.algebra import CPoly
from hitchin_sov.curves import base_curve_new
from hitchin_sov.errors import TrackingLoss
from hitchin_sov.paths import Arc, HermitePath, Line, Ray, SheetPath, integrate, polyline, track
from hitchin_sov.spectral import SpectralModel


@pytest.fixture(scope="module")
def real_model():
    """sl(2) over y^2 = (x+2)(x+1)x(x-1)(x-2) with r = x^2 + 0.3i."""
    roots = [-2.0, -1.0, 0.0, 1.0, 2.0]
    m = SpectralModel("A1", base_curve_new(CPoly.from_roots(roots).coeffs[:-1], 2))
    H = np.array([0.3j, 0.0, 1.0])
    return m, H


def start(m, H, x, ysign=1, k=0):
    y = ysign * np.sqrt(complex(m.base.P(x)))
    return y, m.roots_lambda(H, x, y)[k]


def dx_over_y(x, y, lam):
    return np.stack([1 / y, x / y], axis=-1)


def poly_integrand(x, y, lam):
    return np.stack([x**2, np.exp(x)], axis=-1)


def test_exact_polynomial_integrals(real_model):
    m, H = real_model
    a, b = 0.5 + 0.5j, 1.5 + 1.0j
    path = SheetPath(polyline([a, 0.5 + 1.5j, b]), *start(m, H, a))
    q = integrate(m, H, path, poly_integrand)
    assert np.allclose(q.value, [(b**3 - a**3) / 3, np.exp(b) - np.exp(a)], rtol=1e-12)


def test_arc_and_hermite_segments(real_model):
    m, H = real_model
    c, r = 0.5 + 1.0j, 0.4
    arc = Arc(c, r, 0.0, 1.3)
    a, b = arc.start, arc.end
    q = integrate(m, H, SheetPath(arc, *start(m, H, a)), poly_integrand)
    assert np.allclose(q.value[0], (b**3 - a**3) / 3, rtol=1e-12)
    t = np.linspace(0, 1, 5)
    xs = 0.3 + 1j + 0.5 * t + 0.2j * t**2
    hp = HermitePath(t, xs, 0.5 + 0.4j * t)
    q = integrate(m, H, SheetPath(hp, *start(m, H, xs[0])), poly_integrand)
    assert np.allclose(q.value[0], (xs[-1] ** 3 - xs[0] ** 3) / 3, rtol=1e-12)


def test_real_ray_against_scipy(real_model):
    m, H = real_model
    a = 3.0
    ref0 = quad(lambda x: 1 / np.sqrt(np.prod([x + 2, x + 1, x, x - 1, x - 2])), a, np.inf, epsabs=0, epsrel=1e-13)[0]
    ref1 = quad(lambda x: x / np.sqrt(np.prod([x + 2, x + 1, x, x - 1, x - 2])), a, np.inf, epsabs=0, epsrel=1e-13)[0]
    q = integrate(m, H, SheetPath(Ray(a, 1.0), *start(m, H, a)), dx_over_y)
    assert np.allclose(q.value, [ref0, ref1], rtol=1e-9)


def test_square_root_endpoint_against_scipy(real_model):
    m, H = real_model
    # x = 2 + t^2 removes the endpoint singularity for the oracle
    ref = quad(lambda t: 2 / np.sqrt((4 + t * t) * (3 + t * t) * (2 + t * t) * (1 + t * t)), 0.0, 1.0, epsabs=0, epsrel=1e-13)[0]
    q = integrate(m, H, SheetPath(Line(3.0, 2.0), *start(m, H, 3.0)), dx_over_y)
    assert abs(-q.value[0] - ref) < 1e-8 * abs(ref)


def test_cauchy_loop_is_zero(real_model):
    m, H = real_model
    c = 0.5 + 1.2j
    circle = Arc(c, 0.3, 0.0, 2 * np.pi)
    q = integrate(m, H, SheetPath(circle, *start(m, H, circle.start)), dx_over_y)
    assert np.abs(q.value).max() < 1e-12


def test_loop_around_cut_equals_twice_the_cut(real_model):
    """∮ around [-1, 0] versus a trapezoid rule on the same circle."""
    m, H = real_model
    c, r = -0.5, 0.5 + 0.15
    circle = Arc(c, r, 0.0, 2 * np.pi)
    y0, l0 = start(m, H, circle.start)
    q = integrate(m, H, SheetPath(circle, y0, l0), dx_over_y)
    # trapezoid oracle with y continued by nearest choice
    th = np.linspace(0, 2 * np.pi, 4001)[:-1]
    xs = c + r * np.exp(1j * th)
    ys = np.empty_like(xs)
    prev = y0
    for i, x in enumerate(xs):
        v = np.sqrt(complex(m.base.P(x)))
        ys[i] = prev = v if abs(v - prev) < abs(v + prev) else -v
    dx = 1j * r * np.exp(1j * th) * (2 * np.pi / len(th))
    ref = np.array([np.sum(dx / ys), np.sum(xs * dx / ys)])
    assert np.allclose(q.value, ref, rtol=1e-10)
    # the cut integral, doubled, gives the same cycle
    yc, lc = start(m, H, -0.5)
    half_b = integrate(m, H, SheetPath(Line(-0.5, 0.0), yc, lc), dx_over_y).value
    half_a = integrate(m, H, SheetPath(Line(-0.5, -1.0), yc, lc), dx_over_y).value
    assert np.allclose(np.abs(2 * (half_b - half_a)), np.abs(ref), rtol=1e-8)


def test_monodromy_around_a_base_branch_point(real_model):
    m, H = real_model
    circle = Arc(1.0, 0.3, np.pi, 3 * np.pi)
    y0, l0 = start(m, H, circle.start)
    _, y1, _ = track(m, H, SheetPath(circle, y0, l0)).end
    assert abs(y1 + y0) < 1e-10 * abs(y0)


def test_reversal_negates(real_model):
    m, H = real_model
    path = SheetPath(polyline([0.4 + 0.6j, -0.7 + 0.9j, -1.5 - 0.4j]), *start(m, H, 0.4 + 0.6j))
    q = integrate(m, H, path, dx_over_y)
    back = integrate(m, H, q.track.reversed_path(), dx_over_y)
    assert np.abs(q.value + back.value).max() < 1e-12


def test_concatenation_adds(real_model):
    m, H = real_model
    p1 = SheetPath(Line(0.4 + 0.6j, -0.7 + 0.9j), *start(m, H, 0.4 + 0.6j))
    t1 = track(m, H, p1)
    _, y, lam = t1.end
    p2 = SheetPath(Line(-0.7 + 0.9j, -1.5 - 0.4j), y, lam)
    total = integrate(m, H, p1.then(p2), dx_over_y).value
    parts = integrate(m, H, p1, dx_over_y).value + integrate(m, H, p2, dx_over_y).value
    assert np.allclose(total, parts, rtol=1e-11)


def test_start_off_curve_is_rejected(real_model):
    m, H = real_model
    with pytest.raises(TrackingLoss):
        track(m, H, SheetPath(Line(0.5j, 1 + 1j), 10.0, 0.0))


def test_ray_cannot_be_reversed():
    with pytest.raises(ValueError):
        Ray(1.0, 1.0).reversed()
