import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_model
from hitchin_sov.errors import NonConvergence, SchemaError, SingularMatrix
from hitchin_sov.sov import (
    SeparatingDivisor,
    divisor_residual,
    sample_divisor,
    same_up_to_q_sign,
    separation_matrix,
    solve_hamiltonians,
    solve_hamiltonians_dl_numeric,
    solve_hamiltonians_so4,
    so4_elimination,
)

seeds = st.integers(0, 2**31)


@given(st.sampled_from(["A1", "B2", "C2"]), seeds, seeds)
def test_round_trip_linear_types(lie, s1, s2):
    m, H = make_model(lie, 2, s1)
    d = sample_divisor(m, H, seed=s2)
    rep = solve_hamiltonians(m, d)
    assert np.linalg.norm(rep.H - H) / np.linalg.norm(H) < 1e-8
    assert rep.residual < 1e-10


@given(seeds, seeds)
def test_round_trip_higher_genus(s1, s2):
    m, H = make_model("C2", 3, s1)
    rep = solve_hamiltonians(m, sample_divisor(m, H, seed=s2))
    assert np.linalg.norm(rep.H - H) / np.linalg.norm(H) < 1e-7


def test_sample_points_lie_on_the_curve(c2):
    m, H = c2
    d = sample_divisor(m, H, seed=3)
    assert len(d) == m.N
    assert divisor_residual(m, H, d) < 1e-12
    assert np.allclose(d.y**2, m.base.P(d.x))


def test_sampling_is_deterministic(a1):
    m, H = a1
    a, b = sample_divisor(m, H, seed=11), sample_divisor(m, H, seed=11)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.lam, b.lam)


@given(st.permutations(list(range(10))))
def test_solution_ignores_point_order(perm):
    m, H = make_model("C2", 2, 4)
    d = sample_divisor(m, H, seed=1)
    H1 = solve_hamiltonians(m, d).H
    H2 = solve_hamiltonians(m, d.permuted(perm)).H
    assert np.allclose(H1, H2, rtol=1e-9, atol=1e-12)


def test_cramer_cross_check(a1):
    m, H = a1
    d = sample_divisor(m, H, seed=2)
    lu = solve_hamiltonians(m, d, "linear").H
    cr = solve_hamiltonians(m, d, "cramer").H
    assert np.allclose(lu, cr, rtol=1e-10)


def test_repeated_point_is_singular(a1):
    m, H = a1
    d = sample_divisor(m, H, seed=2)
    d.x[1], d.y[1], d.lam[1] = d.x[0], d.y[0], d.lam[0]
    with pytest.raises(SingularMatrix):
        solve_hamiltonians(m, d)


def test_separation_matrix_shape(c2):
    m, H = c2
    M, rhs = separation_matrix(m, sample_divisor(m, H, seed=0))
    assert M.shape == (10, 10) and rhs.shape == (10,)
    with pytest.raises(ValueError):
        separation_matrix(*make_model("D2", 2, 0)[:1], sample_divisor(*make_model("D2", 2, 0), seed=0))


@given(seeds, seeds)
def test_so4_radicals_contain_true_H(s1, s2):
    m, H = make_model("D2", 2, s1)
    d = sample_divisor(m, H, seed=s2)
    rep = solve_hamiltonians_so4(m, d)
    assert 1 <= len(rep.candidates) <= 4
    best = min(same_up_to_q_sign(m, c, H) for c in rep.candidates)
    assert best < 1e-8
    assert all(r < 1e-8 for r in rep.residuals)


def test_so4_annihilators(d2):
    m, H = d2
    d = sample_divisor(m, H, seed=6)
    el = so4_elimination(d)
    V = np.stack([d.lam**2 * d.x**k for k in range(3)])
    assert np.abs(el.annihilators @ V.T).max() < 1e-12
    # the true Pfaffian coefficients satisfy the reduced quadrics
    h = H[3:]
    vals = [h @ el.quadrics[j] @ h + el.constants[j] for j in range(3)]
    assert np.abs(vals).max() < 1e-10 * max(1, np.abs(el.constants).max())


def test_newton_agrees_with_radicals(d2, rng):
    m, H = d2
    d = sample_divisor(m, H, seed=8)
    rad = solve_hamiltonians_so4(m, d)
    init = H * (1 + 1e-3 * rng.normal(size=m.N))
    newton = solve_hamiltonians_dl_numeric(m, d, init)
    assert min(same_up_to_q_sign(m, newton.H, c) for c in rad.candidates) < 1e-7
    assert solve_hamiltonians(m, d, "newton").residual < 1e-9


def test_q_sign_is_a_symmetry(d2):
    m, H = d2
    H2 = H.copy()
    H2[3:] *= -1
    assert same_up_to_q_sign(m, H, H2) == 0.0
    d = sample_divisor(m, H, seed=1)
    assert divisor_residual(m, H2, d) < 1e-12


def test_newton_failure_reports_trace(d2):
    m, H = d2
    d = sample_divisor(m, H, seed=1)
    with pytest.raises(NonConvergence) as exc:
        solve_hamiltonians_dl_numeric(m, d, H + 50, max_iter=2)
    assert len(exc.value.trace) >= 1


def test_divisor_json_round_trip(a1):
    m, H = a1
    d = sample_divisor(m, H, seed=4)
    back = SeparatingDivisor.from_json(d.to_json())
    assert np.array_equal(back.x, d.x) and np.array_equal(back.lam, d.lam)


@pytest.mark.parametrize(
    "data, path",
    [
        ({}, "divisor"),
        ({"points": {}}, "divisor.points"),
        ({"points": [3]}, "divisor.points[0]"),
        ({"points": [{"x": [0, 0], "y": [0, 0]}]}, "divisor.points[0]"),
        ({"points": [{"x": [0, 0], "y": [0, 0], "lambda": [0]}]}, "divisor.points[0].lambda"),
    ],
)
def test_divisor_schema_paths(data, path):
    with pytest.raises(SchemaError) as exc:
        SeparatingDivisor.from_json(data)
    assert exc.value.path == path


def test_unknown_method(a1):
    m, H = a1
    with pytest.raises(ValueError):
        solve_hamiltonians(m, sample_divisor(m, H, seed=0), method="magic")
