import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_model
from hitchin_sov.diffper import curve_samples
from hitchin_sov.errors import NonGeneric
from hitchin_sov.product import (
    MPoly,
    QComplex,
    build_product,
    factorization_identity,
    product_branch_count,
    product_differentials_match,
    product_genus,
)


@pytest.mark.parametrize("g", [2, 3, 4, 5])
def test_counts_and_genus(g):
    m, H = make_model("A1", g, 10 + g)
    pc = build_product(m, H)
    c = product_branch_count(pc)
    assert c.spectral == 4 * g - 4
    assert c.base == 2 * g + 2
    assert c.total % 2 == 0
    # the genus equals the number of Hamiltonians, dim sl(2) (g - 1)
    assert product_genus(pc, c) == m.N == 3 * (g - 1)
    json.dumps(c.to_json())
    json.dumps(pc.to_json())


def test_pole_orders_genus_two(a1):
    m, H = a1
    pc = build_product(m, H)
    assert pc.pole_orders() == (4, 3)
    # a has degree 2(g-1) in x and b is empty at genus 2
    assert pc.a.degree <= 2 * (m.g - 1)


@given(st.integers(0, 2**31), st.integers(2, 4))
def test_differentials_agree(seed, g):
    m, H = make_model("A1", g, seed)
    pc = build_product(m, H)
    x, y, lam = curve_samples(m, H, np.random.default_rng(seed), 10)
    rep = product_differentials_match(pc, m, H, x, y, lam)
    assert rep.max_relative_deviation < 1e-12
    assert rep.max_equation_residual < 1e-12
    assert rep.sigma_odd


@pytest.mark.parametrize("g", [2, 4])
def test_factorization_is_exact(g):
    m, H = make_model("A1", g, 3)
    lhs, rhs = factorization_identity(build_product(m, H))
    assert lhs == rhs
    assert lhs.max_abs() > 0


def test_mpoly_arithmetic():
    a = MPoly.monomial(0, 1, 0, 2.0) + MPoly.monomial(1, 0, 0, 1j)
    sq = a * a
    assert sq.terms[(0, 2, 0)] == QComplex.of(4.0)
    assert sq.terms[(2, 0, 0)] == QComplex.of(-1.0)
    assert (a - a).terms == {}
    # 0.1 is not exact in binary, but the arithmetic on it is
    t = MPoly.monomial(c=0.1)
    assert (t * t - t * t).terms == {}


def test_rejects_zero_and_other_types(c2):
    m, H = make_model("A1", 2, 1)
    with pytest.raises(NonGeneric):
        build_product(m, np.zeros(m.N))
    mc, Hc = c2
    with pytest.raises(ValueError):
        build_product(mc, Hc)
