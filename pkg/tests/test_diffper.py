import json

import numpy as np
import pytest

from conftest import make_model
from hitchin_sov.diffper import (
    Cut,
    a1_named_cuts,
    angle_coordinates,
    base_differentials,
    curve_samples,
    cut_from_json,
    dR_dlam,
    differential_basis,
    holomorphy_probe,
    orbit_base,
    period_matrix,
    probe_targets,
    prym_map_so4,
    prym_path_identities,
    reintegrate_normalization,
)
from hitchin_sov.errors import SchemaError, SingularPeriodMatrix
from hitchin_sov.sov import sample_divisor
from hitchin_sov.spectral import SpectralModel


def fd_dR_dH(m, H, x, y, lam, h=1e-4):
    # R is at most quadratic in H, so central differences are exact up to rounding
    out = []
    for j in range(m.N):
        e = np.zeros(m.N, dtype=complex)
        e[j] = h
        out.append((m.eval_R(H + e, x, y, lam) - m.eval_R(H - e, x, y, lam)) / (2 * h))
    return np.stack(out, axis=-1)


def fd_dR_dlam(m, H, x, y, lam, h=1e-5):
    return (m.eval_R(H, x, y, lam + h) - m.eval_R(H, x, y, lam - h)) / (2 * h)


@pytest.mark.parametrize("lie", ["A1", "B2", "C2", "D2"])
def test_basis_matches_finite_differences(lie, rng):
    m, H = make_model(lie, 2, 3)
    x, y, lam = curve_samples(m, H, rng, 6)
    basis = differential_basis(m, H)
    assert len(basis) == m.N
    ref = fd_dR_dH(m, H, x, y, lam) / (fd_dR_dlam(m, H, x, y, lam) * y)[:, None]
    got = basis.values(x, y, lam)
    assert np.allclose(got, ref, rtol=1e-6, atol=0)


@pytest.mark.parametrize("lie", ["A1", "B2", "C2", "D2"])
def test_basis_is_odd_under_involution(lie, rng):
    m, H = make_model(lie, 2, 4)
    x, y, lam = curve_samples(m, H, rng, 8)
    v = differential_basis(m, H).values
    assert np.allclose(v(x, y, -lam), -v(x, y, lam), rtol=1e-12, atol=0)


def test_pfaffian_differential_has_factor_2q(d2, rng):
    m, H = d2
    basis = differential_basis(m, H)
    pf = [it.index for it in basis.items if it.pfaffian]
    assert pf and all("2q" in basis[j].descriptor() for j in pf)
    x, y, lam = curve_samples(m, H, rng, 4)
    num = basis.values(x, y, lam) * (dR_dlam(m, H, x, y, lam) * y)[:, None]
    assert np.allclose(num, fd_dR_dH(m, H, x, y, lam), rtol=1e-7)


def test_dlam_chart_agrees_with_dx_chart(c2, rng):
    m, H = c2
    x, y, lam = curve_samples(m, H, rng, 5)
    b = differential_basis(m, H)
    d = m.partials(H, x, y, lam)
    # dx = -(R'_λ / R'_x) dλ on the curve
    conv = b.values(x, y, lam) * (-d.dR_dlam / d.dR_dx)[:, None]
    assert np.allclose(conv, b.dlam_values(x, y, lam), rtol=1e-10)


def test_base_differentials_shape(a1):
    m, _ = a1
    x = np.array([0.3 + 0.1j, -0.2j])
    y = np.sqrt(m.base.P(x).astype(complex))
    w = base_differentials(m, x, y)
    assert w.shape == (2, m.g)
    assert np.allclose(w[:, 1], x / y)


@pytest.mark.parametrize("fixture", ["a1", "c2", "d2"])
def test_holomorphy_probes_bounded(fixture, request):
    m, H = request.getfixturevalue(fixture)
    reports = [holomorphy_probe(m, H, t) for t in probe_targets(m, H)]
    reports.append(holomorphy_probe(m, H, "infinity"))
    assert all(r.bounded for r in reports)
    # the dx chart is singular at branch points, so the probe can tell
    branch = [r for r in reports if r.kind == "branch"]
    assert branch and all(r.dx_growth.max() > 10 for r in branch)
    json.dumps([r.to_json() for r in reports])


def test_non_holomorphic_differential_detected(a1):
    m, H = a1
    # dx/(R'_λ y) times x^(d(g-1)+1) has a pole at infinity
    z = np.logspace(-1, -4, 7) * np.exp(0.7j)
    vals = []
    for zz in z:
        xx, yy = m.base.near_infinity(zz)
        lam = m.roots_lambda(H, xx, yy)[0]
        vals.append(xx**3 / (dR_dlam(m, H, xx, yy, lam) * yy) * (-2 * zz**-3))
    a = np.abs(vals)
    assert a.max() / a[0] > 2


def test_a1_period_matrices_both_choices(a1):
    m, H = a1
    for choice in ("three_vertical", "two_vertical_one_horizontal"):
        pd = period_matrix(m, H, choice)
        assert pd.identity_error < 1e-10
        back = reintegrate_normalization(pd)
        assert np.abs(back - np.eye(m.N)).max() < 1e-8
        assert np.allclose(pd.transformed_H(), pd.Ainv @ H)


def test_period_matrix_rejects_dependent_cuts(a1):
    m, H = a1
    cuts = a1_named_cuts(m, H, "three_vertical")
    with pytest.raises(SingularPeriodMatrix):
        period_matrix(m, H, [cuts[0], cuts[0], cuts[1]])
    with pytest.raises(SingularPeriodMatrix):
        period_matrix(m, H, cuts[:2])


def test_named_cuts_only_for_a1_genus_two(c2):
    m, H = c2
    with pytest.raises(ValueError):
        a1_named_cuts(m, H, "three_vertical")


def test_d2_auto_periods_reintegrate(d2):
    m, H = d2
    pd = period_matrix(m, H, "auto")
    assert np.abs(reintegrate_normalization(pd) - np.eye(m.N)).max() < 1e-8


def test_cut_json_round_trip(a1):
    m, H = a1
    cuts = a1_named_cuts(m, H, "two_vertical_one_horizontal")
    data = json.loads(json.dumps([c.to_json() for c in cuts]))
    again = [cut_from_json(c) for c in data]
    assert all(isinstance(c, Cut) for c in again)
    p1 = period_matrix(m, H, cuts)
    p2 = period_matrix(m, H, again)
    assert np.allclose(p1.Ainv, p2.Ainv, rtol=1e-12)


def test_cut_schema_errors_name_the_field(a1):
    m, H = a1
    data = a1_named_cuts(m, H, "three_vertical")[0].to_json()
    bad = dict(data, a=["x", 1])
    with pytest.raises(SchemaError, match=r"cuts\[2\]\.a"):
        cut_from_json(bad, "cuts[2]")


def test_angles_additive_over_points(c2):
    m, H = c2
    d = sample_divisor(m, H, seed=7)
    res = angle_coordinates(m, H, d)
    assert res.integrals.shape == (m.N, m.N)
    assert np.allclose(res.phi, res.integrals.sum(axis=0))
    # reusing the chosen paths reproduces the value
    again = angle_coordinates(m, H, d, base=res.base, paths=res.paths)
    assert np.allclose(again.phi, res.phi, rtol=1e-10)


def test_normalized_angles_are_linear_image(a1):
    m, H = a1
    d = sample_divisor(m, H, seed=3)
    pd = period_matrix(m, H, "three_vertical")
    raw = angle_coordinates(m, H, d)
    norm = angle_coordinates(m, H, d, base=raw.base, paths=raw.paths, normalization=pd)
    assert np.allclose(norm.phi, raw.phi @ pd.A, rtol=1e-9)


def test_angles_need_base_without_involution(rng):
    from hitchin_sov.curves import random_base_curve
    from hitchin_sov.sov import SeparatingDivisor

    m = SpectralModel("A2", random_base_curve(2, rng))
    H = rng.normal(size=m.N) + 0j
    d = SeparatingDivisor(np.zeros(m.N), np.ones(m.N), np.zeros(m.N))
    with pytest.raises(ValueError, match="base point"):
        angle_coordinates(m, H, d)


def test_prym_identities(d2, rng):
    m, H = d2
    out = prym_path_identities(m, H, rng, count=3)
    assert out["path_antisymmetry"] < 1e-9
    assert out["rho_closure"] < 1e-9


def test_prym_at_q1_is_half_rho(d2):
    m, H = d2
    ob = orbit_base(m, H)
    v = prym_map_so4(m, H, ob.Q1, ob.Q1, ob.Q2, ob.rho, None)
    assert np.allclose(v.eta, 0.5 * v.rho)
    with pytest.raises(ValueError):
        prym_map_so4(m, H, ob.Q1, ob.Q1, ob.Q1, ob.rho, None)
