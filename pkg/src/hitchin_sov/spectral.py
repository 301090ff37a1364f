"""Spectral curves R(x, y, λ; H) = 0 over a hyperelliptic base.

For the classical series the curve is

    λ^n + Σ_i r_i(x, y) λ^(n - d_i) = 0,

with each r_i expanded over the monomials of :func:`curves.monomial_basis`.
For D_l the top coefficient is the square of the Pfaffian q. For B_l the
factor λ is dropped and only the nontrivial component is used.

Every evaluator broadcasts over array-valued ``x``, ``y`` and ``lam``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import CPoly
from .curves import BaseCurve, CurveFunction, parse_complex, parse_complex_list  # noqa: F401
from .errors import (
    BranchPointDerivative,
    NonGeneric,
    ParityError,
    SchemaError,
    UnsupportedType,
    ZeroPolynomial,
)
from .liedata import LieType, classical_data, hamiltonian_layout

CLUSTER_TOL = 1e-6


@dataclass(frozen=True)
class SpectralPoint:
    x: complex
    y: complex
    lam: complex
    tag: str = ""


@dataclass(frozen=True)
class Partials:
    dR_dlam: np.ndarray
    dR_dx: np.ndarray
    dR_dH: np.ndarray


class SpectralModel:
    """Lie type, base curve and Hamiltonian layout of one Hitchin system."""

    def __init__(self, lie, base: BaseCurve):
        self.lie = LieType.parse(lie) if isinstance(lie, str) else lie
        self.base = base
        self.layout = hamiltonian_layout(self.lie, base.genus)
        self.data = classical_data(self.lie)
        # degree in λ of the component actually used
        self.n = self.data.n - 1 if self.lie.series == "B" else self.data.n
        self.powers = tuple(0 if b.pfaffian else self.n - b.degree for b in self.layout.blocks)

    def __repr__(self):
        return f"SpectralModel({self.lie}, genus={self.base.genus})"

    @property
    def N(self) -> int:
        return self.layout.N

    @property
    def g(self) -> int:
        return self.base.genus

    @property
    def is_even(self) -> bool:
        """True when R depends on λ only through λ^2, so λ -> -λ acts on it."""
        return self.n % 2 == 0 and all(e % 2 == 0 for e in self.powers)

    def check_H(self, H) -> np.ndarray:
        H = np.asarray(H, dtype=complex).ravel()
        if H.shape != (self.N,):
            raise ValueError(f"{self.lie} at genus {self.g} needs {self.N} Hamiltonians, got {H.size}")
        return H

    # --- invariants -----------------------------------------------------
    def invariants(self, H) -> list:
        """r_i as curve functions; for D the last entry is q, not q^2."""
        H = self.check_H(H)
        out = []
        for b in self.layout.blocks:
            h = H[b.slice]
            n0 = len(b.basis.family0)
            a = np.zeros(max(b.basis.family0) + 1, dtype=complex)
            a[list(b.basis.family0)] = h[:n0]
            if b.basis.family1:
                c = np.zeros(max(b.basis.family1) + 1, dtype=complex)
                c[list(b.basis.family1)] = h[n0:]
            else:
                c = np.zeros(1, dtype=complex)
            out.append(CurveFunction(CPoly(a), CPoly(c), self.base.p))
        return out

    def coefficient_functions(self, H) -> list:
        """Coefficients of λ^power in R as curve functions (q^2 for Pfaffians)."""
        out = []
        for b, r in zip(self.layout.blocks, self.invariants(H)):
            out.append(r * r if b.pfaffian else r)
        return out

    def monomials(self, x, y) -> np.ndarray:
        """Basis monomials of every block, shape (..., N)."""
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        cols = []
        for b in self.layout.blocks:
            cols += [x**k for k in b.basis.family0]
            cols += [y * x**s for s in b.basis.family1]
        return np.stack(np.broadcast_arrays(*cols), axis=-1)

    def lambda_coeffs(self, H, x, y) -> np.ndarray:
        """Ascending λ-coefficients of R at (x, y), shape (..., n+1)."""
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        shape = np.broadcast(x, y).shape
        c = np.zeros(shape + (self.n + 1,), dtype=complex)
        c[..., self.n] = 1.0
        for b, e, r in zip(self.layout.blocks, self.powers, self.invariants(H)):
            v = r(x, y)
            c[..., e] += v * v if b.pfaffian else v
        return c

    # --- evaluation -----------------------------------------------------
    def eval_R(self, H, x, y, lam):
        c = self.lambda_coeffs(H, x, y)
        lam = np.asarray(lam, dtype=complex)
        out = np.zeros(np.broadcast(c[..., 0], lam).shape, dtype=complex) + c[..., -1]
        for k in range(self.n - 1, -1, -1):
            out = out * lam + c[..., k]
        return out

    def R_scale(self, H, x, y, lam):
        """Sum of the magnitudes of all monomial terms of R; residuals are
        measured against this so that cancellation inside r_i is not hidden."""
        H = self.check_H(H)
        mon = np.abs(self.monomials(x, y)) * np.abs(H)
        lam = np.abs(np.asarray(lam, dtype=complex))
        out = lam**self.n
        for b, e in zip(self.layout.blocks, self.powers):
            t = np.sum(mon[..., b.slice], axis=-1)
            out = out + (t * t if b.pfaffian else t) * lam**e
        return out

    def relative_residual(self, H, x, y, lam):
        return np.abs(self.eval_R(H, x, y, lam)) / self.R_scale(H, x, y, lam)

    def partials(self, H, x, y, lam) -> Partials:
        H = self.check_H(H)
        x = np.asarray(x, dtype=complex)
        y = np.asarray(y, dtype=complex)
        lam = np.asarray(lam, dtype=complex)
        invs = self.invariants(H)
        if np.any(y == 0) and any(r.has_y for r in invs):
            raise BranchPointDerivative("dy/dx is singular at a base branch point")
        dlam = self.n * lam ** (self.n - 1)
        dx = np.zeros(np.broadcast(x, y, lam).shape, dtype=complex)
        for b, e, r in zip(self.layout.blocks, self.powers, invs):
            if e > 0:
                v = r(x, y)
                dlam = dlam + e * v * lam ** (e - 1)
            dv = r.deriv(x, y)
            if b.pfaffian:
                dx = dx + 2 * r(x, y) * dv * lam**e
            else:
                dx = dx + dv * lam**e
        return Partials(dlam, dx, self.dR_dH(H, x, y, lam))

    def dR_dH(self, H, x, y, lam) -> np.ndarray:
        """∂R/∂H_j, shape (..., N)."""
        x, y, lam = np.broadcast_arrays(*(np.asarray(v, dtype=complex) for v in (x, y, lam)))
        mon = self.monomials(x, y)
        out = np.empty_like(mon)
        for b, e, r in zip(self.layout.blocks, self.powers, self.invariants(H)):
            factor = 2 * r(x, y) if b.pfaffian else lam**e
            out[..., b.slice] = factor[..., None] * mon[..., b.slice]
        return out

    def roots_lambda(self, H, x, y) -> np.ndarray:
        from .algebra import poly_roots

        return poly_roots(CPoly(self.lambda_coeffs(H, x, y))).roots

    # --- serialisation ----------------------------------------------------
    def to_json(self, H=None) -> dict:
        out = {"lie": str(self.lie), "genus": self.g, "base": self.base.to_json()}
        if H is not None:
            out["H"] = [[h.real, h.imag] for h in self.check_H(H)]
        return out

    @classmethod
    def from_json(cls, data):
        if not isinstance(data, dict):
            raise SchemaError("expected an object", "model")
        for key in ("lie", "base"):
            if key not in data:
                raise SchemaError(f"missing field {key!r}", "model")
        lie = data["lie"]
        base = BaseCurve.from_json(data["base"], "model.base")
        if "genus" in data and int(data["genus"]) != base.genus:
            raise SchemaError("genus disagrees with base curve", "model.genus")
        model = cls(lie, base)
        H = None
        if "H" in data:
            H = parse_complex_list(data["H"], "model.H")
            if len(H) != model.N:
                raise SchemaError(f"expected {model.N} entries", "model.H")
        return model, H


def random_hamiltonians(model: SpectralModel, rng, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.normal(size=model.N) + 1j * rng.normal(size=model.N)) / np.sqrt(2)


# --- ramification ---------------------------------------------------------


def _require_quadratic_in_mu(m: SpectralModel):
    if not m.is_even or m.n > 4:
        raise UnsupportedType(
            f"branch points are implemented for curves quadratic in λ^2 (A1, B2, C2, D2, ...), not {m.lie}"
        )


def _zero_sets(m: SpectralModel, H):
    """Curve functions whose zeros carry the ramification, with their kind.

    Returns a list of ``(kind, function, lam_of)`` where ``lam_of(x, y)``
    gives the λ-values of the ramification points over a zero.
    """
    _require_quadratic_in_mu(m)
    blocks = m.layout.blocks
    invs = m.invariants(H)
    sets = []
    if m.n == 2:
        sets.append(("lambda0", invs[0], lambda x, y: [0j]))
        return sets
    c1 = invs[0]
    top = invs[1]
    half = CurveFunction(c1.a * 0.5, c1.b * 0.5, c1.p)

    def mu_pair(x, y):
        mu = -0.5 * c1(x, y)
        s = np.sqrt(complex(mu))
        return [s, -s]

    if blocks[1].pfaffian:
        sets.append(("singular", top, lambda x, y: [0j]))
        # c1^2 - 4 q^2 = (c1 - 2q)(c1 + 2q): λ^2 = -p/2 with q = ±p/2
        sets.append(("mu_double", half - top, mu_pair))
        sets.append(("mu_double", half + top, mu_pair))
    else:
        sets.append(("lambda0", top, lambda x, y: [0j]))
        sets.append(("mu_double", c1 * c1 - top * 4.0, mu_pair))
    return sets


def _collect(m, H, kinds):
    out = []
    for kind, fn, lam_of in _zero_sets(m, H):
        if kind not in kinds:
            continue
        try:
            zeros = fn.zeros()
        except ZeroPolynomial as exc:
            raise NonGeneric(f"a ramification resolvent vanishes identically ({kind})") from exc
        for x, y in zeros:
            for lam in lam_of(x, y):
                out.append(SpectralPoint(complex(x), complex(y), complex(lam), kind))
    return out


def branch_points(m: SpectralModel, H, tol: float = 1e-8, check: bool = True) -> list:
    """Finite smooth points with R = R'_λ = 0, over both base sheets."""
    H = m.check_H(H)
    if check:
        rep = genericity_check(m, H)
        if not rep.generic:
            raise NonGeneric("; ".join(rep.issues))
    pts = _collect(m, H, {"lambda0", "mu_double"})
    _verify(m, H, pts, tol)
    return pts


def singular_points(m: SpectralModel, H, tol: float = 1e-8, check: bool = True) -> list:
    """Nodes of the spectral curve: λ = 0 over zeros of the Pfaffian (series D)."""
    H = m.check_H(H)
    if not any(b.pfaffian for b in m.layout.blocks):
        return []
    if check:
        rep = genericity_check(m, H)
        if not rep.generic:
            raise NonGeneric("; ".join(rep.issues))
    pts = _collect(m, H, {"singular"})
    _verify(m, H, pts, tol)
    return pts


def _verify(m, H, pts, tol):
    for p in pts:
        scale = m.R_scale(H, p.x, p.y, p.lam)
        d = m.partials(H, p.x, p.y, p.lam)
        lam_scale = scale / max(abs(p.lam), 1.0)
        if abs(m.eval_R(H, p.x, p.y, p.lam)) > tol * scale or abs(d.dR_dlam) > tol * lam_scale:
            raise NonGeneric(f"ramification point failed verification at x={p.x:.6g}")


@dataclass
class GenericityReport:
    generic: bool
    issues: list
    min_separation: float

    def to_json(self):
        return {"generic": self.generic, "issues": list(self.issues), "min_separation": self.min_separation}


def genericity_check(m: SpectralModel, H, cluster_tol: float = CLUSTER_TOL) -> GenericityReport:
    """Look for multiple roots among the ramification resolvents.

    The zero sets of all resolvents, together with the base branch points,
    must be pairwise distinct as points (x, y) of the base curve; a collision
    means a multiple root or a ramification point lying over y = 0.
    """
    H = m.check_H(H)
    issues = []
    pts = [(complex(r), 0j, "base") for r in m.base.roots]
    for kind, fn, _ in _zero_sets(m, H):
        if fn.a.is_zero and fn.b.is_zero:
            issues.append(f"{kind} resolvent vanishes identically")
            continue
        try:
            for x, y in fn.zeros():
                pts.append((complex(x), complex(y), kind))
        except ZeroPolynomial:
            issues.append(f"{kind} resolvent vanishes identically")
        except Exception as exc:  # root finder failure on degenerate data
            issues.append(f"{kind} resolvent roots failed: {exc}")
    xs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    scale = max(1.0, float(np.max(np.abs(xs))) if len(xs) else 1.0)
    sep = np.inf
    if len(pts) > 1:
        d = np.maximum(np.abs(xs[:, None] - xs[None, :]), np.abs(ys[:, None] - ys[None, :]))
        d[np.diag_indices(len(pts))] = np.inf
        sep = float(d.min())
        if sep <= cluster_tol * scale:
            i, j = np.unravel_index(np.argmin(d), d.shape)
            issues.append(f"coincident ramification data ({pts[i][2]}/{pts[j][2]}) near x={xs[i]:.6g}")
    return GenericityReport(not issues, issues, sep)


def riemann_hurwitz_genus(n_sheets: int, g_base: int, nu: int) -> int:
    total = n_sheets * (2 * g_base - 2) + nu
    if total % 2:
        raise ParityError(f"n(2g-2) + ν = {total} is odd")
    return total // 2 + 1


def expected_counts(lie, g: int) -> dict:
    """Counts predicted from the discriminant degree for generic H.

    The discriminant of R in λ is a section of K^(n(n-1)), so it has
    n(n-1)(2g-2) zeros. For D_l the l(2g-2) zeros of the Pfaffian are nodes,
    each absorbing two of them; the genus is then that of the normalization.
    """
    t = LieType.parse(lie) if isinstance(lie, str) else lie
    layout = hamiltonian_layout(t, g)
    data = classical_data(t)
    n = data.n - 1 if t.series == "B" else data.n
    disc = n * (n - 1) * (2 * g - 2)
    singular = t.rank * (2 * g - 2) if t.series == "D" else 0
    branch = disc - 2 * singular
    return {
        "lie": str(t),
        "genus": g,
        "N": layout.N,
        "dim_g": data.dim_g,
        "n": n,
        "degrees": list(data.degrees),
        "branch_points": branch,
        "singular_points": singular,
        "spectral_genus": riemann_hurwitz_genus(n, g, branch),
    }


@dataclass(frozen=True)
class GluingSummary:
    sheets: int
    branch_points: int
    cuts: int
    independent_cuts: int
    per_sheet_cycles: int
    total_cycles: int

    def to_json(self):
        return dict(self.__dict__)


def gluing_summary(m: SpectralModel, H=None, nu: int | None = None) -> GluingSummary:
    if nu is None:
        nu = len(branch_points(m, H))
    if nu % 2:
        raise ParityError(f"odd number of branch points {nu}")
    cuts = nu // 2
    ind = cuts - m.n + 1
    return GluingSummary(m.n, nu, cuts, ind, m.g, ind + m.n * m.g)


def sigma(p: SpectralPoint) -> SpectralPoint:
    """The involution λ -> -λ."""
    return SpectralPoint(p.x, p.y, -p.lam, p.tag)
