"""Product of the sl(2) spectral curve with its base curve.

Multiplying λ^2 + r(x, y) = 0 by y^2 = P(x) and substituting σ = λy gives

    σ^2 + r(x, y) P(x) = 0,   r = a(x) + y b(x),

a double cover of the x-line branched over the zeros of r on the base
curve and over the base branch points. Its genus is 3(g - 1), the
dimension of the Prym variety of the sl(2) system.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .algebra import CPoly, min_root_separation
from .curves import CurveFunction
from .diffper import differential_basis
from .errors import NonGeneric, ZeroPolynomial
from .spectral import SpectralModel, riemann_hurwitz_genus


@dataclass(frozen=True)
class ProductCurve:
    """σ^2 + (a + y b) P = 0 over a base curve of genus g."""

    a: CPoly
    b: CPoly
    p: CPoly
    genus_base: int

    @property
    def r(self) -> CurveFunction:
        return CurveFunction(self.a, self.b, self.p)

    def pole_orders(self) -> tuple:
        """Largest pole orders at infinity allowed for a and y·b.

        With x of order 2 and y of order 2g+1 these are 4g-4 and 4g-5.
        """
        g = self.genus_base
        return 2 * (2 * g - 2), (2 * g + 1) + 2 * (g - 3)

    def equation(self, x, y, sigma):
        return sigma**2 + self.r(x, y) * self.p(x)

    def relative_residual(self, x, y, sigma):
        x = np.asarray(x, dtype=complex)
        scale = np.abs(sigma) ** 2 + (np.abs(self.a(x)) + np.abs(y * self.b(x))) * np.abs(self.p(x))
        return np.abs(self.equation(x, y, sigma)) / scale

    def to_json(self) -> dict:
        enc = lambda c: [[v.real, v.imag] for v in c.coeffs]  # noqa: E731
        return {"a": enc(self.a), "b": enc(self.b), "genus_base": self.genus_base}


def build_product(m: SpectralModel, H) -> ProductCurve:
    """Product curve of an A1 model.

    Raises
    ------
    NonGeneric
        When r vanishes identically (H = 0).
    """
    if str(m.lie) != "A1":
        raise ValueError("the product construction needs an A1 model")
    (r,) = m.invariants(H)
    if r.a.is_zero and r.b.is_zero:
        raise NonGeneric("r vanishes identically; the product curve degenerates")
    return ProductCurve(r.a, r.b, m.base.p, m.g)


@dataclass(frozen=True)
class BranchCount:
    spectral: int
    base: int
    total: int
    pole_orders: tuple

    def to_json(self) -> dict:
        return {"spectral": self.spectral, "base": self.base, "total": self.total, "pole_orders": list(self.pole_orders)}


def product_branch_count(pc: ProductCurve, sep_tol: float = 1e-6) -> BranchCount:
    """Branch points of σ^2 = -rP, counted from the zeros on the base curve.

    The finite zeros of r on the base curve are counted numerically; the
    base contributes its 2g+2 branch points including infinity; the point at
    infinity, common to both families, is removed twice.

    Raises
    ------
    NonGeneric
        When zeros of r collide with each other or with base branch points.
    """
    try:
        zeros = pc.r.zeros()
    except ZeroPolynomial as exc:
        raise NonGeneric("r vanishes identically") from exc
    xs = np.array([z[0] for z in zeros], dtype=complex)
    ys = np.array([z[1] for z in zeros], dtype=complex)
    roots = CPoly(pc.p.coeffs).roots()
    scale = max(1.0, float(np.max(np.abs(np.r_[xs, roots]))))
    pts = np.r_[xs + 0j, roots]
    yy = np.r_[ys, np.zeros(len(roots))]
    d = np.maximum(np.abs(pts[:, None] - pts[None, :]), np.abs(yy[:, None] - yy[None, :]))
    d[np.diag_indices(len(pts))] = np.inf
    if len(pts) > 1 and d.min() <= sep_tol * scale:
        raise NonGeneric("coincident zeros of r P on the base curve")
    if min_root_separation(roots) <= sep_tol * scale:
        raise NonGeneric("base polynomial has a multiple root")
    spectral = len(zeros)
    base = len(roots) + 1
    return BranchCount(spectral, base, spectral + base - 2, pc.pole_orders())


def product_genus(pc: ProductCurve, count: BranchCount | None = None) -> int:
    """Riemann-Hurwitz for the double cover of the x-line: 2ĝ - 2 = 2(0 - 2) + ν."""
    count = count or product_branch_count(pc)
    return riemann_hurwitz_genus(2, 0, count.total)


@dataclass(frozen=True)
class MatchReport:
    points: int
    max_relative_deviation: float
    max_equation_residual: float
    sigma_odd: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def product_differential_values(pc: ProductCurve, m: SpectralModel, x, y, sigma) -> np.ndarray:
    """(∂r/∂H_j) / (2σ) for every Hamiltonian, shape (..., N)."""
    (blk,) = m.layout.blocks
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    cols = [x**k for k in blk.basis.family0] + [y * x**s for s in blk.basis.family1]
    return np.stack(cols, axis=-1) / (2 * np.asarray(sigma))[..., None]


def product_differentials_match(pc: ProductCurve, m: SpectralModel, H, x, y, lam) -> MatchReport:
    """Compare product-curve and spectral-curve differentials at points (x, y, λ)."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    lam = np.asarray(lam, dtype=complex)
    sigma = lam * y
    prod = product_differential_values(pc, m, x, y, sigma)
    spec = differential_basis(m, H).values(x, y, lam)
    dev = float(np.max(np.abs(prod - spec) / np.abs(spec)))
    eq = float(np.max(pc.relative_residual(x, y, sigma)))
    neg = product_differential_values(pc, m, x, y, -sigma)
    odd = bool(np.allclose(neg, -prod, rtol=1e-14, atol=0))
    return MatchReport(len(x), dev, eq, odd)


# --- factorisation identity ------------------------------------------------------


@dataclass(frozen=True)
class QComplex:
    """Exact complex rational, so that expanded products compare exactly."""

    re: Fraction
    im: Fraction = Fraction(0)

    @classmethod
    def of(cls, z) -> "QComplex":
        z = complex(z)
        return cls(Fraction(z.real), Fraction(z.imag))

    def __add__(self, o):
        return QComplex(self.re + o.re, self.im + o.im)

    def __neg__(self):
        return QComplex(-self.re, -self.im)

    def __mul__(self, o):
        return QComplex(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __complex__(self):
        return complex(float(self.re), float(self.im))


_QZERO = QComplex(Fraction(0))


class MPoly:
    """Sparse polynomial in (Λ, x, y) with Λ = λ^2 and exact coefficients."""

    def __init__(self, terms=None):
        self.terms = {k: v for k, v in (terms or {}).items() if v}

    @classmethod
    def from_x(cls, p: CPoly, lam_pow: int = 0, y_pow: int = 0) -> "MPoly":
        return cls({(lam_pow, i, y_pow): QComplex.of(c) for i, c in enumerate(p.coeffs)})

    @classmethod
    def monomial(cls, lam_pow=0, x_pow=0, y_pow=0, c=1.0) -> "MPoly":
        return cls({(lam_pow, x_pow, y_pow): QComplex.of(c)})

    def __add__(self, other):
        out = defaultdict(lambda: _QZERO, self.terms)
        for k, v in other.terms.items():
            out[k] += v
        return MPoly(out)

    def __neg__(self):
        return MPoly({k: -v for k, v in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        out = defaultdict(lambda: _QZERO)
        for (l1, x1, y1), v1 in self.terms.items():
            for (l2, x2, y2), v2 in other.terms.items():
                out[(l1 + l2, x1 + x2, y1 + y2)] += v1 * v2
        return MPoly(out)

    def __eq__(self, other):
        return self.terms == other.terms

    def max_abs(self) -> float:
        return max((abs(complex(v)) for v in self.terms.values()), default=0.0)


def factorization_identity(pc: ProductCurve):
    """Both sides of (Λ + a)^2 - y^2 b^2 = (Λ + a + y b)(Λ + a - y b).

    Returns ``(lhs, rhs)`` as :class:`MPoly`; they agree coefficient by
    coefficient.
    """
    L = MPoly.monomial(1, 0, 0)
    A = MPoly.from_x(pc.a)
    YB = MPoly.from_x(pc.b, y_pow=1)
    lhs = (L + A) * (L + A) - YB * YB
    rhs = (L + A + YB) * (L + A - YB)
    return lhs, rhs
