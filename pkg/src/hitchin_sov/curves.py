"""Hyperelliptic base curves y^2 = P(x) with P monic of degree 2g+1."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import CPoly, horner, min_root_separation, poly_roots
from .errors import NotSquarefree, SchemaError

SQUAREFREE_TOL = 1e-6


@dataclass(frozen=True)
class CurvePoint:
    x: complex
    y: complex
    at_infinity: bool = False


@dataclass(frozen=True)
class MonomialBasis:
    """Exponents k of x^k and s of y x^s spanning the degree-d space."""

    family0: tuple
    family1: tuple

    def __len__(self):
        return len(self.family0) + len(self.family1)


def monomial_basis(d: int, g: int) -> MonomialBasis:
    if d < 1 or g < 1:
        raise ValueError(f"need d >= 1 and g >= 1, got d={d}, g={g}")
    top1 = (d - 1) * (g - 1) - 2
    return MonomialBasis(tuple(range(d * (g - 1) + 1)), tuple(range(top1 + 1)) if top1 >= 0 else ())


@dataclass(frozen=True)
class BaseCurve:
    p: CPoly
    genus: int
    _roots: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.p.degree != 2 * self.genus + 1 or self.p.coeffs[-1] != 1:
            raise ValueError("P must be monic of degree 2g+1")

    @property
    def roots(self) -> np.ndarray:
        return self._roots

    def P(self, x):
        return self.p(x)

    def P_factored(self, x):
        """P as the product of (x - e_k); exact structure near the roots."""
        x = np.asarray(x, dtype=complex)
        out = np.ones_like(x)
        for r in self.roots:
            out = out * (x - r)
        return out

    def dP(self, x):
        return self.p.derivative()(x)

    def lift(self, x, sheet: int = 0) -> CurvePoint:
        """Point over ``x`` with y the principal root of P(x), negated on sheet 1."""
        y = np.sqrt(complex(self.P(x)))
        return CurvePoint(complex(x), -y if sheet else y)

    def branch_points(self) -> list:
        pts = [CurvePoint(complex(r), 0j) for r in self.roots]
        pts.append(CurvePoint(np.inf, np.inf, at_infinity=True))
        return pts

    def near_infinity(self, z):
        """(x, y) at local coordinate z, x = z^-2; y is continuous in z near 0."""
        z = np.asarray(z, dtype=complex)
        x = z**-2.0
        g = self.genus
        # z^(4g+2) P(z^-2) -> 1 as z -> 0, so its principal root is continuous there
        rest = horner(self.p.coeffs[::-1], z**2)
        y = np.sqrt(rest) * z ** (-(2 * g + 1.0))
        return x, y

    def to_json(self) -> dict:
        return {"genus": self.genus, "coeffs": [[c.real, c.imag] for c in self.p.coeffs[:-1]]}

    @classmethod
    def from_json(cls, data, path: str = "base") -> "BaseCurve":
        if not isinstance(data, dict):
            raise SchemaError("expected an object", path)
        for key in ("genus", "coeffs"):
            if key not in data:
                raise SchemaError(f"missing field {key!r}", path)
        g = data["genus"]
        if isinstance(g, bool) or not isinstance(g, int) or g < 1:
            raise SchemaError("genus must be a positive integer", f"{path}.genus")
        coeffs = parse_complex_list(data["coeffs"], f"{path}.coeffs")
        if len(coeffs) != 2 * g + 1:
            raise SchemaError(f"genus {g} needs {2 * g + 1} coefficients, got {len(coeffs)}", f"{path}.coeffs")
        return base_curve_new(coeffs, g)


def parse_complex(item, path) -> complex:
    """One [re, im] pair."""
    if isinstance(item, (str, bytes, dict)) or not hasattr(item, "__len__") or len(item) != 2:
        raise SchemaError("expected an [re, im] pair", path)
    try:
        z = complex(float(item[0]), float(item[1]))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"expected numbers ({exc})", path) from exc
    if not np.isfinite(z):
        raise SchemaError("non-finite value", path)
    return z


def parse_complex_list(items, path):
    if not isinstance(items, (list, tuple)):
        raise SchemaError("expected a list of [re, im] pairs", path)
    return np.array([parse_complex(v, f"{path}[{i}]") for i, v in enumerate(items)], dtype=complex)


def base_curve_new(coefficients, g: int) -> BaseCurve:
    """Validated curve y^2 = x^(2g+1) + sum a_i x^i from a_0 .. a_2g."""
    a = np.asarray(coefficients, dtype=complex)
    if g < 1 or len(a) != 2 * g + 1:
        raise ValueError(f"genus {g} needs {2 * g + 1} coefficients, got {len(a)}")
    p = CPoly(np.r_[a, 1.0])
    roots = poly_roots(p).roots
    scale = max(1.0, float(np.max(np.abs(roots))))
    if min_root_separation(roots) <= SQUAREFREE_TOL * scale:
        raise NotSquarefree("P has a multiple root; the curve is singular")
    return BaseCurve(p, g, roots)


def random_base_curve(g: int, rng) -> BaseCurve:
    """Curve whose branch points are drawn uniformly in the unit square."""
    while True:
        roots = rng.uniform(-1, 1, 2 * g + 1) + 1j * rng.uniform(-1, 1, 2 * g + 1)
        if min_root_separation(roots) > 0.2:
            break
    return base_curve_new(CPoly.from_roots(roots).coeffs[:-1], g)


@dataclass(frozen=True)
class CurveFunction:
    """The function a(x) + y b(x) on the base curve, y^2 = P(x)."""

    a: CPoly
    b: CPoly
    p: CPoly

    @classmethod
    def zero(cls, p: CPoly):
        return cls(CPoly([0.0]), CPoly([0.0]), p)

    def __call__(self, x, y):
        return self.a(x) + y * self.b(x)

    def deriv(self, x, y):
        """Derivative along the curve, using dy/dx = P'(x) / (2y)."""
        out = self.a.derivative()(x) + y * self.b.derivative()(x)
        if not self.b.is_zero:
            out = out + self.b(x) * self.p.derivative()(x) / (2 * y)
        return out

    @property
    def has_y(self) -> bool:
        return not self.b.is_zero

    def __add__(self, other):
        return CurveFunction(self.a + other.a, self.b + other.b, self.p)

    def __sub__(self, other):
        return CurveFunction(self.a - other.a, self.b - other.b, self.p)

    def __mul__(self, other):
        if np.isscalar(other):
            return CurveFunction(self.a * other, self.b * other, self.p)
        return CurveFunction(
            self.a * other.a + self.b * other.b * self.p,
            self.a * other.b + self.b * other.a,
            self.p,
        )

    __rmul__ = __mul__

    def norm(self) -> CPoly:
        """(a + y b)(a - y b) = a^2 - P b^2, a polynomial in x."""
        return self.a * self.a - self.b * self.b * self.p

    def zeros(self, tol: float = 1e-9):
        """Finite zeros on the curve as (x, y) pairs.

        Without a y term each root of ``a`` gives a point on both sheets;
        otherwise each root of the norm determines its sheet through y = -a/b.
        """
        pts = []
        if not self.has_y:
            for x in poly_roots(self.a).roots:
                y = np.sqrt(complex(self.p(x)))
                pts.extend([(x, y), (x, -y)])
            return pts
        for x in poly_roots(self.norm()).roots:
            y = np.sqrt(complex(self.p(x)))
            vals = [abs(self(x, y)), abs(self(x, -y))]
            pts.append((x, y if vals[0] <= vals[1] else -y))
        return pts
