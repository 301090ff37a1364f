"""Complex polynomial arithmetic, root finding and dense linear solves.

Polynomials are stored with coefficients in *ascending* degree order. The
root finder is an Aberth--Ehrlich simultaneous iteration that works on a
batch of equal-degree polynomials at once; the sheet tracker relies on the
batched form to solve the fibre equations at many points per call.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.optimize import linear_sum_assignment

from .errors import NonConvergence, SingularMatrix, ZeroPolynomial

ROOT_TOL = 1e-10
PIVOT_TOL = 1e-12
CLUSTER_RADIUS = 1e-7


@dataclass(frozen=True)
class CPoly:
    """Dense univariate complex polynomial, ascending coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=complex))
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else c[:1] * 0
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_roots(cls, roots, leading=1.0):
        c = np.array([leading], dtype=complex)
        for r in roots:
            c = np.convolve(c, [1.0, -r])
        return cls(c[::-1])

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0

    def __call__(self, x):
        return horner(self.coeffs, x)

    def derivative(self) -> "CPoly":
        if self.degree == 0:
            return CPoly([0.0])
        return CPoly(self.coeffs[1:] * np.arange(1, len(self.coeffs)))

    def __add__(self, other):
        other = _as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        out = np.zeros(n, dtype=complex)
        out[: len(self.coeffs)] += self.coeffs
        out[: len(other.coeffs)] += other.coeffs
        return CPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return CPoly(-self.coeffs)

    def __sub__(self, other):
        return self + (-_as_poly(other))

    def __rsub__(self, other):
        return _as_poly(other) - self

    def __mul__(self, other):
        if np.isscalar(other):
            return CPoly(self.coeffs * other)
        return CPoly(np.convolve(self.coeffs, _as_poly(other).coeffs))

    __rmul__ = __mul__

    def roots(self, tol: float = ROOT_TOL) -> np.ndarray:
        return poly_roots(self, tol).roots


def _as_poly(p) -> CPoly:
    return p if isinstance(p, CPoly) else CPoly(np.atleast_1d(p))


def horner(coeffs, x):
    """Evaluate ascending ``coeffs`` at ``x`` (array or scalar)."""
    x = np.asarray(x, dtype=complex)
    out = np.zeros_like(x) + coeffs[-1]
    for c in coeffs[-2::-1]:
        out = out * x + c
    return out


@dataclass(frozen=True)
class PolyRoots:
    roots: np.ndarray
    multiplicity: np.ndarray
    residuals: np.ndarray

    def __iter__(self):
        return iter(self.roots)

    def __len__(self):
        return len(self.roots)

    @property
    def has_multiple(self) -> bool:
        return bool(np.any(self.multiplicity > 1))


def _initial_guesses(coeffs: np.ndarray) -> np.ndarray:
    """Starting points on a circle sized by the geometric mean root modulus.

    ``coeffs`` has shape (B, n+1), ascending, leading column nonzero.
    """
    n = coeffs.shape[1] - 1
    lead = np.abs(coeffs[:, -1])
    # Fujiwara-style bound keeps the circle comparable to the root spread.
    k = np.arange(1, n + 1)
    ratios = np.abs(coeffs[:, n - k]) / lead[:, None]
    bound = np.max(ratios ** (1.0 / k), axis=1)
    radius = np.where(bound > 0, bound, 1.0)
    angles = 2 * np.pi * np.arange(n) / n + 0.4
    return radius[:, None] * np.exp(1j * angles)[None, :]


def aberth_batch(coeffs, init=None, max_iter: int = 500, eps: float = 1e-15):
    """Simultaneous Aberth--Ehrlich iteration for B polynomials of degree n.

    Returns ``(roots, converged)`` with shape (B, n) and (B,).
    """
    c = np.asarray(coeffs, dtype=complex)
    if c.ndim == 1:
        c = c[None, :]
    n = c.shape[1] - 1
    z = _initial_guesses(c) if init is None else np.array(init, dtype=complex).reshape(c.shape[0], n)
    if n == 1:
        return (-c[:, :1] / c[:, 1:2]), np.ones(c.shape[0], bool)
    dc = c[:, 1:] * np.arange(1, n + 1)
    active = np.ones(c.shape[0], dtype=bool)
    eye = np.eye(n, dtype=bool)
    for _ in range(max_iter):
        if not active.any():
            break
        za = z[active]
        ca, dca = c[active], dc[active]
        p = _horner_rows(ca, za)
        dp = _horner_rows(dca, za)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            diff = za[:, :, None] - za[:, None, :]
            diff[:, eye] = 1.0
            s = np.sum(np.where(eye[None], 0.0, 1.0 / diff), axis=2)
            step = ratio / (1.0 - ratio * s)
        step = np.where(np.isfinite(step), step, 0.0)
        step = np.where(p == 0, 0.0, step)
        za = za - step
        z[active] = za
        done = np.all(np.abs(step) <= eps * np.maximum(1.0, np.abs(za)), axis=1)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    return z, ~active


def _horner_rows(c, z):
    out = np.zeros_like(z) + c[:, -1:]
    for k in range(c.shape[1] - 2, -1, -1):
        out = out * z + c[:, k : k + 1]
    return out


def relative_residual(coeffs, roots) -> np.ndarray:
    c = np.asarray(coeffs, dtype=complex)
    r = np.asarray(roots, dtype=complex)
    scale = np.max(np.abs(c)) * np.maximum(1.0, np.abs(r)) ** (len(c) - 1)
    return np.abs(horner(c, r)) / scale


def cluster_multiplicities(roots, radius: float = CLUSTER_RADIUS) -> np.ndarray:
    """Size of the cluster each root belongs to (single-linkage at ``radius``·scale)."""
    r = np.asarray(roots, dtype=complex)
    if r.size == 0:
        return np.zeros(0, dtype=int)
    scale = max(1.0, float(np.max(np.abs(r))))
    close = np.abs(r[:, None] - r[None, :]) <= radius * scale
    label = np.arange(len(r))
    while True:
        new = np.min(np.where(close, label[None, :], len(r)), axis=1)
        if np.array_equal(new, label):
            break
        label = new
    counts = np.bincount(label, minlength=len(r))
    return counts[label]


def poly_roots(p, tol: float = ROOT_TOL, cluster_radius: float = CLUSTER_RADIUS) -> PolyRoots:
    """All roots of ``p`` with cluster-based multiplicity estimates.

    Raises
    ------
    ZeroPolynomial
        If ``p`` vanishes identically.
    NonConvergence
        If some root fails the residual test ``|p(r)| <= tol * scale``.
    """
    p = _as_poly(p)
    if p.is_zero:
        raise ZeroPolynomial("cannot find roots of the zero polynomial")
    if p.degree == 0:
        return PolyRoots(np.zeros(0, complex), np.zeros(0, int), np.zeros(0))
    c = p.coeffs
    # exact zero roots are split off; they stall the iteration otherwise
    nzero = int(np.argmax(np.abs(c) > 0))
    core = c[nzero:]
    roots = np.zeros(nzero, dtype=complex)
    if len(core) > 1:
        z, _ = aberth_batch(core[None, :])
        roots = np.concatenate([roots, z[0]])
    res = relative_residual(c, roots)
    if np.any(res > tol):
        raise NonConvergence(
            f"root residual {res.max():.3e} exceeds tolerance {tol:.1e}",
            trace=list(roots),
        )
    order = np.lexsort((roots.imag, roots.real))
    roots = roots[order]
    return PolyRoots(roots, cluster_multiplicities(roots, cluster_radius), res[order])


def min_root_separation(roots) -> float:
    r = np.asarray(roots, dtype=complex)
    if len(r) < 2:
        return np.inf
    d = np.abs(r[:, None] - r[None, :])
    d[np.diag_indices(len(r))] = np.inf
    return float(d.min())


class DenseSolution:
    """Solution ``x`` with the diagnostics computed on first access."""

    def __init__(self, x, a, b, scaled):
        self.x = x
        self._a, self._b, self._scaled = a, b, scaled

    @cached_property
    def condition(self) -> float:
        """1-norm condition number of the equilibrated matrix."""
        return float(abs(np.linalg.cond(self._scaled, 1)))

    @cached_property
    def residual(self) -> float:
        """Normwise relative backward error on the original system."""
        a, b, x = self._a, self._b, self.x
        denom = np.linalg.norm(a, np.inf) * np.linalg.norm(x, np.inf) + np.linalg.norm(b, np.inf)
        return float(np.linalg.norm(a @ x - b, np.inf) / denom) if denom else 0.0


def _pow2(v):
    return np.exp2(-np.round(np.log2(v)))


def _equilibrated_lu(a, cols_first):
    # power-of-two scaling, rows then columns or the reverse
    if cols_first:
        c = _pow2(np.abs(a).max(axis=0))
        r = _pow2(np.abs(a * c[None, :]).max(axis=1))
    else:
        r = _pow2(np.abs(a).max(axis=1))
        c = _pow2(np.abs(a * r[:, None]).max(axis=0))
    s = a * r[:, None] * c[None, :]
    with warnings.catch_warnings():
        # an exactly singular factor is reported through the pivot test
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(s, check_finite=False)
    pivots = np.abs(np.diag(lu))
    ratio = pivots.min() / pivots.max() if pivots.max() > 0 else 0.0
    return r, c, s, lu, piv, ratio


def solve_dense(m, rhs, pivot_tol: float = PIVOT_TOL) -> DenseSolution:
    """Solve ``m @ x = rhs`` by LU with partial pivoting.

    Rows, then columns, are first scaled by powers of two to unit largest
    modulus, so badly scaled but well-posed systems are not mistaken for
    singular ones; if that fails, columns are scaled before rows. A pivot
    below ``pivot_tol`` times the largest pivot of the scaled matrix, in
    both orders, raises :class:`SingularMatrix`; ``condition`` is the
    1-norm condition number of the scaled matrix used.
    """
    a = np.asarray(m, dtype=complex)
    b = np.asarray(rhs, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] != b.shape[0]:
        raise ValueError(f"incompatible shapes {a.shape} and {b.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    if np.any(np.abs(a).max(axis=1) == 0):
        raise SingularMatrix("matrix has a zero row")
    best = None
    for cols_first in (False, True):
        r, c, s, lu, piv, ratio = _equilibrated_lu(a, cols_first)
        if ratio > pivot_tol:
            break
        if best is None or ratio > best[-1]:
            best = (r, c, s, lu, piv, ratio)
    else:
        r, c, s, lu, piv, ratio = best
        raise SingularMatrix(f"pivot ratio {ratio:.2e} below {pivot_tol:.0e}")
    rb = b * (r[:, None] if b.ndim == 2 else r)
    y = scipy.linalg.lu_solve((lu, piv), rb)
    x = y * (c[:, None] if b.ndim == 2 else c)
    return DenseSolution(x, a, b, s)


def solve_cramer(m, rhs) -> np.ndarray:
    """Cramer's rule, one determinant per unknown. Cross-check path only."""
    a = np.asarray(m, dtype=complex)
    b = np.asarray(rhs, dtype=complex)
    d = np.linalg.det(a)
    if d == 0:
        raise SingularMatrix("zero determinant")
    out = np.empty(a.shape[1], dtype=complex)
    for k in range(a.shape[1]):
        ak = a.copy()
        ak[:, k] = b
        out[k] = np.linalg.det(ak) / d
    return out


def _quadratic(a, b, c):
    """Both roots of a t^2 + b t + c, avoiding cancellation."""
    disc = np.sqrt(complex(b * b - 4 * a * c))
    q = -0.5 * (b + disc) if abs(b + disc) >= abs(b - disc) else -0.5 * (b - disc)
    if q == 0:
        return 0j, 0j
    return q / a, c / q


def _cubic(a, b, c):
    """Roots of m^3 + a m^2 + b m + c by Cardano's formula."""
    p = b - a * a / 3
    q = 2 * a**3 / 27 - a * b / 3 + c
    s = np.sqrt(complex(q * q / 4 + p**3 / 27))
    w3 = -q / 2 + s if abs(-q / 2 + s) >= abs(-q / 2 - s) else -q / 2 - s
    if w3 == 0:
        return [-a / 3] * 3
    w = complex(w3) ** (1.0 / 3.0)
    omega = np.exp(2j * np.pi / 3)
    out = []
    for k in range(3):
        wk = w * omega**k
        out.append(wk - p / (3 * wk) - a / 3)
    return out


def solve_quartic_radicals(c4, c3, c2, c1, c0) -> np.ndarray:
    """Four roots of c4 λ^4 + c3 λ^3 + c2 λ^2 + c1 λ + c0 in closed form.

    Ferrari's method: depress, pick the largest root of the resolvent cubic,
    split into two quadratics. Repeated roots come back clustered.
    """
    if c4 == 0:
        raise ValueError("leading coefficient must be nonzero")
    a, b, c, d = (complex(v) / complex(c4) for v in (c3, c2, c1, c0))
    shift = a / 4
    p = b - 3 * a * a / 8
    q = c - a * b / 2 + a**3 / 8
    r = d - a * c / 4 + a * a * b / 16 - 3 * a**4 / 256
    scale = max(abs(p), abs(q) ** (2 / 3), abs(r) ** 0.5, 1e-300)
    if abs(q) <= 1e-14 * scale**1.5:
        # biquadratic: t^2 solves a quadratic
        u1, u2 = _quadratic(1.0, p, r)
        t = [np.sqrt(u1), -np.sqrt(u1), np.sqrt(u2), -np.sqrt(u2)]
    else:
        ms = _cubic(p, (p * p - 4 * r) / 4, -q * q / 8)
        m = max(ms, key=abs)
        s2m = np.sqrt(2 * m)
        k = q / (2 * s2m)
        t1, t2 = _quadratic(1.0, -s2m, p / 2 + m + k)
        t3, t4 = _quadratic(1.0, s2m, p / 2 + m - k)
        t = [t1, t2, t3, t4]
    return np.array(t, dtype=complex) - shift


def match_roots(a, b) -> float:
    """Largest distance after optimally pairing two root multisets."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    cost = np.abs(a[:, None] - b[None, :])
    i, j = linear_sum_assignment(cost)
    return float(cost[i, j].max()) if len(i) else 0.0
