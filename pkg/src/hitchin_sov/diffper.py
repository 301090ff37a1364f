"""Angle differentials, holomorphy probes, periods and angle coordinates.

The differentials conjugate to the Hamiltonians are

    ω_j = (∂R/∂H_j) / (∂R/∂λ) · dx / y,

one per entry of the Hamiltonian layout. For a Pfaffian block the
numerator carries the factor 2q coming from ∂(q^2)/∂H_j.

Periods are computed over cuts joining ramification points. A cut traversed
on two sheets exchanged by an involution (y -> -y for cuts between base
branch points, λ -> -λ for cuts between fixed points of λ -> -λ) is a closed
cycle whose period is twice the integral along the cut.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisViolated, SchemaError, SingularPeriodMatrix, TrackingLoss
from .paths import Arc, Line, Ray, SheetPath, Track, integrate, polyline, track
from .spectral import SpectralModel, SpectralPoint, branch_points, parse_complex, singular_points

PERIOD_RTOL = 1e-11


# --- the differentials ------------------------------------------------------


def dR_dlam(m: SpectralModel, H, x, y, lam):
    c = m.lambda_coeffs(H, x, y)
    lam = np.asarray(lam, dtype=complex)
    out = np.zeros(np.broadcast(c[..., 0], lam).shape, dtype=complex)
    for k in range(m.n, 0, -1):
        out = out * lam + k * c[..., k]
    return out


def model_has_y(m: SpectralModel) -> bool:
    """True when some invariant has monomials y x^s, so y -> -y is not a symmetry."""
    return any(b.basis.family1 for b in m.layout.blocks)


@dataclass(frozen=True)
class AngleDifferential:
    """ω_j = numerator · dx / (R'_λ y), numerator = λ^e x^k, λ^e y x^k or 2q x^k."""

    index: int
    block: int
    family: str
    exponent: int
    lam_power: int
    pfaffian: bool

    def descriptor(self) -> str:
        mono = f"x^{self.exponent}" if self.family == "x" else f"y x^{self.exponent}"
        if self.pfaffian:
            num = f"2q {mono}"
        elif self.lam_power:
            num = f"λ^{self.lam_power} {mono}"
        else:
            num = mono
        return f"{num} dx / (R'_λ y)"

    def to_json(self) -> dict:
        return {"index": self.index, "block": self.block, "descriptor": self.descriptor()}


class DifferentialBasis:
    """The N angle differentials of a model at fixed H, evaluated together."""

    def __init__(self, m: SpectralModel, H, items):
        self.model = m
        self.H = m.check_H(H)
        self.items = list(items)

    def __len__(self):
        return len(self.items)

    def __getitem__(self, j):
        return self.items[j]

    def values(self, x, y, lam) -> np.ndarray:
        """dx-coefficients of all ω_j, shape (..., N)."""
        m, H = self.model, self.H
        num = m.dR_dH(H, x, y, lam)
        den = dR_dlam(m, H, x, y, lam) * np.asarray(y, dtype=complex)
        return num / den[..., None]

    def dlam_values(self, x, y, lam) -> np.ndarray:
        """dλ-coefficients -(∂R/∂H_j)/(R'_x y), valid where λ is a local coordinate."""
        m, H = self.model, self.H
        d = m.partials(H, x, y, lam)
        return -d.dR_dH / (d.dR_dx * np.asarray(y, dtype=complex))[..., None]

    def __call__(self, x, y, lam):
        return self.values(x, y, lam)


def differential_basis(m: SpectralModel, H) -> DifferentialBasis:
    items = []
    for b, e in zip(m.layout.blocks, m.powers):
        for fam, exps in (("x", b.basis.family0), ("yx", b.basis.family1)):
            for k in exps:
                items.append(AngleDifferential(len(items), b.index, fam, k, e, b.pfaffian))
    return DifferentialBasis(m, H, items)


def base_differentials(m: SpectralModel, x, y) -> np.ndarray:
    """dx-coefficients x^p / y, p < g, of the holomorphic differentials of the base."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    return np.stack([x**p / y for p in range(m.g)], axis=-1)


def curve_samples(m: SpectralModel, H, rng, count: int, radius: float = 1.5):
    """Random points (x, y, λ) of the spectral curve, as arrays."""
    xs = radius * (rng.uniform(-1, 1, count) + 1j * rng.uniform(-1, 1, count))
    ys = np.sqrt(m.base.P(xs).astype(complex)) * rng.choice([-1, 1], count)
    lam = np.empty(count, dtype=complex)
    for i in range(count):
        r = m.roots_lambda(H, xs[i], ys[i])
        lam[i] = r[rng.integers(len(r))]
    return xs, ys, lam


# --- holomorphy probes --------------------------------------------------------


@dataclass
class ProbeReport:
    """Chart values of every ω_j along an approach to ``target``.

    ``values`` has shape (branches, radii, N). ``growth`` is the largest
    modulus along the approach divided by the modulus at the largest radius,
    per branch and differential; a bounded differential keeps it below 2.
    """

    target: object
    kind: str
    chart: str
    radii: np.ndarray
    values: np.ndarray
    dx_values: np.ndarray
    growth: np.ndarray

    @property
    def bounded(self) -> bool:
        return bool(np.all(self.growth < 2.0))

    @property
    def dx_growth(self) -> np.ndarray:
        return _growth(self.dx_values)

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "chart": self.chart,
            "radii": list(map(float, self.radii)),
            "max_growth": float(self.growth.max()),
            "dx_max_growth": float(self.dx_growth.max()),
            "bounded": self.bounded,
        }


def _growth(v):
    a = np.abs(v)
    ref = a[:, :1, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        g = a.max(axis=1) / ref[:, 0, :]
    # a differential vanishing identically along the approach is bounded
    return np.where(a.max(axis=1) <= 1e-300, 0.0, g)


def _x_on_branch(m, H, lam, x0, y0, iters=60):
    """Solve R(x, y(x), λ) = 0 near (x0, y0) by Newton in x."""
    x = complex(x0)
    for _ in range(iters):
        y = np.sqrt(complex(m.base.P(x)))
        if abs(y - y0) > abs(y + y0):
            y = -y
        f = m.eval_R(H, x, y, lam)
        d = m.partials(H, x, y, lam).dR_dx
        step = complex(f / d)
        x -= step
        if abs(step) <= 1e-16 * max(1.0, abs(x)):
            break
    y = np.sqrt(complex(m.base.P(x)))
    if abs(y - y0) > abs(y + y0):
        y = -y
    return x, y


def holomorphy_probe(m: SpectralModel, H, target, radii=None, direction: float = 0.7) -> ProbeReport:
    """Evaluate all ω_j on a shrinking approach to ``target``.

    ``target`` is a :class:`SpectralPoint` tagged ``lambda0``/``mu_double``
    (branch point, approached in the λ-chart), ``singular`` (node, each branch
    approached in the x-chart), any other finite point (x-chart), or the
    string ``"infinity"`` (z-chart, x = z^-2, on every sheet).

    Raises
    ------
    HypothesisViolated
        When a finite target lies over a base branch point (y = 0).
    """
    H = m.check_H(H)
    basis = differential_basis(m, H)
    ph = np.exp(1j * direction)
    if isinstance(target, str) and target == "infinity":
        radii = np.logspace(-1, -4, 7) if radii is None else np.asarray(radii, dtype=float)
        return _probe_infinity(m, H, basis, radii, ph)
    radii = np.logspace(-3, -6, 7) if radii is None else np.asarray(radii, dtype=float)
    p = target
    if abs(p.y) <= 1e-9 * max(1.0, abs(p.x)) ** (m.g + 0.5):
        raise HypothesisViolated("probe target lies over a base branch point (y = 0)")
    if p.tag in ("lambda0", "mu_double"):
        vals, dxv = [], []
        for r in radii:
            lam = p.lam + r * ph
            x, y = _x_on_branch(m, H, lam, p.x, p.y)
            vals.append(basis.dlam_values(x, y, lam))
            dxv.append(basis.values(x, y, lam))
        return ProbeReport(p, "branch", "dlambda", radii, np.array([vals]), np.array([dxv]), _growth(np.array([vals])))
    if p.tag == "singular":
        branches = [[], []]
        prev = None
        for r in radii:
            x = p.x + r * ph
            y = np.sqrt(complex(m.base.P(x)))
            if abs(y - p.y) > abs(y + p.y):
                y = -y
            roots = m.roots_lambda(H, x, y)
            small = roots[np.argsort(np.abs(roots - p.lam))[:2]]
            if prev is not None and abs(small[0] - prev[0]) > abs(small[1] - prev[0]):
                small = small[::-1]
            prev = small
            for b in range(2):
                branches[b].append(basis.values(x, y, small[b]))
        v = np.array(branches)
        return ProbeReport(p, "singular", "dx_per_branch", radii, v, v, _growth(v))
    vals = []
    for r in radii:
        x = p.x + r * ph
        y = np.sqrt(complex(m.base.P(x)))
        if abs(y - p.y) > abs(y + p.y):
            y = -y
        roots = m.roots_lambda(H, x, y)
        lam = roots[np.argmin(np.abs(roots - p.lam))]
        vals.append(basis.values(x, y, lam))
    v = np.array([vals])
    return ProbeReport(p, "smooth", "dx", radii, v, v, _growth(v))


def _probe_infinity(m, H, basis, radii, ph):
    per_sheet = []
    prev = None
    for r in radii:
        z = r * ph
        x, y = m.base.near_infinity(z)
        roots = m.roots_lambda(H, x, y)
        scaled = roots * z ** (2 * (m.g - 1))
        if prev is not None:
            order = [int(np.argmin(np.abs(scaled - p))) for p in prev]
            roots, scaled = roots[order], scaled[order]
        prev = scaled
        dxdz = -2.0 * z**-3
        per_sheet.append(basis.values(x, y, roots) * dxdz)
    v = np.transpose(np.array(per_sheet), (1, 0, 2))
    return ProbeReport("infinity", "infinity", "z", radii, v, v, _growth(v))


def probe_targets(m: SpectralModel, H) -> list:
    """Finite branch points, then singular points (series D)."""
    return branch_points(m, H) + singular_points(m, H)


# --- cuts -------------------------------------------------------------------


def ramification_x(m: SpectralModel, H) -> np.ndarray:
    """x-projections of every point where a sheet label can change or break."""
    xs = [p.x for p in branch_points(m, H, check=False)]
    xs += [p.x for p in singular_points(m, H, check=False)]
    xs += list(m.base.roots)
    return _unique(np.array(xs, dtype=complex))


def _unique(xs, tol=1e-9):
    out = []
    for x in xs:
        if all(abs(x - o) > tol * max(1.0, abs(x)) for o in out):
            out.append(x)
    return np.array(out, dtype=complex)


def _segment_distance(pts, a, b):
    d = b - a
    t = np.clip(np.real((pts - a) * np.conj(d)) / abs(d) ** 2, 0, 1)
    return np.abs(pts - (a + t * d))


def _ray_distance(pts, a, d):
    t = np.maximum(np.real((pts - a) * np.conj(d)) / abs(d) ** 2, 0)
    return np.abs(pts - (a + t * d))


@dataclass
class Cut:
    """A path on one sheet joining two ramification points through ``anchor``.

    ``kind`` is ``"base"`` (endpoints over base branch points or infinity,
    closed up by y -> -y) or ``"fixed"`` (endpoints with λ = 0, closed up by
    λ -> -λ). ``b`` is ``inf`` for a cut running along a ray to infinity.
    """

    a: complex
    b: complex
    kind: str
    anchor: complex
    y: complex
    lam: complex
    direction: complex = 0j
    label: str = ""

    @property
    def to_infinity(self) -> bool:
        return not np.isfinite(self.b)

    def halves(self):
        to_b = Ray(self.anchor, self.direction) if self.to_infinity else Line(self.anchor, self.b)
        return SheetPath(to_b, self.y, self.lam), SheetPath(Line(self.anchor, self.a), self.y, self.lam)

    def to_json(self) -> dict:
        b = None if self.to_infinity else [self.b.real, self.b.imag]
        return {
            "kind": self.kind,
            "label": self.label,
            "a": [self.a.real, self.a.imag],
            "b": b,
            "anchor": {"x": _pair(self.anchor), "y": _pair(self.y), "lambda": _pair(self.lam)},
            "direction": _pair(self.direction),
        }


def _pair(z):
    z = complex(z)
    return [z.real, z.imag]


def cut_from_json(data, path: str = "cut") -> Cut:
    """Inverse of :meth:`Cut.to_json`; ``b`` is null for a cut to infinity."""
    if not isinstance(data, dict):
        raise SchemaError("expected an object", path)
    for key in ("kind", "a", "anchor"):
        if key not in data:
            raise SchemaError(f"missing {key!r}", path)
    if data["kind"] not in ("base", "fixed"):
        raise SchemaError("kind must be 'base' or 'fixed'", f"{path}.kind")
    a = parse_complex(data["a"], f"{path}.a")
    b = complex(np.inf) if data.get("b") is None else parse_complex(data["b"], f"{path}.b")
    anc = data["anchor"]
    if not isinstance(anc, dict) or any(k not in anc for k in ("x", "y", "lambda")):
        raise SchemaError("anchor needs x, y and lambda", f"{path}.anchor")
    x, y, lam = (parse_complex(anc[k], f"{path}.anchor.{k}") for k in ("x", "y", "lambda"))
    d = parse_complex(data.get("direction", [0.0, 0.0]), f"{path}.direction")
    if not np.isfinite(b) and d == 0:
        raise SchemaError("a cut to infinity needs a nonzero direction", f"{path}.direction")
    return Cut(a, b, data["kind"], x, y, lam, d, str(data.get("label", "")))


def cut_integral(m: SpectralModel, H, cut: Cut, integrand, rtol: float = PERIOD_RTOL):
    """∫ from a to b along the cut; returns (value, (track_b, track_a))."""
    pb, pa = cut.halves()
    qb = integrate(m, H, pb, integrand, rtol=rtol)
    qa = integrate(m, H, pa, integrand, rtol=rtol)
    return qb.value - qa.value, (qb.track, qa.track)


def _sheet_reps(m, roots):
    """One λ per σ-orbit when the model is even, all roots otherwise."""
    out = []
    for r in roots:
        if m.is_even and any(abs(r + o) <= 1e-9 * max(1.0, abs(r)) for o in out):
            continue
        out.append(r)
    return out


def _ray_direction(a, others, centroid):
    """Outward direction from ``a`` with the best clearance from ``others``."""
    base = a - centroid
    base = base / abs(base) if abs(base) > 1e-12 else 1.0 + 0j
    best, best_d = base, -1.0
    for k in range(24):
        d = base * np.exp(1j * np.pi * (k // 2 + 1) / 12 * (-1) ** k) if k else base
        dist = _ray_distance(others, a, d).min() if len(others) else np.inf
        if dist > best_d + 1e-12:
            best, best_d = d, dist
        if k == 0 and dist > 0.15:
            break
    return best, best_d


def _clearance(ram, a, b):
    others = ram[(np.abs(ram - a) > 1e-9) & (np.abs(ram - b) > 1e-9)]
    return float(_segment_distance(others, a, b).min()) if len(others) else np.inf


def base_pairing(m: SpectralModel) -> list:
    """Greedy nearest pairing of the base branch points, infinity paired last.

    Ties in distance break lexicographically on (Re x, Im x).
    """
    pts = sorted(m.base.roots, key=lambda z: (z.real, z.imag))
    left = list(pts)
    pairs = []
    while len(left) > 1:
        best = None
        for i, j in itertools.combinations(range(len(left)), 2):
            key = (abs(left[i] - left[j]), left[i].real, left[i].imag, left[j].real, left[j].imag)
            if best is None or key < best[0]:
                best = (key, i, j)
        _, i, j = best
        pairs.append((left[i], left[j]))
        left = [z for k, z in enumerate(left) if k not in (i, j)]
    pairs.append((left[0], complex(np.inf)))
    return pairs


def base_cut(m: SpectralModel, H, a, b, sheet: int = 0, label: str = "") -> Cut:
    """Cut between base branch points ``a`` and ``b`` (``b`` may be infinite)."""
    ram = ramification_x(m, H)
    if np.isfinite(b):
        anchor = 0.5 * (a + b)
        direction = 0j
    else:
        others = ram[np.abs(ram - a) > 1e-9]
        direction, clear = _ray_direction(a, others, np.mean(m.base.roots))
        step = 0.5 * min(clear, np.min(np.abs(others - a))) if len(others) else 0.5
        direction = direction * step
        anchor = a + direction
    y = m.base.lift(anchor, 0).y
    roots = m.roots_lambda(H, anchor, y)
    lam = _sheet_reps(m, roots)[sheet]
    return Cut(complex(a), complex(b), "base", complex(anchor), complex(y), complex(lam), complex(direction), label)


def fixed_points(m: SpectralModel, H) -> list:
    """Smooth ramification points with λ = 0 (fixed by λ -> -λ), sorted."""
    pts = [p for p in branch_points(m, H) if p.tag == "lambda0"]
    return sorted(pts, key=lambda p: (p.x.real, p.x.imag, p.y.real, p.y.imag))


def fixed_cut_candidates(m: SpectralModel, H, p: SpectralPoint, q: SpectralPoint, label: str = "", anchor=None) -> list:
    """Cuts p -> anchor -> q on sheets vanishing at both ends.

    The default anchor is the midpoint, giving the straight segment; other
    anchors give broken-line cuts in other homotopy classes.
    """
    anchor = 0.5 * (p.x + q.x) if anchor is None else complex(anchor)
    out = []
    for ysign in (1, -1):
        y = ysign * np.sqrt(complex(m.base.P(anchor)))
        for lam in _sheet_reps(m, m.roots_lambda(H, anchor, y)):
            cut = Cut(complex(p.x), complex(q.x), "fixed", complex(anchor), complex(y), complex(lam), 0j, label)
            try:
                pb, pa = cut.halves()
                tb, ta = track(m, H, pb), track(m, H, pa)
            except TrackingLoss:
                continue
            ok = True
            for tr, end in ((tb, q), (ta, p)):
                _, ye, le = tr.end
                scale = max(1.0, abs(end.x)) ** (m.g + 0.5)
                ok &= abs(ye - end.y) <= 1e-6 * scale and abs(le) <= 1e-4 * max(1.0, abs(end.x)) ** (m.g - 1)
            if ok:
                out.append(cut)
    return out


def a1_named_cuts(m: SpectralModel, H, choice: str) -> list:
    """The two cut systems drawn for sl(2) at genus 2.

    ``three_vertical``: the three cuts of the base pairing, lifted to one
    λ-sheet. ``two_vertical_one_horizontal``: the two shortest base cuts and
    the cut joining the two zeros of r_2 on one y-sheet.
    """
    if str(m.lie) != "A1" or m.g != 2:
        raise ValueError("named cut choices exist for A1 at genus 2 only")
    pairs = base_pairing(m)
    verts = [base_cut(m, H, a, b, 0, f"vertical{i}") for i, (a, b) in enumerate(pairs)]
    if choice == "three_vertical":
        return verts
    if choice == "two_vertical_one_horizontal":
        xs = _unique(np.array([p.x for p in fixed_points(m, H)]))
        if len(xs) != 2:
            raise ValueError("expected two zeros of r_2")
        a, b = sorted(xs, key=lambda z: (z.real, z.imag))
        anchor = 0.5 * (a + b)
        y = m.base.lift(anchor, 0).y
        lam = m.roots_lambda(H, anchor, y)[0]
        horiz = Cut(complex(a), complex(b), "fixed", complex(anchor), complex(y), complex(lam), 0j, "horizontal")
        return verts[:2] + [horiz]
    raise ValueError(f"unknown cut choice {choice!r}")


def _rank_greedy(rows, need, rtol=1e-7):
    chosen, mat = [], np.zeros((0, need), dtype=complex)
    for i, r in rows:
        trial = np.vstack([mat, r])
        s = np.linalg.svd(trial, compute_uv=False)
        if s[-1] > rtol * s[0]:
            chosen.append(i)
            mat = trial
        if len(chosen) == need:
            break
    return chosen


def auto_cuts(m: SpectralModel, H, basis=None, rtol: float = PERIOD_RTOL) -> list:
    """N cuts chosen greedily by ascending length among valid candidates.

    Base cuts are admissible when y -> -y is a symmetry of the curve; fixed
    cuts when λ -> -λ is. Candidates are kept while they raise the rank of
    the period rows; σ-images of a kept cut are never separate candidates.
    """
    basis = basis or differential_basis(m, H)
    ram = ramification_x(m, H)
    cands = []
    if not model_has_y(m):
        pts = list(m.base.roots) + [complex(np.inf)]
        for a, b in itertools.combinations(pts, 2):
            if np.isfinite(b) and _clearance(ram, a, b) < 1e-3:
                continue
            length = abs(a - b) if np.isfinite(b) else 1e6
            for s in range(m.n // 2 if m.is_even else m.n):
                cands.append((length, a.real, a.imag, "base", a, b, s))
    if m.is_even:
        fps = fixed_points(m, H)
        pairs = [(p, q) for p, q in itertools.combinations(fps, 2) if abs(p.x - q.x) > 1e-9]
        # straight cuts first, then broken lines through offset anchors
        for rank, h in enumerate((0.0, 0.5, -0.5, 1.0, -1.0)):
            for p, q in pairs:
                anchor = 0.5 * (p.x + q.x) + 1j * h * (q.x - p.x)
                if min(_clearance(ram, p.x, anchor), _clearance(ram, anchor, q.x)) < 1e-3:
                    continue
                cands.append((rank + abs(p.x - q.x) / 100, p.x.real, p.x.imag, "fixed", p, q, anchor))
    cands.sort(key=lambda c: c[:3])
    chosen, rows = [], []
    for c in cands:
        try:
            if c[3] == "base":
                cuts = [base_cut(m, H, c[4], c[5], c[6], f"base{len(chosen)}")]
            else:
                cuts = fixed_cut_candidates(m, H, c[4], c[5], f"fixed{len(chosen)}", c[6])
        except (TrackingLoss, IndexError):
            continue
        for cut in cuts:
            try:
                v, _ = cut_integral(m, H, cut, basis.values, rtol)
            except TrackingLoss:
                continue
            rows.append(2 * v)
            if _rank_greedy(list(enumerate(rows)), m.N) == list(range(len(rows))):
                chosen.append(cut)
            else:
                rows.pop()
            if len(chosen) == m.N:
                return chosen
    raise SingularPeriodMatrix(f"only {len(chosen)} independent cuts found, need {m.N}")


# --- periods ----------------------------------------------------------------


@dataclass
class PeriodData:
    """Ainv[i, k] = 2∫_{l_i} ω_k, its inverse A and the normalised basis.

    The normalised differentials are ω'_k = Σ_m ω_m A[m, k], so that
    2∫_{l_i} ω'_k = δ_ik; in the same normalisation the Hamiltonians
    transform as H' = Ainv @ H.
    """

    model: SpectralModel
    H: np.ndarray
    cuts: list
    Ainv: np.ndarray
    A: np.ndarray
    basis: DifferentialBasis
    errors: np.ndarray = field(default=None)

    def normalized(self, x, y, lam):
        return self.basis.values(x, y, lam) @ self.A

    def transformed_H(self):
        return self.Ainv @ self.H

    @property
    def identity_error(self) -> float:
        return float(np.abs(self.A @ self.Ainv - np.eye(len(self.A))).max())

    def to_json(self) -> dict:
        return {
            "lie": str(self.model.lie),
            "genus": self.model.g,
            "cuts": [c.to_json() for c in self.cuts],
            "Ainv": _cmat(self.Ainv),
            "A": _cmat(self.A),
            "identity_error": self.identity_error,
            "normalized_H": [_pair(h) for h in self.transformed_H()],
        }


def _cmat(a):
    return [[_pair(v) for v in row] for row in np.asarray(a)]


def period_matrix(m: SpectralModel, H, cuts="auto", rtol: float = PERIOD_RTOL) -> PeriodData:
    """Period matrix over ``cuts``: a list of :class:`Cut`, a named A1 choice, or ``"auto"``.

    Raises
    ------
    SingularPeriodMatrix
        When the cut periods are linearly dependent.
    """
    H = m.check_H(H)
    basis = differential_basis(m, H)
    if isinstance(cuts, str):
        if cuts == "auto" and str(m.lie) == "A1" and m.g == 2:
            cuts = "three_vertical"
        cuts = auto_cuts(m, H, basis, rtol) if cuts == "auto" else a1_named_cuts(m, H, cuts)
    if len(cuts) != m.N:
        raise SingularPeriodMatrix(f"{len(cuts)} cuts given, need {m.N}")
    rows, errs = [], []
    for c in cuts:
        pb, pa = c.halves()
        qb = integrate(m, H, pb, basis.values, rtol=rtol)
        qa = integrate(m, H, pa, basis.values, rtol=rtol)
        rows.append(2 * (qb.value - qa.value))
        errs.append(2 * (qb.error + qa.error))
    Ainv = np.array(rows)
    s = np.linalg.svd(Ainv, compute_uv=False)
    if s[-1] <= 1e-10 * s[0]:
        raise SingularPeriodMatrix(f"period matrix is singular (σ_min/σ_max = {s[-1] / s[0]:.2e})")
    A = np.linalg.inv(Ainv)
    pd = PeriodData(m, H, list(cuts), Ainv, A, basis, np.array(errs))
    if pd.identity_error > 1e-8:
        raise SingularPeriodMatrix(f"A · Ainv deviates from identity by {pd.identity_error:.2e}")
    return pd


def cycle_loop(m: SpectralModel, H, cut: Cut, shrink: float = 0.3):
    """An independent closed representative of the cycle of ``cut``.

    Finite cuts are encircled by a stadium-shaped loop that runs alongside
    the cut on the anchor sheet, around b, back on the exchanged sheet and
    around a. A cut to infinity is replaced by the same construction with a
    farther anchor and a rotated ray (a homotopic cut); its value is then
    doubled like a cut integral. Returns ``(SheetPath, factor)`` where
    factor multiplies the integral over the path.
    """
    ram = ramification_x(m, H)
    if cut.to_infinity:
        others = ram[np.abs(ram - cut.a) > 1e-9]
        best = None
        for ang in (0.12, -0.12, 0.25, -0.25):
            d = cut.direction * np.exp(1j * ang)
            clear = _ray_distance(others, cut.a, d).min()
            if best is None or clear > best[1]:
                best = (d, clear)
        d = best[0]
        anchor2 = cut.a + 1.5 * d
        # carry the anchor sheet over to the new anchor along a short polyline
        hop = polyline([cut.anchor, cut.a + 1.5 * cut.direction, anchor2])
        tr = track(m, H, SheetPath(hop, cut.y, cut.lam))
        _, y2, l2 = tr.end
        rest = SheetPath(Ray(anchor2, d), y2, l2)
        back = SheetPath(Line(anchor2, cut.a), y2, l2)
        return [(rest, 2.0), (back, -2.0)]
    verts = [cut.a, cut.anchor, cut.b]
    if abs(_segment_distance(np.array([cut.anchor]), cut.a, cut.b)[0]) <= 1e-12 * abs(cut.b - cut.a):
        verts = [cut.a, cut.b]
    clear = min(_clearance(ram, u, v) for u, v in zip(verts[:-1], verts[1:]))
    shortest = min(abs(v - u) for u, v in zip(verts[:-1], verts[1:]))
    eps = shrink * min(clear, 0.5 * shortest)
    segs, start = _tube(verts, eps, cut.anchor)
    tr = track(m, H, SheetPath(Line(cut.anchor, start), cut.y, cut.lam))
    _, ys, ls = tr.end
    return [(SheetPath(segs, ys, ls), 1.0)]


def _tube(verts, eps, anchor):
    """Closed loop at distance ``eps`` around the polyline ``verts``.

    It starts on the left offset next to ``anchor``, runs towards the last
    vertex, turns around it, returns along the right offset and turns around
    the first vertex. Returns (segments, start point).
    """
    v = [complex(z) for z in verts]
    K = len(v) - 1
    nrm = [1j * (v[k + 1] - v[k]) / abs(v[k + 1] - v[k]) for k in range(K)]
    off = [nrm[0]]
    for k in range(1, K):
        s = nrm[k - 1] + nrm[k]
        off.append(2 * s / abs(s) ** 2)
    off.append(nrm[-1])
    left = [v[k] + eps * off[k] for k in range(K + 1)]
    right = [v[k] - eps * off[k] for k in range(K + 1)]
    j = min(range(K + 1), key=lambda k: abs(v[k] - anchor))
    if K == 1:
        start = 0.5 * (left[0] + left[1])
        fwd = [start, left[1]]
        back = [left[0], start]
    else:
        start = left[j]
        fwd = left[j:]
        back = left[: j + 1]
    th_end = np.angle(nrm[-1])
    th_start = np.angle(-nrm[0])
    segs = polyline(fwd, smooth=False)
    segs.append(Arc(v[-1], eps, th_end, th_end - np.pi))
    segs += polyline(right[::-1], smooth=False)
    segs.append(Arc(v[0], eps, th_start, th_start - np.pi))
    segs += polyline(back, smooth=False)
    return segs, start


def reintegrate_normalization(pd: PeriodData, rtol: float = PERIOD_RTOL) -> np.ndarray:
    """Periods of the normalised basis over independent cycle representatives."""
    m, H = pd.model, pd.H
    rows = []
    for c in pd.cuts:
        tot = 0
        for path, factor in cycle_loop(m, H, c):
            tot = tot + factor * integrate(m, H, path, pd.normalized, rtol=rtol).value
        rows.append(tot)
    return np.array(rows)


# --- angle coordinates ----------------------------------------------------------


def default_base_point(m: SpectralModel, H) -> SpectralPoint:
    """First fixed point of λ -> -λ in lexicographic order."""
    fps = fixed_points(m, H) if m.is_even else []
    if not fps:
        raise ValueError(f"{m.lie} has no σ-fixed smooth point; a base point must be supplied")
    return fps[0]


def _matches(m, end, target, tol=1e-6):
    x, y, lam = end
    wy = max(1.0, abs(target.x)) ** (m.g + 0.5)
    wl = max(1.0, abs(target.x)) ** (m.g - 1)
    return abs(x - target.x) <= tol * max(1.0, abs(target.x)) and abs(y - target.y) <= tol * wy and abs(lam - target.lam) <= 1e-4 * wl


def path_between(m: SpectralModel, H, start: SpectralPoint, target: SpectralPoint):
    """A path from ``start`` whose continuation ends at ``target``.

    A connector polyline (the straight segment, else a one-waypoint detour)
    is tracked from every point of the fibre over ``start.x``; a word in the
    keyhole loops at ``start.x`` then moves ``start`` onto the fibre point
    whose continuation reaches ``target``. Returns (SheetPath, Track).
    """
    a, b = complex(start.x), complex(target.x)
    span = max(abs(b - a), 0.2)
    connectors = [[a, b]] + [[a, 0.5 * (a + b) + 0.5 * span * np.exp(2j * np.pi * k / 6), b] for k in range(6)]
    gens = None
    for pts in connectors:
        segs = polyline(pts)
        try:
            tr = track(m, H, SheetPath(segs, start.y, start.lam))
            if _matches(m, tr.end, target):
                return SheetPath(segs, start.y, start.lam), tr
        except TrackingLoss:
            continue
        gens = gens or loop_generators(m, H, a, start.y)
        s0 = _fibre_index(m, gens.fibre, start.y, start.lam, a)
        for goal, (y, lam) in enumerate(gens.fibre):
            try:
                if not _matches(m, track(m, H, SheetPath(segs, y, lam)).end, target):
                    continue
                word = loop_word(gens, s0, goal)
            except TrackingLoss:
                continue
            path = SheetPath(word + segs, start.y, start.lam)
            tr = track(m, H, path)
            if _matches(m, tr.end, target):
                return path, tr
    raise TrackingLoss("no path found whose continuation ends on the requested sheet")


@dataclass
class AngleResult:
    phi: np.ndarray
    base: object
    paths: list
    integrals: np.ndarray

    def to_json(self) -> dict:
        return {"phi": [_pair(v) for v in self.phi], "per_point": _cmat(self.integrals)}


@dataclass
class OrbitBase:
    """Base data for curves without σ-fixed points: Q1 = σ(Q2) and ρ: Q2 -> Q1."""

    Q1: SpectralPoint
    Q2: SpectralPoint
    rho: SheetPath


def orbit_base(m: SpectralModel, H, x=None) -> OrbitBase:
    """Deterministic σ-orbit base: the first clear point near the centroid of the base roots."""
    ram = ramification_x(m, H)
    if x is None:
        c = np.mean(m.base.roots)
        cands = [c + 0.35 * r * np.exp(2j * np.pi * k / 8) for r in (0, 1, 2) for k in range(8 if r else 1)]
        x = max(cands, key=lambda z: float(np.min(np.abs(ram - z))))
    y = m.base.lift(x, 0).y
    lam = m.roots_lambda(H, x, y)[0]
    Q2 = SpectralPoint(complex(x), complex(y), complex(lam), "Q2")
    Q1 = SpectralPoint(complex(x), complex(y), complex(-lam), "Q1")
    return OrbitBase(Q1, Q2, sigma_loop(m, H, x, y, lam))


def angle_coordinates(m: SpectralModel, H, d, base=None, paths=None, normalization=None, rtol: float = 1e-10) -> AngleResult:
    """φ_j = Σ_i ∫ from the base point to (x_i, y_i, λ_i) of ω_j.

    ``base`` is a :class:`SpectralPoint` fixed by λ -> -λ (default: the
    first σ-fixed branch point) or an :class:`OrbitBase` (default when no
    fixed point exists, as for so(4)); in the latter case each point
    contributes η(P_i) = ∫_{Q1}^{P_i} ω + ½ ∫_ρ ω. ``paths[i]``, when given,
    is a SheetPath from divisor point i to a fixed base point, or from Q1 to
    point i for an orbit base. With ``normalization`` (a
    :class:`PeriodData`) the normalised basis is used.
    """
    H = m.check_H(H)
    basis = differential_basis(m, H)
    f = basis.values if normalization is None else normalization.normalized
    if base is None:
        base = default_base_point(m, H) if (m.is_even and fixed_points(m, H)) else None
        if base is None and m.is_even:
            base = orbit_base(m, H)
        if base is None:
            raise ValueError(f"{m.lie} has no involution; a base point must be supplied")
    orbit = isinstance(base, OrbitBase)
    half_rho = 0.5 * integrate(m, H, base.rho, f, rtol=rtol).value if orbit else 0.0
    rows, used = [], []
    for i in range(len(d)):
        P = SpectralPoint(complex(d.x[i]), complex(d.y[i]), complex(d.lam[i]))
        start, target, sign = (base.Q1, P, 1.0) if orbit else (P, base, -1.0)
        if paths is None:
            if _matches(m, (start.x, start.y, start.lam), target, 1e-13):
                rows.append(np.zeros(m.N, dtype=complex) + half_rho)
                used.append(None)
                continue
            path, tr = path_between(m, H, start, target)
        else:
            path = paths[i]
            tr = track(m, H, path)
            if not _matches(m, tr.end, target):
                raise TrackingLoss(f"path {i} does not end at the requested point")
        rows.append(sign * integrate(m, H, tr, f, rtol=rtol).value + half_rho)
        used.append(path)
    rows = np.array(rows)
    return AngleResult(rows.sum(axis=0), base, used, rows)


# --- Prym map for so(4) -------------------------------------------------------


def sigma_path(path: SheetPath) -> SheetPath:
    """Same x-path started from the σ-image λ0 -> -λ0."""
    return SheetPath(list(path.segments), path.y0, -path.lam0)


def _keyhole(x0, c, eps):
    d = (c - x0) / abs(c - x0)
    p = c - eps * d
    th = np.angle(-d)
    return [Line(x0, p), Arc(c, eps, th, th + 2 * np.pi), Line(p, x0)]


def _fibre(m, H, x0, y0):
    pts = []
    for y in (y0, -y0):
        for lam in m.roots_lambda(H, x0, y):
            pts.append((complex(y), complex(lam)))
    return pts


def _fibre_index(m, fib, y, lam, x0):
    wy, wl = max(1.0, abs(x0)) ** (m.g + 0.5), max(1.0, abs(x0)) ** (m.g - 1)
    d = [abs(y - a) / wy + abs(lam - b) / wl for a, b in fib]
    return int(np.argmin(d))


@dataclass
class LoopGenerators:
    """Keyhole loops at x0 and the permutations they induce on the fibre."""

    x0: complex
    fibre: list
    loops: list


def loop_generators(m: SpectralModel, H, x0, y0) -> LoopGenerators:
    """Track a keyhole loop around each ramification projection on every fibre point."""
    ram = ramification_x(m, H)
    fib = _fibre(m, H, x0, y0)
    loops = []
    for c in ram:
        others = ram[np.abs(ram - c) > 1e-9]
        eps = 0.3 * float(np.min(np.abs(others - c)))
        # any loop shape is admissible; only near-collisions are excluded
        if abs(c - x0) < 2 * eps or _segment_distance(others, x0, c - eps * (c - x0) / abs(c - x0)).min() < 0.2 * eps:
            continue
        segs = _keyhole(x0, c, eps)
        perm = []
        for y, lam in fib:
            try:
                tr = track(m, H, SheetPath(segs, y, lam))
            except TrackingLoss:
                perm = None
                break
            _, ye, le = tr.end
            perm.append(_fibre_index(m, fib, ye, le, x0))
        if perm is not None and perm != list(range(len(fib))):
            loops.append((segs, perm))
    return LoopGenerators(complex(x0), fib, loops)


def loop_word(gens: LoopGenerators, start: int, goal: int) -> list:
    """Segments of the shortest loop word carrying fibre point ``start`` to ``goal``."""
    seen = {start: []}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        word = seen[s]
        if s == goal:
            return sum((list(gens.loops[k][0]) for k in word), [])
        for k, (_, perm) in enumerate(gens.loops):
            t = perm[s]
            if t not in seen:
                seen[t] = word + [k]
                queue.append(t)
    raise TrackingLoss("the loop group does not connect the two fibre points")


def sigma_loop(m: SpectralModel, H, x0, y0, lam0) -> SheetPath:
    """A closed x-loop at x0 whose continuation takes (y0, λ0) to (y0, -λ0)."""
    if not m.is_even:
        raise ValueError("λ -> -λ is not a symmetry of this model")
    gens = loop_generators(m, H, x0, y0)
    start = _fibre_index(m, gens.fibre, y0, lam0, x0)
    goal = _fibre_index(m, gens.fibre, y0, -lam0, x0)
    return SheetPath(loop_word(gens, start, goal), y0, lam0)


@dataclass
class PrymValue:
    eta: np.ndarray
    gamma1: np.ndarray
    rho: np.ndarray

    def to_json(self) -> dict:
        return {"eta": [_pair(v) for v in self.eta]}


def prym_map_so4(m: SpectralModel, H, P, Q1, Q2, rho: SheetPath, gamma1: SheetPath | None, normalization=None, rtol=1e-10) -> PrymValue:
    """η(P) = ½ (2∫_{γ1} ω + ∫_ρ ω) with γ1 from Q1 to P and ρ from Q2 to Q1.

    ``gamma1`` may be ``None`` when P = Q1 (trivial path).
    """
    if m.lie.series != "D" or m.lie.rank != 2:
        raise ValueError("the so(4) Prym map needs a D2 model")
    H = m.check_H(H)
    basis = differential_basis(m, H)
    f = basis.values if normalization is None else normalization.normalized
    for pt, other in ((Q1, Q2),):
        if abs(pt.x - other.x) > 1e-12 * max(1.0, abs(pt.x)) or abs(pt.lam + other.lam) > 1e-9 * max(1.0, abs(pt.lam)):
            raise ValueError("Q1 and Q2 must be exchanged by λ -> -λ")
    tr = track(m, H, rho)
    if not _matches(m, tr.end, Q1):
        raise TrackingLoss("ρ does not end at Q1")
    i_rho = integrate(m, H, tr, f, rtol=rtol).value
    if gamma1 is None:
        i_g = np.zeros(m.N, dtype=complex)
    else:
        tg = track(m, H, gamma1)
        if not _matches(m, tg.end, P):
            raise TrackingLoss("γ1 does not end at P")
        i_g = integrate(m, H, tg, f, rtol=rtol).value
    return PrymValue(0.5 * (2 * i_g + i_rho), i_g, i_rho)


def prym_path_identities(m: SpectralModel, H, rng, count: int = 10, rtol: float = 1e-11) -> dict:
    """Worst |∫_π ω + ∫_{σπ} ω| over random paths π and |∫_{ρ+σρ} ω| over random ρ."""
    basis = differential_basis(m, H)
    worst_pi = worst_rho = 0.0
    ram = ramification_x(m, H)
    for _ in range(count):
        while True:
            a, b = (rng.uniform(-1.5, 1.5, 2) @ [1, 1j] for _ in range(2))
            if _clearance(ram, a, b) > 0.05:
                break
        y0 = np.sqrt(complex(m.base.P(a)))
        lam0 = m.roots_lambda(H, a, y0)[rng.integers(m.n)]
        p = SheetPath(Line(a, b), y0, lam0)
        i1 = integrate(m, H, p, basis.values, rtol=rtol).value
        i2 = integrate(m, H, sigma_path(p), basis.values, rtol=rtol).value
        worst_pi = max(worst_pi, float(np.abs(i1 + i2).max() / max(1.0, np.abs(i1).max())))
        rho = sigma_loop(m, H, a, y0, lam0)
        r1 = integrate(m, H, rho, basis.values, rtol=rtol)
        _, ye, le = r1.track.end
        sr = SheetPath(list(rho.segments), ye, le)
        r2 = integrate(m, H, sr, basis.values, rtol=rtol)
        worst_rho = max(worst_rho, float(np.abs(r1.value + r2.value).max() / max(1.0, np.abs(r1.value).max())))
    return {"path_antisymmetry": worst_pi, "rho_closure": worst_rho, "count": count}
