"""Parametrised x-paths and analytic continuation of (y, λ) along them.

A :class:`SheetPath` is a chain of segments in the x-plane together with a
starting point (y0, λ0) on the spectral curve. :func:`track` continues the
fibre coordinates along the chain by nearest-root matching on an adaptively
refined grid, and :func:`integrate` applies composite Gauss-Legendre
quadrature to the tracked path.

Each segment is parametrised by s in [0, 1]. Straight segments use the
substitution u = (1 - cos πs)/2, so that square-root singularities at the
endpoints (cuts that end on branch points) become analytic in s.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import aberth_batch
from .errors import NonConvergence, TrackingLoss

COALESCE_TOL = 1e-5
MIN_SPACING = 1e-11
MAX_REFINE = 80
INITIAL_PANELS = 16
ACCEPT_RTOL = 1e-8


def _smooth(s):
    return 0.5 * (1.0 - np.cos(np.pi * s)), 0.5 * np.pi * np.sin(np.pi * s)


class Segment:
    """Base class; subclasses implement ``x(s)`` and ``dx(s)``."""

    open_end = False

    def x(self, s):
        raise NotImplementedError

    def dx(self, s):
        raise NotImplementedError

    @property
    def start(self) -> complex:
        return complex(self.x(np.array([0.0]))[0])

    @property
    def end(self) -> complex:
        return complex(self.x(np.array([1.0]))[0])

    def reversed(self) -> "Segment":
        if self.open_end:
            raise ValueError("cannot reverse a segment that ends at infinity")
        return _Reversed(self)


class Line(Segment):
    def __init__(self, a, b, smooth: bool = True):
        self.a, self.b, self.smooth = complex(a), complex(b), smooth

    def x(self, s):
        u = _smooth(s)[0] if self.smooth else s
        return self.a + (self.b - self.a) * u

    def dx(self, s):
        du = _smooth(s)[1] if self.smooth else np.ones_like(s)
        return (self.b - self.a) * du

    def __repr__(self):
        return f"Line({self.a:.4g}, {self.b:.4g})"


class Arc(Segment):
    """x = c + r exp(iθ) with θ running linearly from ``t0`` to ``t1``."""

    def __init__(self, center, radius, t0, t1):
        self.c, self.r, self.t0, self.t1 = complex(center), float(radius), float(t0), float(t1)

    def x(self, s):
        return self.c + self.r * np.exp(1j * (self.t0 + (self.t1 - self.t0) * s))

    def dx(self, s):
        th = self.t0 + (self.t1 - self.t0) * s
        return 1j * self.r * (self.t1 - self.t0) * np.exp(1j * th)

    def __repr__(self):
        return f"Arc({self.c:.4g}, r={self.r:.3g}, {self.t0:.3f}->{self.t1:.3f})"


class Ray(Segment):
    """x = a + d u/(1-u), reaching infinity at s = 1."""

    open_end = True

    def __init__(self, a, direction):
        self.a, self.d = complex(a), complex(direction)

    def x(self, s):
        u = _smooth(s)[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.a + self.d * u / (1.0 - u)

    def dx(self, s):
        u, du = _smooth(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.d * du / (1.0 - u) ** 2

    @property
    def end(self) -> complex:
        return complex(np.inf)

    def __repr__(self):
        return f"Ray({self.a:.4g}, dir={self.d:.3g})"


class HermitePath(Segment):
    """Piecewise cubic Hermite interpolant through (t_k, x_k, x'_k)."""

    def __init__(self, t, x, v):
        self.t = np.asarray(t, dtype=float)
        self.xk = np.asarray(x, dtype=complex)
        self.vk = np.asarray(v, dtype=complex)
        if len(self.t) < 2:
            raise ValueError("need at least two samples")

    def _locate(self, s):
        s = np.asarray(s, dtype=float)
        T = self.t[0] + (self.t[-1] - self.t[0]) * s
        k = np.clip(np.searchsorted(self.t, T, side="right") - 1, 0, len(self.t) - 2)
        h = self.t[k + 1] - self.t[k]
        return k, (T - self.t[k]) / h, h

    def x(self, s):
        k, w, h = self._locate(s)
        h00 = 2 * w**3 - 3 * w**2 + 1
        h10 = w**3 - 2 * w**2 + w
        h01 = -2 * w**3 + 3 * w**2
        h11 = w**3 - w**2
        return h00 * self.xk[k] + h10 * h * self.vk[k] + h01 * self.xk[k + 1] + h11 * h * self.vk[k + 1]

    def dx(self, s):
        k, w, h = self._locate(s)
        d00 = (6 * w**2 - 6 * w) / h
        d10 = 3 * w**2 - 4 * w + 1
        d01 = (-6 * w**2 + 6 * w) / h
        d11 = 3 * w**2 - 2 * w
        dxdt = d00 * self.xk[k] + d10 * self.vk[k] + d01 * self.xk[k + 1] + d11 * self.vk[k + 1]
        return dxdt * (self.t[-1] - self.t[0])

    def breakpoints(self):
        return (self.t - self.t[0]) / (self.t[-1] - self.t[0])


class _Reversed(Segment):
    def __init__(self, seg):
        self.seg = seg

    def x(self, s):
        return self.seg.x(1.0 - np.asarray(s))

    def dx(self, s):
        return -self.seg.dx(1.0 - np.asarray(s))

    def reversed(self):
        return self.seg

    def __repr__(self):
        return f"reversed({self.seg!r})"


def polyline(points, smooth: bool = True) -> list:
    pts = [complex(p) for p in points]
    return [Line(a, b, smooth) for a, b in zip(pts[:-1], pts[1:])]


@dataclass
class SheetPath:
    """An x-path with the fibre point (y0, λ0) over its start."""

    segments: list
    y0: complex
    lam0: complex

    def __post_init__(self):
        if isinstance(self.segments, Segment):
            self.segments = [self.segments]
        self.segments = list(self.segments)
        if not self.segments:
            raise ValueError("a path needs at least one segment")

    @property
    def start(self) -> complex:
        return self.segments[0].start

    def then(self, other: "SheetPath") -> "SheetPath":
        """Concatenate; the fibre data of ``other`` is ignored (continuation)."""
        return SheetPath(self.segments + other.segments, self.y0, self.lam0)


# --- tracking ----------------------------------------------------------------


@dataclass
class TrackedSegment:
    segment: Segment
    s: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray


@dataclass
class Track:
    pieces: list = field(default_factory=list)

    @property
    def end(self):
        p = self.pieces[-1]
        return complex(p.x[-1]), complex(p.y[-1]), complex(p.lam[-1])

    @property
    def start(self):
        p = self.pieces[0]
        return complex(p.x[0]), complex(p.y[0]), complex(p.lam[0])

    @property
    def closed_end(self) -> bool:
        return not self.pieces[-1].segment.open_end

    def reversed_path(self) -> SheetPath:
        if not self.closed_end:
            raise ValueError("path ends at infinity")
        _, y, lam = self.end
        segs = [p.segment.reversed() for p in reversed(self.pieces)]
        return SheetPath(segs, y, lam)


def _weights(m, x):
    ax = np.maximum(1.0, np.abs(x))
    return ax ** (m.g + 0.5), ax ** (m.g - 1.0)


def _lambda_roots(m, H, x, y):
    c = m.lambda_coeffs(H, x, y)
    if m.n == 1:
        return -c[:, :1]
    z, _ = aberth_batch(c)
    return z


def _y_candidates(m, x):
    r = np.sqrt(m.base.P_factored(x))
    return np.stack([r, -r], axis=1)


def _pick(cands, pred, allow_coalesced):
    """Nearest candidate to ``pred``; ok when the gap to its nearest rival is at
    least twice the predictor displacement (or the candidates coalesce)."""
    d = np.abs(cands - pred)
    i = int(np.argmin(d))
    others = np.delete(cands, i)
    gap = float(np.min(np.abs(others - cands[i]))) if others.size else np.inf
    if gap >= 2.0 * d[i]:
        return i, True
    if allow_coalesced and gap <= COALESCE_TOL * (1.0 + abs(cands[i])):
        return i, True
    return i, False


def _follow(cands, v0, s, exact_start, closed_end):
    """Sequential matching along the grid; ``cands`` is (K, c) normalised."""
    K = len(s)
    out = np.empty(K, dtype=complex)
    bad = []
    i, ok = _pick(cands[0], v0, True)
    if exact_start and not ok:
        bad.append(0)
    out[0] = cands[0, i]
    for k in range(1, K):
        if k >= 2:
            pred = out[k - 1] + (out[k - 1] - out[k - 2]) * (s[k] - s[k - 1]) / (s[k - 1] - s[k - 2])
        else:
            pred = out[0]
        i, ok = _pick(cands[k], pred, closed_end and k == K - 1)
        if not ok:
            bad.append(k)
        out[k] = cands[k, i]
    return out, bad


def _track_segment(m, H, seg, y0, lam0, s):
    for _ in range(MAX_REFINE):
        x = seg.x(s)
        wy, wl = _weights(m, x)
        ycand = _y_candidates(m, x) / wy[:, None]
        yn, bad_y = _follow(ycand, y0 / wy[0], s, True, not seg.open_end)
        y = yn * wy
        lc = _lambda_roots(m, H, x, y) / wl[:, None]
        ln, bad_l = _follow(lc, lam0 / wl[0], s, True, not seg.open_end)
        bad = sorted(set(bad_y) | set(bad_l))
        if not bad:
            return TrackedSegment(seg, s, x, y, ln * wl)
        if bad[0] == 0:
            start_gap = np.min(np.abs(np.diff(np.sort_complex(lc[0])))) if lc.shape[1] > 1 else np.inf
            raise TrackingLoss(
                f"ambiguous start on {seg!r}: the start point is a ramification point or not on the curve "
                f"(gap {start_gap:.2e})"
            )
        new = set()
        for k in bad:
            new.add(0.5 * (s[k - 1] + s[k]))
            if k >= 2:
                new.add(0.5 * (s[k - 2] + s[k - 1]))
        if min(np.diff(s)) < MIN_SPACING:
            raise TrackingLoss(f"root matching stayed ambiguous on {seg!r} near s={s[bad[0]]:.6f}")
        s = np.union1d(s, list(new))
    raise TrackingLoss(f"grid refinement limit reached on {seg!r}")


def _initial_grid(seg, panels):
    if isinstance(seg, HermitePath):
        s = np.union1d(np.linspace(0, 1, panels + 1), seg.breakpoints())
    else:
        s = np.linspace(0.0, 1.0, panels + 1)
    return s[:-1] if seg.open_end else s


def track(m, H, path: SheetPath, panels: int = INITIAL_PANELS, grids=None) -> Track:
    """Continue (y, λ) along ``path``.

    Raises
    ------
    TrackingLoss
        When root matching cannot be made unambiguous by grid refinement.
    """
    H = m.check_H(H)
    y, lam = complex(path.y0), complex(path.lam0)
    out = Track()
    for idx, seg in enumerate(path.segments):
        if out.pieces and out.pieces[-1].segment.open_end:
            raise ValueError("only the last segment may end at infinity")
        s = grids[idx] if grids is not None else _initial_grid(seg, panels)
        piece = _track_segment(m, H, seg, y, lam, s)
        out.pieces.append(piece)
        y, lam = complex(piece.y[-1]), complex(piece.lam[-1])
    return out


# --- quadrature --------------------------------------------------------------


def _lagrange(ts, vs, t):
    """Values at ``t`` of the polynomial through (ts, vs); vs has shape (k,)."""
    out = np.zeros(np.shape(t), dtype=complex)
    for i in range(len(ts)):
        li = np.ones(np.shape(t))
        for j in range(len(ts)):
            if j != i:
                li = li * (t - ts[j]) / (ts[i] - ts[j])
        out = out + vs[i] * li
    return out


def _panel_nodes(piece, k, nodes01, open_last):
    s = piece.s
    a = s[k]
    b = 1.0 if open_last else s[k + 1]
    t = a + (b - a) * nodes01
    if open_last:
        lo = max(0, k - 2)
        idx = np.arange(lo, k + 1)
    else:
        lo = max(0, min(k - 1, len(s) - 4))
        idx = np.arange(lo, min(len(s), lo + 4))
    return t, b - a, idx


def _panel_values(m, H, piece, integrand, nodes01, wts, open_last_flag=True):
    """Per-panel quadrature contributions; returns (values (P, M), bad panels)."""
    seg = piece.segment
    npan = len(piece.s) - (0 if seg.open_end else 1)
    ts, lens, preds_y, preds_l = [], [], [], []
    for k in range(npan):
        open_last = seg.open_end and k == npan - 1
        t, h, idx = _panel_nodes(piece, k, nodes01, open_last)
        wy, wl = _weights(m, piece.x[idx])
        wyt, wlt = _weights(m, seg.x(t))
        preds_y.append(_lagrange(piece.s[idx], piece.y[idx] / wy, t) * wyt)
        preds_l.append(_lagrange(piece.s[idx], piece.lam[idx] / wl, t) * wlt)
        ts.append(t)
        lens.append(h)
    t = np.concatenate(ts)
    x = seg.x(t)
    wy, wl = _weights(m, x)
    yc = _y_candidates(m, x)
    py = np.concatenate(preds_y)
    pl = np.concatenate(preds_l)
    iy = np.argmin(np.abs(yc - py[:, None]), axis=1)
    y = yc[np.arange(len(t)), iy]
    lc = _lambda_roots(m, H, x, y)
    dl = np.abs(lc - pl[:, None]) / wl[:, None]
    il = np.argmin(dl, axis=1)
    lam = lc[np.arange(len(t)), il]
    # ambiguity test at the nodes, same rule as the tracker
    ok = np.ones(len(t), dtype=bool)
    gy = np.abs(2 * y) / wy
    ok &= gy >= 2 * np.abs(y - py) / wy
    if lc.shape[1] > 1:
        sep = np.abs(lc - lam[:, None]) / wl[:, None]
        sep[np.arange(len(t)), il] = np.inf
        ok &= sep.min(axis=1) >= 2 * dl[np.arange(len(t)), il]
    f = np.asarray(integrand(x, y, lam))
    f = f.reshape(len(t), -1) * seg.dx(t)[:, None]
    nn = len(nodes01)
    vals = np.zeros((npan, f.shape[1]), dtype=complex)
    l1 = np.zeros(npan)
    bad = []
    for k in range(npan):
        blk = f[k * nn : (k + 1) * nn]
        vals[k] = lens[k] * (wts @ blk)
        l1[k] = lens[k] * float(wts @ np.abs(blk).max(axis=1))
        if not ok[k * nn : (k + 1) * nn].all():
            bad.append(k)
    return vals, l1, bad


@dataclass
class Quadrature:
    value: np.ndarray
    error: float
    panels: int
    track: Track


def integrate(
    m, H, path, integrand, order: int = 8, rtol: float = 1e-10, accept: float = ACCEPT_RTOL, max_doublings: int = 8
) -> Quadrature:
    """∫ integrand(x, y, λ) dx along the tracked path.

    ``integrand`` maps node arrays to values of shape (K,) or (K, M). The
    panel set is refined until doubling the Gauss order changes every
    component by at most ``rtol`` relative to max(|value|, 1e-3·L1).

    Endpoints on ramification points are only known to rounding, which
    limits the attainable accuracy to roughly the square root of machine
    epsilon there; when refinement stagnates the best estimate is returned
    if it meets ``accept``.

    ``path`` may be a :class:`SheetPath` or an existing :class:`Track`.

    Raises
    ------
    NonConvergence
        If no refinement level meets ``accept``.
    """
    H = m.check_H(H)
    tr = path if isinstance(path, Track) else track(m, H, path)
    g1 = np.polynomial.legendre.leggauss(order)
    g2 = np.polynomial.legendre.leggauss(2 * order)
    n1, w1 = (g1[0] + 1) / 2, g1[1] / 2
    n2, w2 = (g2[0] + 1) / 2, g2[1] / 2
    best, stall = None, 0
    for _ in range(max_doublings + 1):
        tot1 = tot2 = 0.0
        l1 = 0.0
        refine = {}
        for idx, piece in enumerate(tr.pieces):
            v1, _, b1 = _panel_values(m, H, piece, integrand, n1, w1)
            v2, a2, b2 = _panel_values(m, H, piece, integrand, n2, w2)
            tot1 = tot1 + v1.sum(axis=0)
            tot2 = tot2 + v2.sum(axis=0)
            l1 += a2.sum()
            diff = np.abs(v2 - v1).max(axis=1)
            refine[idx] = (diff, sorted(set(b1) | set(b2)))
        err = float(np.max(np.abs(tot2 - tot1)))
        floor = max(float(np.max(np.abs(tot2))), 1e-3 * l1, 1e-300)
        ambiguous = any(b for _, b in refine.values())
        if not ambiguous:
            total = sum(len(p.s) for p in tr.pieces)
            result = Quadrature(np.asarray(tot2), err, total, tr)
            if err <= rtol * floor:
                return result
            if best is None or err < best.error:
                best, stall = result, 0
            else:
                stall += 1
            if stall >= 2:
                break
        # refine panels with ambiguity or with the largest disagreement
        grids = []
        for idx, piece in enumerate(tr.pieces):
            diff, bad = refine[idx]
            thresh = rtol * floor / max(len(diff), 1)
            sel = set(bad) | set(np.flatnonzero(diff > thresh).tolist())
            s = piece.s
            ext = np.r_[s, 1.0] if piece.segment.open_end else s
            mids = [0.5 * (ext[k] + ext[k + 1]) for k in sel]
            grids.append(np.union1d(s, mids))
        y0, lam0 = tr.pieces[0].y[0], tr.pieces[0].lam[0]
        sp = SheetPath([p.segment for p in tr.pieces], y0, lam0)
        tr = track(m, H, sp, grids=grids)
    if best is not None and best.error <= accept * floor:
        return best
    raise NonConvergence(f"quadrature did not converge (error {err:.2e})")
