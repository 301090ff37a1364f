"""Separation of variables: from N points on the spectral curve to H.

For the series A, B and C the separation relations R(x_i, y_i, λ_i; H) = 0
are linear in H. For D_l they are quadratic in the Pfaffian coefficients;
for so(4) on a genus-2 base they reduce to a single quartic, solved here in
radicals, and in general they are solved by damped Newton iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .algebra import CPoly, poly_roots, solve_cramer, solve_dense, solve_quartic_radicals
from .errors import EliminationDegenerate, NonConvergence, NonGeneric, SchemaError, SingularMatrix
from .spectral import SpectralModel, genericity_check, parse_complex


@dataclass
class SeparatingDivisor:
    """N points (x_i, y_i, λ_i); the order of the points carries no meaning."""

    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=complex).ravel()
        self.y = np.asarray(self.y, dtype=complex).ravel()
        self.lam = np.asarray(self.lam, dtype=complex).ravel()
        if not (len(self.x) == len(self.y) == len(self.lam)):
            raise ValueError("x, y and lam must have equal length")

    def __len__(self):
        return len(self.x)

    def permuted(self, order) -> "SeparatingDivisor":
        order = np.asarray(order)
        return SeparatingDivisor(self.x[order], self.y[order], self.lam[order])

    def copy(self) -> "SeparatingDivisor":
        return SeparatingDivisor(self.x.copy(), self.y.copy(), self.lam.copy())

    def to_json(self) -> dict:
        pts = []
        for x, y, l in zip(self.x, self.y, self.lam):
            pts.append({"x": [x.real, x.imag], "y": [y.real, y.imag], "lambda": [l.real, l.imag]})
        return {"points": pts}

    @classmethod
    def from_json(cls, data) -> "SeparatingDivisor":
        if not isinstance(data, dict) or "points" not in data:
            raise SchemaError("missing 'points'", "divisor")
        if not isinstance(data["points"], list):
            raise SchemaError("expected a list", "divisor.points")
        xs, ys, ls = [], [], []
        for i, p in enumerate(data["points"]):
            if not isinstance(p, dict):
                raise SchemaError("expected an object", f"divisor.points[{i}]")
            for key in ("x", "y", "lambda"):
                if key not in p:
                    raise SchemaError(f"missing {key!r}", f"divisor.points[{i}]")
            x, y, l = (parse_complex(p[k], f"divisor.points[{i}].{k}") for k in ("x", "y", "lambda"))
            xs.append(x)
            ys.append(y)
            ls.append(l)
        return cls(xs, ys, ls)


@dataclass
class SolveReport:
    method: str
    H: np.ndarray | None
    candidates: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    condition: float = float("nan")
    iterations: int = 0

    @property
    def residual(self) -> float:
        return float(min(self.residuals)) if self.residuals else float("nan")

    def to_json(self) -> dict:
        enc = lambda v: [[h.real, h.imag] for h in v]  # noqa: E731
        out = {
            "method": self.method,
            "H": enc(self.H) if self.H is not None else None,
            "residual": self.residual,
            "condition": self.condition,
        }
        if self.candidates:
            out["candidates"] = [{"H": enc(c), "residual": r} for c, r in zip(self.candidates, self.residuals)]
        if self.iterations:
            out["iterations"] = self.iterations
        return out


def divisor_residual(m: SpectralModel, H, d: SeparatingDivisor) -> float:
    return float(np.max(m.relative_residual(H, d.x, d.y, d.lam)))


def sample_divisor(m: SpectralModel, H, seed=None, radius: float = 1.0, check: bool = True) -> SeparatingDivisor:
    """Draw N random points of the spectral curve of ``H``.

    The x_i are complex Gaussian with standard deviation ``radius``, the base
    sheet and the λ-root are chosen uniformly.
    """
    H = m.check_H(H)
    if check:
        rep = genericity_check(m, H)
        if not rep.generic:
            raise NonGeneric("; ".join(rep.issues))
    rng = np.random.default_rng(seed)
    N = m.N
    while True:
        x = radius * (rng.normal(size=N) + 1j * rng.normal(size=N)) / np.sqrt(2)
        d = np.abs(x[:, None] - x[None, :]) + np.eye(N)
        if d.min() > 1e-3 * radius:
            break
    y = np.sqrt(m.base.P(x)) * np.where(rng.integers(0, 2, N) == 1, -1, 1)
    lam = np.empty(N, dtype=complex)
    for i in range(N):
        roots = poly_roots(CPoly(m.lambda_coeffs(H, x[i], y[i]))).roots
        lam[i] = roots[rng.integers(0, len(roots))]
    return SeparatingDivisor(x, y, lam)


def separation_matrix(m: SpectralModel, d: SeparatingDivisor):
    """M[i, j] = ∂R/∂H_j at point i and rhs[i] = -R(point i; H = 0)."""
    if m.lie.series == "D":
        raise ValueError("separation relations are not linear for series D")
    zero = np.zeros(m.N, dtype=complex)
    M = m.dR_dH(zero, d.x, d.y, d.lam)
    rhs = -m.eval_R(zero, d.x, d.y, d.lam)
    return M, rhs


def solve_hamiltonians_linear(m: SpectralModel, d: SeparatingDivisor, method: str = "elimination") -> SolveReport:
    M, rhs = separation_matrix(m, d)
    if len(d) != m.N:
        raise ValueError(f"need {m.N} points, got {len(d)}")
    if method == "cramer":
        sol = solve_dense(M, rhs)  # singularity and conditioning checks
        H = solve_cramer(M, rhs)
        cond = sol.condition
    else:
        sol = solve_dense(M, rhs)
        H, cond = sol.x, sol.condition
    return SolveReport("linear" if method != "cramer" else "cramer", H, [H], [divisor_residual(m, H, d)], cond)


# --- so(4), genus 2 ---------------------------------------------------------


@dataclass
class So4Elimination:
    """Intermediate data of the so(4) reduction, kept for inspection."""

    annihilators: np.ndarray  # (3, 6) covectors c^(j)
    quadrics: np.ndarray  # (3, 3, 3) Gram matrices S_j
    constants: np.ndarray  # (3,) k_j
    quartic: np.ndarray  # ascending coefficients of the eliminant


def _so4_check(m: SpectralModel, d: SeparatingDivisor):
    if m.lie.series != "D" or m.lie.rank != 2 or m.g != 2:
        raise ValueError("the radical solver handles so(4) on a genus-2 base only")
    if len(d) != 6:
        raise ValueError("so(4) at genus 2 needs 6 points")


def so4_elimination(d: SeparatingDivisor) -> So4Elimination:
    x, lam = d.x, d.lam
    V = np.stack([lam**2 * x**k for k in range(3)])  # 3 x 6
    C = scipy.linalg.null_space(V).T  # 3 x 6
    if C.shape[0] != 3:
        raise EliminationDegenerate(f"annihilator space has dimension {C.shape[0]}, expected 3")
    mon = np.stack([x**k for k in range(3)], axis=1)  # 6 x 3
    S = np.einsum("ji,ia,ib->jab", C, mon, mon)
    k = C @ lam**4
    return So4Elimination(C, S, k, np.zeros(5, complex))


def _conic_coeffs_in_t(T, s_idx, t_idx, h_idx):
    """Write v^T T v, v = (t, s, 1) in permuted slots, as a2 t^2 + a1 t + a0
    with a_i polynomials in s (ascending CPoly)."""
    tt, ss, hh = t_idx, s_idx, h_idx
    a2 = CPoly([T[tt, tt]])
    a1 = CPoly([2 * T[tt, hh], 2 * T[tt, ss]])
    a0 = CPoly([T[hh, hh], 2 * T[ss, hh], T[ss, ss]])
    return a2, a1, a0


def solve_hamiltonians_so4(m: SpectralModel, d: SeparatingDivisor, tol: float = 1e-8) -> SolveReport:
    """All solutions of the so(4) separation relations, one per ±q pair.

    The p-coefficients enter linearly: three covectors annihilating the
    columns λ_i^2 x_i^k eliminate them and leave three equations
    h^T S_j h + k_j = 0 in the Pfaffian coefficients h. Two constant-free
    combinations are conics in the projective plane; their resultant is a
    quartic, solved by radicals. Each projective solution is scaled back
    onto the affine quadrics, and p follows from a linear solve.
    """
    _so4_check(m, d)
    el = so4_elimination(d)
    S, k = el.quadrics, el.constants
    j0 = int(np.argmax(np.abs(k)))
    if abs(k[j0]) == 0:
        raise EliminationDegenerate("all constants vanish; the divisor lies on λ = 0")
    others = [j for j in range(3) if j != j0]
    T1 = k[others[0]] * S[j0] - k[j0] * S[others[0]]
    T2 = k[others[1]] * S[j0] - k[j0] * S[others[1]]

    best = None
    # dehomogenise on the coordinate giving the best-conditioned quartic
    for h_idx in range(3):
        t_idx, s_idx = [i for i in range(3) if i != h_idx]
        a2, a1, a0 = _conic_coeffs_in_t(T1, s_idx, t_idx, h_idx)
        b2, b1, b0 = _conic_coeffs_in_t(T2, s_idx, t_idx, h_idx)
        res = (a2 * b0 - a0 * b2) * (a2 * b0 - a0 * b2) - (a2 * b1 - a1 * b2) * (a1 * b0 - a0 * b1)
        c = np.zeros(5, dtype=complex)
        c[: len(res.coeffs)] = res.coeffs
        quality = abs(c[4]) / (np.max(np.abs(c)) + 1e-300)
        if best is None or quality > best[0]:
            best = (quality, c, (a2, a1, a0), (b2, b1, b0), (t_idx, s_idx, h_idx))
    quality, c, A, B, (t_idx, s_idx, h_idx) = best
    if quality < 1e-10:
        raise EliminationDegenerate("eliminant quartic degenerates")
    el.quartic = c
    s_roots = solve_quartic_radicals(c[4], c[3], c[2], c[1], c[0])

    cands, resids = [], []
    for s in s_roots:
        a2, a1, a0 = (p(s) for p in A)
        b2, b1, b0 = (p(s) for p in B)
        den = b2 * a1 - a2 * b1
        num = a2 * b0 - b2 * a0
        if abs(den) > 1e-12 * (abs(num) + abs(a1) * abs(b2) + abs(a2) * abs(b1)):
            t = num / den
        else:
            ts = np.roots([a2, a1, a0]) if a2 != 0 else np.array([-a0 / a1])
            t = ts[np.argmin([abs(b2 * tt**2 + b1 * tt + b0) for tt in ts])]
        v = np.zeros(3, dtype=complex)
        v[t_idx], v[s_idx], v[h_idx] = t, s, 1.0
        dens = np.array([v @ S[j] @ v for j in range(3)])
        jj = int(np.argmax(np.abs(dens)))
        if dens[jj] == 0:
            continue
        h = np.sqrt(-k[jj] / dens[jj]) * v
        H = _so4_complete(m, d, h)
        cands.append(H)
        resids.append(divisor_residual(m, H, d))
    if not cands:
        raise EliminationDegenerate("no candidate survived back-substitution")
    good = [i for i, r in enumerate(resids) if r < tol]
    best_i = int(np.argmin(resids))
    # zero-width sign ambiguity: H with -q is the same point of phase space
    return SolveReport(
        "radicals",
        cands[best_i] if good else None,
        [cands[i] for i in good] if good else cands,
        [resids[i] for i in good] if good else resids,
    )


def _so4_complete(m: SpectralModel, d: SeparatingDivisor, h) -> np.ndarray:
    """Recover p from λ_i^2 p(x_i) = -λ_i^4 - q(x_i)^2 (least squares over all points)."""
    x, lam = d.x, d.lam
    q = h[0] + h[1] * x + h[2] * x**2
    A = np.stack([lam**2 * x**k for k in range(3)], axis=1)
    rhs = -(lam**4) - q**2
    p, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return np.r_[p, h]


def same_up_to_q_sign(m: SpectralModel, H1, H2) -> float:
    """Relative distance between H1 and H2, modulo q -> -q for series D."""
    H1, H2 = m.check_H(H1), m.check_H(H2)
    scale = max(np.linalg.norm(H2), 1e-300)
    dist = np.linalg.norm(H1 - H2) / scale
    for b in m.layout.blocks:
        if b.pfaffian:
            H3 = H2.copy()
            H3[b.slice] *= -1
            dist = min(dist, np.linalg.norm(H1 - H3) / scale)
    return float(dist)


# --- Newton ------------------------------------------------------------------


def solve_hamiltonians_dl_numeric(
    m: SpectralModel,
    d: SeparatingDivisor,
    init,
    max_iter: int = 100,
    step_tol: float = 1e-12,
    tol: float = 1e-9,
) -> SolveReport:
    """Damped Newton iteration on the full separation relations."""
    if len(d) != m.N:
        raise ValueError(f"need {m.N} points, got {len(d)}")
    H = m.check_H(init).copy()

    def F(H):
        return m.eval_R(H, d.x, d.y, d.lam)

    def scaled_norm(H):
        return float(np.max(np.abs(F(H)) / m.R_scale(H, d.x, d.y, d.lam)))

    trace = []
    f = F(H)
    for it in range(1, max_iter + 1):
        J = m.dR_dH(H, d.x, d.y, d.lam)
        try:
            step = solve_dense(J, -f).x
        except SingularMatrix as exc:
            raise NonConvergence(f"singular Jacobian at iteration {it}", trace) from exc
        t = 1.0
        base = np.linalg.norm(f)
        while t > 1e-6:
            Hn = H + t * step
            fn = F(Hn)
            if np.linalg.norm(fn) <= base or t < 1e-5:
                break
            t *= 0.5
        H, f = Hn, fn
        trace.append(scaled_norm(H))
        if np.linalg.norm(t * step) <= step_tol * max(1.0, np.linalg.norm(H)):
            break
    res = scaled_norm(H)
    if not np.isfinite(res) or res > tol:
        raise NonConvergence(f"Newton stalled with residual {res:.3e} after {len(trace)} steps", trace)
    return SolveReport("newton", H, [H], [res], iterations=len(trace))


def solve_hamiltonians(m: SpectralModel, d: SeparatingDivisor, method: str | None = None, init=None) -> SolveReport:
    """Dispatch on the series: linear for A/B/C, radicals or Newton for D."""
    if method is None:
        method = "linear" if m.lie.series != "D" else ("radicals" if m.lie.rank == 2 and m.g == 2 else "newton")
    if method in ("linear", "elimination", "cramer"):
        return solve_hamiltonians_linear(m, d, "cramer" if method == "cramer" else "elimination")
    if method == "radicals":
        return solve_hamiltonians_so4(m, d)
    if method == "newton":
        if init is None:
            if m.lie.series != "D":
                init = np.zeros(m.N)
            elif m.lie.rank == 2 and m.g == 2:
                init = solve_hamiltonians_so4(m, d).H
            else:
                raise ValueError("Newton needs an initial guess for this type")
        return solve_hamiltonians_dl_numeric(m, d, init)
    raise ValueError(f"unknown method {method!r}")
