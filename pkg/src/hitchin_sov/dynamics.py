"""Poisson structure, Hamiltonian flows and angle-rate checks.

Phase space is the set of N points (x_i, y_i, λ_i) with the bracket

    {λ_i, x_j} = δ_ij y_i,

so that {f, g} = Σ_i y_i (∂f/∂λ_i ∂g/∂x_i - ∂f/∂x_i ∂g/∂λ_i). The
Hamiltonians are functions of the points through the separation relations
R(x_k, y_k, λ_k; H) = 0; implicit differentiation gives

    ∂H_j/∂x_k = -(M^-1)_jk R'_x(k),   ∂H_j/∂λ_k = -(M^-1)_jk R'_λ(k),

with M[k, j] = ∂R/∂H_j at point k. Flows use ẋ = {H, x}.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .algebra import solve_dense
from .diffper import differential_basis, dR_dlam
from .errors import StepCollapse
from .paths import HermitePath, SheetPath, integrate
from .sov import SeparatingDivisor, separation_matrix, solve_hamiltonians, solve_hamiltonians_dl_numeric
from .spectral import SpectralModel

# Dormand-Prince 5(4) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


@dataclass
class PhaseState:
    """N points of the base-curve bundle; y_i is carried continuously."""

    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=complex).copy()
        self.y = np.asarray(self.y, dtype=complex).copy()
        self.lam = np.asarray(self.lam, dtype=complex).copy()

    @classmethod
    def from_divisor(cls, d: SeparatingDivisor) -> "PhaseState":
        return cls(d.x, d.y, d.lam)

    def divisor(self) -> SeparatingDivisor:
        return SeparatingDivisor(self.x, self.y, self.lam)

    def constraint_error(self, m: SpectralModel) -> float:
        scale = np.maximum(1.0, np.abs(self.x)) ** (2 * m.g + 1)
        return float(np.max(np.abs(self.y**2 - m.base.P(self.x)) / scale))

    def to_json(self) -> dict:
        return self.divisor().to_json()

    @classmethod
    def from_json(cls, data) -> "PhaseState":
        return cls.from_divisor(SeparatingDivisor.from_json(data))


@dataclass(frozen=True)
class Observable:
    """Partial derivatives of a phase-space function at one state."""

    dx: np.ndarray
    dlam: np.ndarray


def poisson_bracket(f: Observable, g: Observable, s: PhaseState) -> complex:
    return complex(np.sum(s.y * (f.dlam * g.dx - f.dx * g.dlam)))


def coordinate(kind: str, i: int, n: int) -> Observable:
    """The coordinate x_i or λ_i as an observable."""
    e = np.zeros(n, dtype=complex)
    e[i] = 1.0
    z = np.zeros(n, dtype=complex)
    return Observable(e, z) if kind == "x" else Observable(z, e)


@dataclass
class Gradients:
    H: np.ndarray
    dx: np.ndarray
    dlam: np.ndarray
    condition: float

    def observable(self, j: int) -> Observable:
        return Observable(self.dx[j], self.dlam[j])


def current_hamiltonians(m: SpectralModel, s: PhaseState, H_ref=None) -> np.ndarray:
    """H through the separation relations; for series D, Newton from ``H_ref``."""
    d = s.divisor()
    if m.lie.series == "D":
        if H_ref is None:
            return solve_hamiltonians(m, d).H
        return solve_hamiltonians_dl_numeric(m, d, H_ref).H
    # the bare linear solve; the report diagnostics are not needed here
    return solve_dense(*separation_matrix(m, d)).x


def hamiltonian_gradients(m: SpectralModel, s: PhaseState, H=None) -> Gradients:
    """∂H_j/∂x_k and ∂H_j/∂λ_k at ``s`` (rows j, columns k).

    ``H`` defaults to the solution of the separation relations.

    Raises
    ------
    SingularMatrix
        When the separation matrix is singular at ``s``.
    """
    H = current_hamiltonians(m, s) if H is None else m.check_H(H)
    M = m.dR_dH(H, s.x, s.y, s.lam)
    part = m.partials(H, s.x, s.y, s.lam)
    sol = solve_dense(M, np.eye(m.N, dtype=complex))
    Minv = sol.x
    return Gradients(H, -Minv * part.dR_dx[None, :], -Minv * part.dR_dlam[None, :], sol.condition)


def bracket_matrix(m: SpectralModel, s: PhaseState, H=None, extended: bool = True) -> np.ndarray:
    """{H_j, H_k} for all pairs.

    With ``extended`` the inverse separation matrix gets one Newton-Schulz
    step and the gradients are contracted in long double, so the rounding
    floor sits far below the size of the individual terms.
    """
    if not extended:
        G = hamiltonian_gradients(m, s, H)
        Y = s.y[None, :]
        return (G.dlam * Y) @ G.dx.T - (G.dx * Y) @ G.dlam.T
    H = current_hamiltonians(m, s) if H is None else m.check_H(H)
    ld = np.clongdouble
    M = m.dR_dH(H, s.x, s.y, s.lam).astype(ld)
    part = m.partials(H, s.x, s.y, s.lam)
    X = solve_dense(m.dR_dH(H, s.x, s.y, s.lam), np.eye(m.N, dtype=complex)).x.astype(ld)
    X = X @ (2 * np.eye(m.N, dtype=ld) - M @ X)
    gx = -X * part.dR_dx.astype(ld)[None, :]
    gl = -X * part.dR_dlam.astype(ld)[None, :]
    Y = s.y.astype(ld)[None, :]
    return ((gl * Y) @ gx.T - (gx * Y) @ gl.T).astype(complex)


def vector_field(obs: Observable, s: PhaseState):
    """(ẋ, λ̇) of the Hamiltonian flow of ``obs``."""
    return s.y * obs.dlam, -s.y * obs.dx


def symplectic_form(s: PhaseState, u, v) -> complex:
    """Σ (dλ_i ∧ dx_i)/y_i on tangent vectors u = (ẋ, λ̇), v = (ẋ, λ̇)."""
    (ux, ul), (vx, vl) = u, v
    return complex(np.sum((ul * vx - ux * vl) / s.y))


# --- integration ----------------------------------------------------------------


@dataclass
class FlowTrace:
    """Accepted steps of a flow: times, states, velocities, H re-solved per step."""

    j: int
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    xdot: np.ndarray
    H0: np.ndarray
    H: np.ndarray = field(default=None)
    phi: np.ndarray = field(default=None)
    max_constraint: float = 0.0

    def state(self, k: int = -1) -> PhaseState:
        return PhaseState(self.x[k], self.y[k], self.lam[k])

    @property
    def drift(self) -> float:
        """Largest relative change of the re-solved H along the trace."""
        if self.H is None:
            return float("nan")
        return float(np.max(np.abs(self.H - self.H0[None, :]) / np.linalg.norm(self.H0)))

    def to_json(self) -> dict:
        enc = lambda v: [[z.real, z.imag] for z in v]  # noqa: E731
        steps = []
        for k in range(len(self.t)):
            step = {"t": float(self.t[k]), "state": self.state(k).to_json()}
            if self.H is not None:
                step["H"] = enc(self.H[k])
            steps.append(step)
        return {
            "hamiltonian": self.j,
            "H0": enc(self.H0),
            "steps": steps,
            "drift": self.drift,
            "max_constraint": self.max_constraint,
        }


def _project_y(m, x, y):
    r = np.sqrt(m.base.P(x).astype(complex))
    return np.where(np.abs(r - y) <= np.abs(r + y), r, -r)


class _Charts:
    """Per-point coordinates for the integrator.

    A point far out on the curve is carried in the chart at infinity,
    z = x^(-1/2) with w = λ z^(2(g-1)), where the flow stays smooth while x
    and λ grow without bound. The state vector is [ξ, η, y, φ] with (ξ, η)
    equal to (x, λ) or (z, w) per point; in the chart at infinity the y
    slot is refreshed from z after every accepted step.
    """

    def __init__(self, m: SpectralModel):
        self.m = m
        self.N = m.N
        self.e = 2 * (m.g - 1)
        rho = max(1.0, float(np.max(np.abs(m.base.roots))))
        self.x_out, self.x_in = 16.0 * rho, 8.0 * rho
        self.far = np.zeros(m.N, dtype=bool)

    def decode(self, u):
        N, f = self.N, self.far
        x, lam, y = u[:N].copy(), u[N : 2 * N].copy(), u[2 * N : 3 * N].copy()
        if f.any():
            z = u[:N][f]
            x[f], y[f] = self.m.base.near_infinity(z)
            lam[f] = u[N : 2 * N][f] * z ** (-self.e)
        return x, lam, y

    def velocity(self, u, xdot, ldot, ydot):
        """Chart derivatives from the physical ones."""
        f = self.far
        if not f.any():
            return xdot, ldot, ydot
        N = self.N
        xdot, ldot, ydot = xdot.copy(), ldot.copy(), ydot.copy()
        z, w = u[:N][f], u[N : 2 * N][f]
        zdot = -0.5 * z**3 * xdot[f]
        lam = w * z ** (-self.e)
        ldot[f] = z**self.e * ldot[f] + self.e * z ** (self.e - 1) * zdot * lam
        xdot[f] = zdot
        ydot[f] = 0.0
        return xdot, ldot, ydot

    def settle(self, u):
        """Project y, then move points across the chart boundary. Returns True on a switch."""
        m, N = self.m, self.N
        x, lam, y = self.decode(u)
        near = ~self.far
        y[near] = _project_y(m, x[near], y[near])
        u[2 * N : 3 * N] = y
        switched = False
        for i in range(N):
            if not self.far[i] and abs(x[i]) > self.x_out:
                z = x[i] ** -0.5
                # of ±z, take the root whose y continues the carried sheet
                if abs(m.base.near_infinity(-z)[1] - y[i]) < abs(m.base.near_infinity(z)[1] - y[i]):
                    z = -z
                u[i], u[N + i] = z, lam[i] * z**self.e
                self.far[i] = switched = True
            elif self.far[i] and abs(x[i]) < self.x_in:
                u[i], u[N + i] = x[i], lam[i]
                self.far[i] = False
                switched = True
        return switched


def _rhs_factory(m: SpectralModel, j: int, H_fixed, with_phi: bool, charts: _Charts):
    N = m.N
    basis = None

    def rhs(u):
        nonlocal basis
        x, lam, y = charts.decode(u)
        s = PhaseState(x, y, lam)
        H = H_fixed if H_fixed is not None else current_hamiltonians(m, s)
        M = m.dR_dH(H, x, y, lam)
        part = m.partials(H, x, y, lam)
        e = np.zeros(N, dtype=complex)
        e[j] = 1.0
        v = solve_dense(M.T, e).x  # row j of M^-1
        xdot = -y * v * part.dR_dlam
        ldot = y * v * part.dR_dx
        ydot = m.base.dP(x) / (2 * y) * xdot
        out = list(charts.velocity(u, xdot, ldot, ydot))
        if with_phi:
            if basis is None or H_fixed is None:
                basis = differential_basis(m, H)
            w = basis.values(x, y, lam)  # (N points, N differentials)
            out.append(w.T @ xdot)
        return np.concatenate(out), xdot

    return rhs


def flow(
    m: SpectralModel,
    s0: PhaseState,
    j: int,
    t_end: float,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    h0: float | None = None,
    H=None,
    fixed_H: bool | None = None,
    track_phi: bool = True,
    resolve: bool = True,
    max_steps: int = 100000,
) -> FlowTrace:
    """Integrate the flow of H_j from ``s0`` over [0, t_end] (t_end may be negative).

    Adaptive Dormand-Prince 5(4) with y projected back onto ±sqrt(P(x)) by
    continuity after every accepted step. Points that run far out on the
    curve are integrated in the chart at infinity and brought back when
    they return. For series D the vector field is evaluated at the initial
    H (``fixed_H``), which keeps the points on one spectral curve; for A,
    B, C the current H is re-solved at every stage.

    Raises
    ------
    StepCollapse
        When the step size underflows, typically near a branch point.
    """
    if not 0 <= j < m.N:
        raise ValueError(f"Hamiltonian index {j} out of range 0..{m.N - 1}")
    H0 = current_hamiltonians(m, s0) if H is None else m.check_H(H)
    if fixed_H is None:
        fixed_H = m.lie.series == "D"
    N = m.N
    charts = _Charts(m)
    rhs = _rhs_factory(m, j, H0 if fixed_H else None, track_phi, charts)
    u = np.concatenate([s0.x, s0.lam, s0.y] + ([np.zeros(N, dtype=complex)] if track_phi else []))
    charts.settle(u)
    direction = 1.0 if t_end >= 0 else -1.0
    T = abs(t_end)
    t = 0.0
    h = h0 or min(0.01, T) if T > 0 else 0.0

    def record(u, xdot):
        x, lam, y = charts.decode(u)
        zs.append(np.concatenate([x, lam, y, u[3 * N :]]))
        xd.append(xdot.copy())

    k1, xdot = rhs(u)
    ts, zs, xd = [0.0], [], []
    record(u, xdot)
    steps = 0
    while t < T * (1 - 1e-15) and T > 0:
        if steps >= max_steps:
            raise StepCollapse("step budget exhausted", time=direction * t)
        h = min(h, T - t)
        K = [k1]
        for i in range(1, 7):
            ui = u + direction * h * sum(a * k for a, k in zip(_A[i], K))
            K.append(rhs(ui)[0])
        u5 = u + direction * h * sum(b * k for b, k in zip(_B5, K))
        err = direction * h * sum((b5 - b4) * k for b5, b4, k in zip(_B5, _B4, K))
        sc = atol + rtol * np.maximum(np.abs(u), np.abs(u5))
        # the y slot of far points is a function of z, not an integrated variable
        err[2 * N : 3 * N][charts.far] = 0.0
        en = float(np.max(np.abs(err) / sc))
        if en <= 1.0:
            t += h
            u = u5
            charts.settle(u)
            k1, xdot = rhs(u)
            ts.append(t)
            record(u, xdot)
            steps += 1
        fac = 0.9 * en ** (-0.2) if en > 0 else 5.0
        h = h * min(5.0, max(0.2, fac))
        if h < 1e-13 * max(1.0, T):
            raise StepCollapse(f"step size collapsed to {h:.2e}", time=direction * t)
    Z = np.array(zs)
    tr = FlowTrace(
        j,
        direction * np.array(ts),
        Z[:, :N],
        Z[:, 2 * N : 3 * N],
        Z[:, N : 2 * N],
        np.array(xd),
        H0,
        phi=Z[:, 3 * N :] if track_phi else None,
    )
    tr.max_constraint = max(tr.state(k).constraint_error(m) for k in range(len(ts)))
    if resolve:
        Hs, Href = [], H0
        for k in range(len(ts)):
            Href = current_hamiltonians(m, tr.state(k), Href)
            Hs.append(Href)
        tr.H = np.array(Hs)
    return tr


# --- angle rates ------------------------------------------------------------------


@dataclass
class AngleRateReport:
    """Measured dφ_m/dt under the flow of H_j.

    ``augmented`` comes from φ̇ integrated with the state; ``path`` from
    integrating the angle differentials along the recorded trajectories.
    The prediction is sign · δ_jm with a single global ``sign``.
    """

    j: int
    t_end: float
    augmented: np.ndarray
    path: np.ndarray
    sign: int
    deviation: float

    @property
    def ok(self) -> bool:
        return self.deviation < 1e-4

    def to_json(self) -> dict:
        enc = lambda v: [[z.real, z.imag] for z in v]  # noqa: E731
        return {
            "hamiltonian": self.j,
            "t_end": self.t_end,
            "rates_augmented": enc(self.augmented),
            "rates_path": enc(self.path),
            "sign": self.sign,
            "deviation": self.deviation,
        }


def trajectory_integrals(m: SpectralModel, trace: FlowTrace, rtol: float = 1e-10) -> np.ndarray:
    """Σ_k ∫ ω along the trajectory of point k, with the sheets tracked afresh."""
    basis = differential_basis(m, trace.H0)
    total = np.zeros(m.N, dtype=complex)
    if len(trace.t) < 2:
        return total
    for k in range(m.N):
        seg = HermitePath(trace.t, trace.x[:, k], trace.xdot[:, k])
        path = SheetPath(seg, trace.y[0, k], trace.lam[0, k])
        total = total + integrate(m, trace.H0, path, basis.values, rtol=rtol).value
    return total


def angle_rate_check(m: SpectralModel, trace: FlowTrace, sign: int = -1) -> AngleRateReport:
    """Compare φ(t_end) - φ(0) with sign · δ_jm · t_end."""
    T = float(trace.t[-1])
    e = np.zeros(m.N)
    e[trace.j] = 1.0
    if T == 0:
        z = np.zeros(m.N, dtype=complex)
        return AngleRateReport(trace.j, 0.0, z, z, sign, 0.0)
    aug = (trace.phi[-1] - trace.phi[0]) / T if trace.phi is not None else np.full(m.N, np.nan)
    path = trajectory_integrals(m, trace) / T
    dev = float(max(np.abs(aug - sign * e).max(), np.abs(path - sign * e).max()))
    return AngleRateReport(trace.j, T, aug, path, sign, dev)
