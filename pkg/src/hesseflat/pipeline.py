"""From a profile phi(u) to solutions of the separated wave equation.

A flat Hessian metric with nondegenerate (E, F, G) = (f_xx, f_xy, f_yy) can be
written as

    E = phi(u) e^v,   F = u e^v,   G = (1 - phi(u)) e^v

with u = F/(E+G), v = log(E+G). The integrability conditions E_y = F_x and
F_y = G_x become the quasilinear system (u, v)_y = M(u) (u, v)_x, whose
characteristic velocities are

    lambda_i = (phi' + (-1)^i sqrt(phi'^2 - 4D(1+D))) / (2D),  D = phi' u - phi.

The Riemann invariant carried by lambda_i is r_i = v + p_i(u) with

    dp_i/du = (1 + phi'^2) / (u + phi phi' - lambda_i D),

and dp_1/du - dp_2/du = sqrt(disc) / (phi(1-phi) - u^2) > 0. In the conformal
coordinates theta = (r_1 + r_2)/2, t = (r_1 - r_2)/2 the hodograph equations
x_{r_1} + lambda_2 y_{r_1} = 0 and x_{r_2} + lambda_1 y_{r_2} = 0 give

    y_tt - y_thth + g(t) y_t + beta(t) y_th = 0,
    g = d/dt log|lambda_1 - lambda_2|,  beta = (lambda_1' + lambda_2')/(lambda_2 - lambda_1).

With Gamma = -g/2, 2 mu' + Gamma mu = 0 and y = Psi / mu^2 this becomes

    Psi_tt - Psi_thth + V Psi + beta Psi_th = 0,  V = Gamma' - Gamma^2,

and separating Psi = Re[(A - iB) e^{ik theta} psi(t)] leaves the Schrodinger
problem -psi'' + (-V - i k beta) psi = k^2 psi. The drift beta vanishes
exactly when lambda_1 + lambda_2 is constant (affine phi); then psi is real
and Psi = (A cos k theta + B sin k theta) psi(t).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad_vec
from scipy.interpolate import CubicHermiteSpline, CubicSpline

from . import fd
from .errors import (DomainError, EmptyAdmissibleInterval, InconsistentGrid,
                     MonotonicityViolation, NegativeDiscriminant, NumericalBlowup,
                     OutsideInterval, PhaseSingularity)
from .expr import Expr, differentiate, parse

D_TOL = 1e-12
CONDITIONS = ("phi_defined", "D_nonzero", "discriminant_positive",
              "phi_in_unit_interval", "positive_definite")


# ---------------------------------------------------------------------------
# profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Profile:
    phi: Expr
    u_lo: float
    u_hi: float
    dphi: Expr = field(init=False, repr=False)
    d2phi: Expr = field(init=False, repr=False)

    def __post_init__(self):
        d1 = differentiate(self.phi, "u")
        object.__setattr__(self, "dphi", d1)
        object.__setattr__(self, "d2phi", differentiate(d1, "u"))

    @property
    def interval(self):
        return self.u_lo, self.u_hi

    def check(self, u):
        u = np.asarray(u, dtype=float)
        if np.any(u < self.u_lo) or np.any(u > self.u_hi):
            raise OutsideInterval(
                f"u outside admissible interval [{self.u_lo}, {self.u_hi}]",
                interval=[self.u_lo, self.u_hi])

    def values(self, u):
        """phi, phi', phi'' at u."""
        env = {"u": np.asarray(u, dtype=float)}
        return tuple(e.evaluate(**env) for e in (self.phi, self.dphi, self.d2phi))

    def D(self, u):
        p, dp, _ = self.values(u)
        return dp * u - p

    def discriminant(self, u):
        p, dp, _ = self.values(u)
        D = dp * u - p
        return dp * dp - 4 * D * (1 + D)


def _condition_table(profile, u):
    """Boolean array per admissibility condition at the samples `u`."""
    try:
        p, dp, _ = profile.values(u)
    except DomainError:
        # fall back to pointwise evaluation, marking domain failures
        p = np.full_like(u, np.nan)
        dp = np.full_like(u, np.nan)
        for i, ui in enumerate(u):
            try:
                vals = profile.values(ui)
                p[i], dp[i] = vals[0], vals[1]
            except DomainError:
                pass
    with np.errstate(invalid="ignore"):
        D = dp * u - p
        disc = dp * dp - 4 * D * (1 + D)
        table = {
            "phi_defined": np.isfinite(p) & np.isfinite(dp),
            "D_nonzero": np.abs(D) > D_TOL,
            "discriminant_positive": disc > 0,
            "phi_in_unit_interval": (p > 0) & (p < 1),
            "positive_definite": u * u < p * (1 - p),
        }
    return table


def _admissible(profile, u):
    table = _condition_table(profile, np.atleast_1d(np.asarray(u, dtype=float)))
    return np.logical_and.reduce([table[c] for c in CONDITIONS])


def validate_profile(phi, interval=(-0.45, 0.45), samples=1001) -> Profile:
    """Largest sub-interval of `interval` on which `phi` is admissible.

    The conditions are sampled on `samples` points; the ends of the longest
    admissible run are then refined by bisection.
    """
    if isinstance(phi, str):
        phi = parse(phi)
    lo, hi = map(float, interval)
    if not lo < hi:
        raise EmptyAdmissibleInterval(f"empty request interval [{lo}, {hi}]",
                                      interval=[lo, hi])
    probe = Profile(phi, lo, hi)
    u = np.linspace(lo, hi, samples)
    table = _condition_table(probe, u)
    ok = np.logical_and.reduce([table[c] for c in CONDITIONS])
    violations = {c: float(u[np.argmin(table[c])]) for c in CONDITIONS
                  if not np.all(table[c])}
    if not np.any(ok):
        first = next(c for c in CONDITIONS if c in violations)
        raise EmptyAdmissibleInterval(
            f"no admissible sub-interval of [{lo}, {hi}]: {first} fails "
            f"(first at u={violations[first]:.6g})",
            interval=[lo, hi], first_violated=first, violations=violations)
    # longest run of admissible samples
    padded = np.concatenate([[False], ok, [False]]).astype(int)
    edges = np.flatnonzero(np.diff(padded))
    starts, stops = edges[::2], edges[1::2] - 1
    k = int(np.argmax(stops - starts))
    i, j = int(starts[k]), int(stops[k])

    def refine(bad, good):
        for _ in range(60):
            mid = 0.5 * (bad + good)
            if _admissible(probe, mid)[0]:
                good = mid
            else:
                bad = mid
        return good

    new_lo = u[i] if i == 0 else refine(u[i - 1], u[i])
    new_hi = u[j] if j == samples - 1 else refine(u[j + 1], u[j])
    return Profile(phi, float(new_lo), float(new_hi))


# ---------------------------------------------------------------------------
# hydrodynamic system and characteristics
# ---------------------------------------------------------------------------

def hydrodynamic_matrix(p: Profile, u) -> np.ndarray:
    """M(u) with (u, v)_y = M(u) (u, v)_x."""
    p.check(u)
    phi, dphi, _ = p.values(u)
    D = dphi * u - phi
    return np.array([[u + phi * dphi, u * u + phi * phi - phi],
                     [-dphi * dphi - 1, -u - phi * dphi + dphi]], dtype=float) / D


def characteristic_velocities(p: Profile, u):
    """(lambda_1, lambda_2); lambda_1 takes the minus branch of the root."""
    phi, dphi, _ = p.values(u)
    D = dphi * u - phi
    disc = dphi * dphi - 4 * D * (1 + D)
    if np.any(disc < 0):
        raise NegativeDiscriminant("characteristic velocities are not real",
                                   min_discriminant=float(np.min(disc)))
    s = np.sqrt(disc)
    return (dphi - s) / (2 * D), (dphi + s) / (2 * D)


def _lambda_jet(p: Profile, u):
    """lambda_1, lambda_2 and their u-derivatives."""
    phi, dphi, d2phi = p.values(u)
    D = dphi * u - phi
    dD = d2phi * u
    disc = dphi * dphi - 4 * D * (1 + D)
    if np.any(disc <= 0):
        raise NegativeDiscriminant("characteristic velocities are not distinct",
                                   min_discriminant=float(np.min(disc)))
    s = np.sqrt(disc)
    ds = (2 * dphi * d2phi - 4 * dD * (1 + 2 * D)) / (2 * s)
    l1 = (dphi - s) / (2 * D)
    l2 = (dphi + s) / (2 * D)
    dl1 = (d2phi - ds) / (2 * D) - l1 * dD / D
    dl2 = (d2phi + ds) / (2 * D) - l2 * dD / D
    return l1, l2, dl1, dl2


def phase_derivatives(p: Profile, u):
    """(dp_1/du, dp_2/du) for the Riemann invariants of lambda_1, lambda_2."""
    phi, dphi, _ = p.values(u)
    D = dphi * u - phi
    l1, l2 = characteristic_velocities(p, u)
    a = u + phi * dphi
    den1, den2 = a - l1 * D, a - l2 * D
    tiny = 1e-14 * (np.abs(a) + np.abs(l1 * D) + np.abs(l2 * D) + 1e-300)
    if np.any(np.abs(den1) <= tiny) or np.any(np.abs(den2) <= tiny):
        bad = np.atleast_1d(u)[np.argmin(np.minimum(np.abs(den1), np.abs(den2)) - tiny)]
        raise PhaseSingularity(f"phase ODE singular near u={float(bad):.6g}",
                               u=float(bad))
    num = 1 + dphi * dphi
    return num / den1, num / den2


@dataclass(frozen=True)
class CharacteristicData:
    u: np.ndarray
    D: np.ndarray
    discriminant: np.ndarray
    lam1: np.ndarray
    lam2: np.ndarray


def characteristic_data(p: Profile, n=2049) -> CharacteristicData:
    u = np.linspace(p.u_lo, p.u_hi, n)
    l1, l2 = characteristic_velocities(p, u)
    if np.any(l1 == l2):
        raise NegativeDiscriminant("characteristic velocities coincide")
    return CharacteristicData(u, p.D(u), p.discriminant(u), l1, l2)


# ---------------------------------------------------------------------------
# phases
# ---------------------------------------------------------------------------

@dataclass
class PhaseTable:
    profile: Profile
    u0: float
    u: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    dp1: np.ndarray
    dp2: np.ndarray

    def __post_init__(self):
        self.t = 0.5 * (self.p1 - self.p2)
        self._p1 = CubicHermiteSpline(self.u, self.p1, self.dp1)
        self._p2 = CubicHermiteSpline(self.u, self.p2, self.dp2)
        dtdu = 0.5 * (self.dp1 - self.dp2)
        self._u_of_t = CubicHermiteSpline(self.t, self.u, 1.0 / dtdu)

    t0 = 0.0

    @property
    def t_interval(self):
        return float(self.t[0]), float(self.t[-1])

    def p(self, u):
        return self._p1(u), self._p2(u)

    def t_of_u(self, u):
        return 0.5 * (self._p1(u) - self._p2(u))

    def u_of_t(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.t_interval
        if np.any(t < lo - 1e-12) or np.any(t > hi + 1e-12):
            raise OutsideInterval(f"t outside [{lo}, {hi}]", interval=[lo, hi])
        u = self._u_of_t(t)
        for _ in range(3):
            # Newton polish so that t_of_u(u_of_t(t)) == t to rounding
            u = np.clip(u, self.u[0], self.u[-1])
            slope = 0.5 * (self._p1(u, 1) - self._p2(u, 1))
            u = u - (self.t_of_u(u) - t) / slope
        return np.clip(u, self.u[0], self.u[-1])

    def dudt(self, t):
        u = self.u_of_t(t)
        d1, d2 = phase_derivatives(self.profile, u)
        return 2.0 / (d1 - d2)


def phase_table(p: Profile, u0=None, n=2049) -> PhaseTable:
    """Integrate both phase ODEs with classical RK4 on an n-point uniform grid.

    p_i(u0) = 0; `u0` defaults to the interval midpoint.
    """
    u0 = 0.5 * (p.u_lo + p.u_hi) if u0 is None else float(u0)
    p.check(u0)
    u = np.linspace(p.u_lo, p.u_hi, n)
    h = u[1] - u[0]
    mid = u[:-1] + 0.5 * h
    d_nodes = phase_derivatives(p, u)
    d_mid = phase_derivatives(p, mid)
    if np.any(d_nodes[0] - d_nodes[1] <= 0):
        bad = u[np.argmin(d_nodes[0] - d_nodes[1])]
        raise MonotonicityViolation(
            f"dp1/du <= dp2/du at u={bad:.6g}", u=float(bad))
    j0 = int(np.argmin(np.abs(u - u0)))
    out = []
    for dn, dm in zip(d_nodes, d_mid):
        # RK4 for an autonomous-in-p right-hand side: Simpson increments
        inc = h / 6.0 * (dn[:-1] + 4.0 * dm + dn[1:])
        cum = np.concatenate([[0.0], np.cumsum(inc)])
        vals = cum - cum[j0]
        if u[j0] != u0:
            hs = u[j0] - u0
            g = lambda s: phase_derivatives(p, s)[len(out)]  # noqa: E731
            vals = vals + hs / 6.0 * (g(u0) + 4.0 * g(u0 + 0.5 * hs) + g(u[j0]))
        out.append(vals)
    return PhaseTable(p, u0, u, out[0], out[1], d_nodes[0], d_nodes[1])


# ---------------------------------------------------------------------------
# wave-equation data
# ---------------------------------------------------------------------------

@dataclass
class WaveData:
    """Gamma, mu, V and the drift beta sampled on a uniform t-grid."""
    t: np.ndarray
    gamma: np.ndarray
    mu: np.ndarray
    V: np.ndarray
    beta: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        self._splines = {name: CubicSpline(self.t, getattr(self, name))
                         for name in ("gamma", "mu", "V", "beta")}

    @property
    def t_interval(self):
        return float(self.t[0]), float(self.t[-1])

    def at(self, name, t, nu=0):
        return self._splines[name](t, nu)

    def schrodinger_potential(self, k):
        """Potential of the separated mode equation -psi'' + Q psi = k^2 psi."""
        if k == 0:
            return lambda t: -self.at("V", t)
        return lambda t: -self.at("V", t) - 1j * k * self.at("beta", t)


def _gamma_beta(pt: PhaseTable, t):
    u = pt.u_of_t(t)
    l1, l2, dl1, dl2 = _lambda_jet(pt.profile, u)
    d1, d2 = phase_derivatives(pt.profile, u)
    dudt = 2.0 / (d1 - d2)
    gamma = -0.5 * (dl1 - dl2) * dudt / (l1 - l2)
    beta = (dl1 + dl2) * dudt / (l2 - l1)
    return gamma, beta


def wave_data(pt: PhaseTable, n=None, tol=1e-10) -> WaveData:
    """Gamma, mu = exp(-1/2 int Gamma) and V = Gamma' - Gamma^2 on a uniform t-grid.

    mu is normalised to 1 at t0 (the image of the phase base point) and is
    computed by adaptive quadrature; Gamma' by 4th-order differences.
    """
    n = n or len(pt.u)
    lo, hi = pt.t_interval
    t = np.linspace(lo, hi, n)
    gamma, beta = _gamma_beta(pt, t)
    t0 = pt.t0
    span = t - t0

    def integrand(s):
        return span * _gamma_beta(pt, t0 + s * span)[0]

    integral, _ = quad_vec(integrand, 0.0, 1.0, epsabs=tol, epsrel=tol, norm="max")
    mu = np.exp(-0.5 * integral)
    dgamma = fd.derivative(gamma, t[1] - t[0])
    V = dgamma - gamma ** 2
    return WaveData(t, gamma, mu, V, beta, t0)


# ---------------------------------------------------------------------------
# Schrodinger modes
# ---------------------------------------------------------------------------

@dataclass
class ModeSolution:
    """psi sampled on the uniform grid t0 + j*step."""
    t: np.ndarray
    psi: np.ndarray
    step: float
    k: float
    t0: float

    def __post_init__(self):
        self._spline = CubicSpline(self.t, self.psi)

    def __call__(self, t, nu=0):
        return self._spline(t, nu)

    def derivative(self):
        return fd.derivative(self.psi, self.step)

    def same_grid(self, other):
        return (self.t0 == other.t0 and self.step == other.step
                and len(self.t) == len(other.t) and self.t[0] == other.t[0])


def _as_function(V):
    if callable(V):
        return V
    ts, vals = V
    spline = CubicSpline(ts, vals)
    return lambda t: spline(t)


def _numerov_march(w, s, psi0, psi1, h2, out):
    """Fill `out` (already holding out[0], out[1]) by Numerov's recurrence."""
    a = 1.0 - h2 * w / 12.0
    b = 2.0 + 10.0 * h2 * w / 12.0
    src = h2 / 12.0 * (s[2:] + 10.0 * s[1:-1] + s[:-2]) if s is not None else None
    prev, cur = psi0, psi1
    with np.errstate(over="ignore", invalid="ignore"):
        _numerov_loop(a, b, src, prev, cur, out)
    return out


def _numerov_loop(a, b, src, prev, cur, out):
    for n in range(1, len(a) - 1):
        nxt = b[n] * cur - a[n - 1] * prev
        if src is not None:
            nxt = nxt + src[n - 1]
        nxt = nxt / a[n + 1]
        out[n + 1] = nxt
        prev, cur = cur, nxt


def solve_schrodinger(V, k, init, step, t_span, t0=0.0, source=None) -> ModeSolution:
    """Solve -psi'' + V psi = k^2 psi (+ optional source: psi'' = (V-k^2) psi + s).

    Numerov's method on the grid t0 + j*step, marching forward and backward
    from t0 with initial data init = (psi(t0), psi'(t0)). `V` is a callable
    (possibly complex-valued) or a pair of sample arrays.
    """
    a, b = map(float, t_span)
    a, b = min(a, t0), max(b, t0)
    if step <= 0 or step > (b - a) > 0:
        raise ValueError(f"step {step} not in (0, {b - a}]")
    Vf = _as_function(V)
    n_left = int(np.ceil((t0 - a) / step - 1e-9))
    n_right = int(np.ceil((b - t0) / step - 1e-9))
    j = np.arange(-n_left, n_right + 1)
    t = t0 + j * step
    w = Vf(t) - k * k
    s = source(t) if source is not None else None
    dtype = np.result_type(w, complex if np.iscomplexobj(init) else float,
                           s if s is not None else float)
    w = np.asarray(w, dtype=dtype)
    psi = np.zeros(len(t), dtype=dtype)
    i0 = n_left
    p0, dp0 = init
    h = step
    h2 = h * h

    # Taylor start to O(h^5) using psi'' = w psi + s
    def local_jet(func):
        tt = t0 + np.arange(-2, 3) * h
        vals = np.asarray(func(tt), dtype=dtype)
        wts = fd.fornberg_weights(0, np.arange(-2, 3), 2)
        return wts[0] @ vals, (wts[1] @ vals) / h, (wts[2] @ vals) / h2

    w0, dw0, ddw0 = local_jet(lambda tt: Vf(tt) - k * k)
    if source is not None:
        s0, ds0, dds0 = local_jet(source)
    else:
        s0 = ds0 = dds0 = 0.0
    d2 = w0 * p0 + s0
    d3 = dw0 * p0 + w0 * dp0 + ds0
    d4 = ddw0 * p0 + 2 * dw0 * dp0 + w0 * d2 + dds0

    def taylor(sign):
        hh = sign * h
        return p0 + hh * dp0 + hh ** 2 / 2 * d2 + hh ** 3 / 6 * d3 + hh ** 4 / 24 * d4

    psi[i0] = p0
    if n_right > 0:
        fwd = np.zeros(n_right + 1, dtype=dtype)
        fwd[0], fwd[1] = p0, taylor(+1)
        _numerov_march(w[i0:], None if s is None else s[i0:], fwd[0], fwd[1], h2, fwd)
        psi[i0:] = fwd
    if n_left > 0:
        bwd = np.zeros(n_left + 1, dtype=dtype)
        bwd[0], bwd[1] = p0, taylor(-1)
        _numerov_march(w[i0::-1], None if s is None else s[i0::-1],
                       bwd[0], bwd[1], h2, bwd)
        psi[:i0 + 1] = bwd[::-1]
    bad = ~np.isfinite(psi)
    if np.any(bad):
        where = float(t[np.argmax(bad)])
        raise NumericalBlowup(f"solution overflowed near t={where:.6g}", t=where)
    return ModeSolution(t, psi, step, k, t0)


def wronskian(a: ModeSolution, b: ModeSolution):
    """psi_a psi_b' - psi_a' psi_b with 4th-order derivative samples."""
    if not a.same_grid(b):
        raise InconsistentGrid("Wronskian needs solutions on one grid")
    return a.psi * b.derivative() - a.derivative() * b.psi


# ---------------------------------------------------------------------------
# superposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralMode:
    A: float
    B: float
    k: float
    init: tuple = (1.0, 0.0)

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("wavenumber must be >= 0 (negative k duplicates B)")

    @classmethod
    def parse_list(cls, text):
        """``"A,B,k; A,B,k"`` -> list of modes."""
        modes = []
        for chunk in text.split(";"):
            if chunk.strip():
                A, B, k = (float(v) for v in chunk.split(","))
                modes.append(cls(A, B, k))
        return modes


@dataclass
class SolvedMode:
    mode: SpectralMode
    psi: ModeSolution
    chi: ModeSolution | None = None   # theta-linear correction for k = 0


def solve_modes(wave: WaveData, modes, t_span, step):
    """Solve every mode's ODE on one shared grid anchored at wave.t0."""
    solved = []
    for m in modes:
        Q = wave.schrodinger_potential(m.k)
        psi = solve_schrodinger(Q, m.k, m.init, step, t_span, wave.t0)
        chi = None
        if m.k == 0 and m.B != 0:
            # Psi = theta psi + chi needs -chi'' - V chi = beta psi
            def src(t, psi=psi):
                return -wave.at("beta", t) * psi(t)
            chi = solve_schrodinger(Q, 0.0, (0.0, 0.0), step, t_span, wave.t0,
                                    source=src)
        solved.append(SolvedMode(m, psi, chi))
    return solved


@dataclass
class KGField:
    """Psi and its first partials on a (t, theta) grid, arrays indexed [it, ith]."""
    t: np.ndarray
    theta: np.ndarray
    psi: np.ndarray
    psi_t: np.ndarray
    psi_theta: np.ndarray


def kg_superpose(solved, t, theta) -> KGField:
    """Psi(t, theta) = sum of separated modes.

    k > 0: Re[(A - iB) e^{ik theta} psi_k(t)], which is
    (A cos k theta + B sin k theta) psi_k(t) when psi_k is real.
    k = 0: A psi_0(t) + B (theta psi_0(t) + chi(t)).
    """
    t = np.asarray(t, dtype=float)
    theta = np.asarray(theta, dtype=float)
    shape = (len(t), len(theta))
    psi = np.zeros(shape)
    psi_t = np.zeros(shape)
    psi_th = np.zeros(shape)
    if solved:
        ref = solved[0].psi
        for sm in solved:
            if not sm.psi.same_grid(ref):
                raise InconsistentGrid("modes were solved on different t-grids")
    TH = theta[None, :]
    for sm in solved:
        m = sm.mode
        p = sm.psi(t)[:, None]
        dp = sm.psi(t, 1)[:, None]
        if m.k == 0:
            p, dp = p.real, dp.real
            psi = psi + m.A * p + m.B * TH * p
            psi_t = psi_t + m.A * dp + m.B * TH * dp
            psi_th = psi_th + m.B * p
            if sm.chi is not None:
                psi = psi + m.B * sm.chi(t).real[:, None]
                psi_t = psi_t + m.B * sm.chi(t, 1).real[:, None]
            continue
        c = (m.A - 1j * m.B) * np.exp(1j * m.k * TH)
        psi = psi + (c * p).real
        psi_t = psi_t + (c * dp).real
        psi_th = psi_th + (1j * m.k * c * p).real
    return KGField(t, theta, psi, psi_t, psi_th)


def kg_residual(field: KGField, wave: WaveData, margin=2):
    """max |Psi_tt - Psi_thth + V Psi + beta Psi_th| on interior nodes, and max|Psi|."""
    ht = field.t[1] - field.t[0]
    hth = field.theta[1] - field.theta[0]
    Ptt = fd.derivative(field.psi, ht, axis=0, order=2)
    Pthth = fd.derivative(field.psi, hth, axis=1, order=2)
    Pth = fd.derivative(field.psi, hth, axis=1)
    V = wave.at("V", field.t)[:, None]
    beta = wave.at("beta", field.t)[:, None]
    r = Ptt - Pthth + V * field.psi + beta * Pth
    sl = (slice(margin, -margin or None),) * 2
    return float(np.max(np.abs(r[sl]))), float(np.max(np.abs(field.psi)))
