"""Hesse coordinates from a wave solution, chart inversion and the potential.

Given Psi on a (t, theta) grid, y = Psi / mu^2 and x solves

    dx = -(lambda_2 y_{r_1} dr_1 + lambda_1 y_{r_2} dr_2),

with r_1 = theta + t, r_2 = theta - t. Inverting (t, theta) -> (x, y) gives
u, v and hence E, F, G as functions of (x, y), and the potential follows by
integrating the Hessian twice along rays from a base point.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.integrate import cumulative_simpson, quad_vec
from scipy.interpolate import RectBivariateSpline
from scipy.spatial import cKDTree

from . import fd
from .errors import (NewtonDivergence, NotClosed, NotStarShaped, OutsideChart,
                     OutsideDomain, PositivityViolation, SingularJacobian)
from .geometry import bracket
from .pipeline import KGField, PhaseTable, Profile, WaveData, characteristic_velocities

CLOSED_TOL = 1e-6
MARGIN = 2


def _interior(a, margin=MARGIN):
    return a[margin:a.shape[0] - margin, margin:a.shape[1] - margin]


@dataclass(frozen=True)
class ConformalChart:
    """Fields on a rectangular (t, theta) grid, arrays indexed [it, ith]."""
    t: np.ndarray
    theta: np.ndarray
    u: np.ndarray          # per t
    lam1: np.ndarray       # per t
    lam2: np.ndarray       # per t
    p1: np.ndarray         # per t
    p2: np.ndarray         # per t
    v: np.ndarray
    psi: np.ndarray
    y: np.ndarray
    y_t: np.ndarray
    y_theta: np.ndarray
    base: tuple            # (it, ith) where x = 0
    x: np.ndarray | None = None
    x_t: np.ndarray | None = None
    x_theta: np.ndarray | None = None
    closedness: float = float("nan")
    closedness_scale: float = float("nan")
    path_mismatch: float = float("nan")
    path_scale: float = float("nan")

    @property
    def shape(self):
        return len(self.t), len(self.theta)

    @property
    def y_r1(self):
        return 0.5 * (self.y_theta + self.y_t)

    @property
    def y_r2(self):
        return 0.5 * (self.y_theta - self.y_t)

    @property
    def jacobian(self):
        """det d(x, y)/d(t, theta) per node."""
        return self.x_t * self.y_theta - self.x_theta * self.y_t

    @property
    def base_xy(self):
        i, j = self.base
        return float(self.x[i, j]), float(self.y[i, j])


def recover_y(w: WaveData, psi, t):
    """y = Psi / mu(t)^2 on a grid whose first axis is `t`."""
    mu = w.at("mu", np.asarray(t))
    return np.asarray(psi) / (mu * mu)[:, None]


def _y_partials(w: WaveData, field: KGField):
    mu = w.at("mu", field.t)[:, None]
    gamma = w.at("gamma", field.t)[:, None]
    inv = 1.0 / (mu * mu)
    # y = Psi mu^-2 and mu' = -Gamma mu / 2
    return (field.psi * inv, (field.psi_t + gamma * field.psi) * inv,
            field.psi_theta * inv)


def _check_jacobian(chart: ConformalChart, rel=1e-10):
    y1, y2 = chart.y_r1, chart.y_r2
    scale = max(np.max(np.abs(y1)), np.max(np.abs(y2)), 1e-300)
    for name, arr in (("y_r1", y1), ("y_r2", y2)):
        small = np.abs(arr) <= rel * scale
        # a sign flip between neighbours means a zero inside the cell
        small[:-1] |= np.sign(arr[:-1]) * np.sign(arr[1:]) < 0
        small[:, :-1] |= np.sign(arr[:, :-1]) * np.sign(arr[:, 1:]) < 0
        if np.any(small):
            i, j = np.unravel_index(np.argmax(small), arr.shape)
            raise SingularJacobian(
                f"{name} vanishes at node (t={chart.t[i]:.6g}, theta={chart.theta[j]:.6g})",
                node=[int(i), int(j)], t=float(chart.t[i]), theta=float(chart.theta[j]))


def _sweep(fa, fb, ha, hb, ia, ib):
    """Integrate fa along axis 1 in row ia, then fb along axis 0 from that row."""
    row = cumulative_simpson(fa[ia], dx=hb, initial=0.0)
    row = row - row[ib]
    cols = cumulative_simpson(fb, dx=ha, axis=0, initial=0.0)
    cols = cols - cols[ia][None, :]
    return row[None, :] + cols


def recover_x(c: ConformalChart, tol=CLOSED_TOL, check_jacobian=True):
    """Integrate dx on the chart grid with x(base) = 0.

    Returns a chart with x and its partials filled in. The one-form must be
    closed to `tol` relative to its derivatives on interior nodes.
    """
    if check_jacobian:
        _check_jacobian(c)
    l1, l2 = c.lam1[:, None], c.lam2[:, None]
    w1 = -l2 * c.y_r1          # x_{r1}
    w2 = -l1 * c.y_r2          # x_{r2}
    ht = c.t[1] - c.t[0]
    hth = c.theta[1] - c.theta[0]

    w1_t, w1_th = fd.derivative(w1, ht, axis=0), fd.derivative(w1, hth, axis=1)
    w2_t, w2_th = fd.derivative(w2, ht, axis=0), fd.derivative(w2, hth, axis=1)
    # d_{r2} w1 - d_{r1} w2, scaled by the size of the full gradient
    resid = np.abs(_interior(0.5 * (w1_th - w1_t) - 0.5 * (w2_th + w2_t)))
    residual = float(np.max(resid))
    scale = float(max(np.max(np.abs(_interior(d))) for d in (w1_t, w1_th, w2_t, w2_th)))
    if residual > tol * scale:
        i, j = np.unravel_index(np.argmax(resid), resid.shape)
        i, j = i + MARGIN, j + MARGIN
        raise NotClosed(
            f"dx is not closed: residual {residual:.3g} > {tol:g} * {scale:.3g} "
            f"at (t={c.t[i]:.6g}, theta={c.theta[j]:.6g})",
            residual=residual, scale=scale, node=[int(i), int(j)])
    x_t = w1 - w2
    x_th = w1 + w2
    it, ith = c.base
    x_a = _sweep(x_th, x_t, ht, hth, it, ith)          # theta first, then t
    x_b = _sweep(x_t.T, x_th.T, hth, ht, ith, it).T    # t first, then theta
    mismatch = float(np.max(np.abs(x_a - x_b)))
    path_scale = float(max(np.max(np.abs(x_t)) * (c.t[-1] - c.t[0]),
                           np.max(np.abs(x_th)) * (c.theta[-1] - c.theta[0])))
    return replace(c, x=x_a, x_t=x_t, x_theta=x_th, closedness=residual,
                   closedness_scale=scale, path_mismatch=mismatch,
                   path_scale=path_scale)


def build_chart(phase: PhaseTable, wave: WaveData, field: KGField, base=None,
                tol=CLOSED_TOL) -> ConformalChart:
    """Chart from a sampled Klein-Gordon field; base defaults to the centre node."""
    t, theta = field.t, field.theta
    u = phase.u_of_t(t)
    p1, p2 = phase.p(u)
    lam1, lam2 = characteristic_velocities(phase.profile, u)
    v = theta[None, :] - 0.5 * (p1 + p2)[:, None]
    y, y_t, y_th = _y_partials(wave, field)
    if base is None:
        base = (len(t) // 2, len(theta) // 2)
    chart = ConformalChart(t, theta, u, lam1, lam2, p1, p2, v, field.psi, y,
                           y_t, y_th, tuple(int(b) for b in base))
    return recover_x(chart, tol)


# ---------------------------------------------------------------------------
# metric
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NodeMetric:
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray


def _metric_from_uv(profile: Profile, u, v):
    phi = profile.phi.evaluate(u=np.asarray(u, dtype=float))
    ev = np.exp(v)
    return phi * ev, u * ev, (1.0 - phi) * ev


def assemble_metric(c: ConformalChart, p: Profile) -> NodeMetric:
    """(E, F, G) per node; raises PositivityViolation if the form degenerates."""
    U = np.broadcast_to(c.u[:, None], c.shape)
    E, F, G = _metric_from_uv(p, U, c.v)
    trace, det = E + G, E * G - F * F
    for name, arr in (("E+G", trace), ("EG-F^2", det)):
        if np.any(arr <= 0):
            i, j = np.unravel_index(np.argmin(arr), arr.shape)
            raise PositivityViolation(
                f"{name} = {arr[i, j]:.3g} <= 0 at node (t={c.t[i]:.6g}, "
                f"theta={c.theta[j]:.6g})", node=[int(i), int(j)])
    return NodeMetric(E, F, G)


# ---------------------------------------------------------------------------
# inversion
# ---------------------------------------------------------------------------

class ChartInverter:
    """Newton inversion of (t, theta) -> (x, y) on bicubic interpolants."""

    def __init__(self, c: ConformalChart, tol=1e-12, max_iter=50):
        self.chart = c
        self.tol = tol * max(1.0, float(np.max(np.abs(c.x))), float(np.max(np.abs(c.y))))
        self.max_iter = max_iter
        self.sx = RectBivariateSpline(c.t, c.theta, c.x, kx=3, ky=3, s=0)
        self.sy = RectBivariateSpline(c.t, c.theta, c.y, kx=3, ky=3, s=0)
        pts = np.column_stack([c.x.ravel(), c.y.ravel()])
        self.tree = cKDTree(pts)
        T, TH = np.meshgrid(c.t, c.theta, indexing="ij")
        self.nodes = np.column_stack([T.ravel(), TH.ravel()])
        # largest distance between neighbouring nodes in the image
        dx = np.hypot(np.diff(c.x, axis=0), np.diff(c.y, axis=0)).max()
        dy = np.hypot(np.diff(c.x, axis=1), np.diff(c.y, axis=1)).max()
        self.reach = 2.0 * max(dx, dy)
        self.box = (c.t[0], c.t[-1], c.theta[0], c.theta[-1])

    def forward(self, t, th):
        return self.sx.ev(t, th), self.sy.ev(t, th)

    def locate(self, x, y):
        """(t, theta, ok, residual) without raising; ok marks converged in-chart points."""
        x = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
        y = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
        dist, idx = self.tree.query(np.column_stack([x, y]))
        t = self.nodes[idx, 0].copy()
        th = self.nodes[idx, 1].copy()
        t_lo, t_hi, th_lo, th_hi = self.box
        res = np.full(x.shape, np.inf)
        for _ in range(self.max_iter):
            rx = self.sx.ev(t, th) - x
            ry = self.sy.ev(t, th) - y
            res = np.maximum(np.abs(rx), np.abs(ry))
            if np.all(res <= self.tol):
                break
            a = self.sx.ev(t, th, dx=1)
            b = self.sx.ev(t, th, dy=1)
            c = self.sy.ev(t, th, dx=1)
            d = self.sy.ev(t, th, dy=1)
            det = a * d - b * c
            det = np.where(det == 0, np.finfo(float).tiny, det)
            t = np.clip(t - (d * rx - b * ry) / det, t_lo - 0.05 * (t_hi - t_lo),
                        t_hi + 0.05 * (t_hi - t_lo))
            th = np.clip(th - (a * ry - c * rx) / det, th_lo - 0.05 * (th_hi - th_lo),
                         th_hi + 0.05 * (th_hi - th_lo))
        slack_t = 1e-9 * (t_hi - t_lo)
        slack_th = 1e-9 * (th_hi - th_lo)
        inside = ((t >= t_lo - slack_t) & (t <= t_hi + slack_t)
                  & (th >= th_lo - slack_th) & (th <= th_hi + slack_th))
        ok = (dist <= self.reach) & inside & (res <= self.tol)
        return t, th, ok, res, dist, inside

    def __call__(self, x, y):
        shape = np.shape(np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))[0])
        t, th, ok, res, dist, inside = self.locate(*np.broadcast_arrays(x, y))
        if np.any(dist > self.reach):
            k = int(np.argmax(dist))
            raise OutsideChart("query has no seed inside the chart image",
                               query=[float(np.ravel(x)[k] if np.ndim(x) else x),
                                      float(np.ravel(y)[k] if np.ndim(y) else y)],
                               distance=float(dist[k]))
        if np.any(~inside):
            k = int(np.argmax(~inside))
            raise OutsideChart("query maps outside the (t, theta) rectangle",
                               t=float(t[k]), theta=float(th[k]))
        if np.any(~ok):
            k = int(np.argmax(res))
            raise NewtonDivergence(f"Newton did not converge; residual {res[k]:.3g}",
                                   residual=float(res[k]))
        return t.reshape(shape), th.reshape(shape)


def invert_chart(c: ConformalChart, phase: PhaseTable, x, y, inverter=None):
    """(t, theta, u, v) for query points in the chart image."""
    inv = inverter or ChartInverter(c)
    t, th = inv(x, y)
    u = phase.u_of_t(t)
    p1, p2 = phase.p(u)
    return t, th, u, th - 0.5 * (p1 + p2)


class ChartMetric:
    """(E, F, G) as functions of (x, y) through the chart inverse."""

    def __init__(self, c: ConformalChart, phase: PhaseTable, inverter=None):
        self.chart = c
        self.phase = phase
        self.inverter = inverter or ChartInverter(c)

    def __call__(self, x, y):
        _, _, u, v = invert_chart(self.chart, self.phase, x, y, self.inverter)
        return _metric_from_uv(self.phase.profile, u, v)

    def inside(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        ok = self.inverter.locate(x, y)[2]
        return ok.reshape(x.shape)


def star_domain(c: ConformalChart, n=41, shrink=0.9):
    """Square (xs, ys) around the base point inscribed in the chart image."""
    x0, y0 = c.base_xy
    edges = np.concatenate([
        np.column_stack([c.x[0], c.y[0]]), np.column_stack([c.x[-1], c.y[-1]]),
        np.column_stack([c.x[:, 0], c.y[:, 0]]), np.column_stack([c.x[:, -1], c.y[:, -1]])])
    r = float(np.min(np.hypot(edges[:, 0] - x0, edges[:, 1] - y0)))
    a = shrink * r / np.sqrt(2.0)
    return np.linspace(x0 - a, x0 + a, n), np.linspace(y0 - a, y0 + a, n)


# ---------------------------------------------------------------------------
# potential
# ---------------------------------------------------------------------------

@dataclass
class ReconstructedPotential:
    base: tuple
    xs: np.ndarray
    ys: np.ndarray
    f: np.ndarray      # indexed [ix, iy]
    gauge: str = "f(base) = 0 and grad f(base) = 0"

    def __post_init__(self):
        self._spline = RectBivariateSpline(self.xs, self.ys, self.f, kx=3, ky=3, s=0)

    def __call__(self, x, y, dx=0, dy=0):
        # the spline would silently clamp to the box edge
        x, y = np.asarray(x, float), np.asarray(y, float)
        slack = 1e-12 * max(self.xs[-1] - self.xs[0], self.ys[-1] - self.ys[0])
        out = ((x < self.xs[0] - slack) | (x > self.xs[-1] + slack)
               | (y < self.ys[0] - slack) | (y > self.ys[-1] + slack))
        if np.any(out):
            k = int(np.argmax(np.ravel(np.broadcast_to(out, np.broadcast(x, y).shape))))
            px, py = (float(np.ravel(np.broadcast_to(a, out.shape))[k]) for a in (x, y))
            raise OutsideDomain(f"({px:.6g}, {py:.6g}) is outside the reconstruction box",
                                point=[px, py],
                                box=[float(self.xs[0]), float(self.xs[-1]),
                                     float(self.ys[0]), float(self.ys[-1])])
        return self._spline.ev(x, y, dx=dx, dy=dy)


def reconstruct_potential(m, base, xs, ys, inside=None, tol=1e-10, ray_samples=17):
    """f(base + d) = int_0^1 (1 - s) d^T H(base + s d) d ds on the grid xs x ys.

    `m(x, y)` returns (E, F, G). If `inside(x, y)` is given, every segment
    from the base point is sampled and must stay inside the domain.
    """
    x0, y0 = map(float, base)
    X, Y = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float), indexing="ij")
    dX, dY = X - x0, Y - y0
    if inside is not None:
        s = np.linspace(0.0, 1.0, ray_samples)[:, None, None]
        ok = np.asarray(inside(x0 + s * dX, y0 + s * dY))
        bad = ~np.all(ok, axis=0)
        if np.any(bad):
            i, j = np.unravel_index(np.argmax(bad), bad.shape)
            raise NotStarShaped("segment from base leaves the domain",
                                base=[x0, y0], ray_end=[float(X[i, j]), float(Y[i, j])])
    dx, dy = dX.ravel(), dY.ravel()

    def integrand(s):
        E, F, G = m(x0 + s * dx, y0 + s * dy)
        return (1.0 - s) * (E * dx * dx + 2.0 * F * dx * dy + G * dy * dy)

    vals, _ = quad_vec(integrand, 0.0, 1.0, epsabs=tol, epsrel=tol, norm="max")
    return ReconstructedPotential((x0, y0), np.asarray(xs, float),
                                  np.asarray(ys, float), vals.reshape(X.shape))


@dataclass
class RoundtripReport:
    hessian_rel_err: float
    integrability_max: float
    integrability_abs: float
    flatness_max: float
    curvature_max: float
    pd_min_trace: float
    pd_min_det: float
    nondegeneracy_min: float
    nondegeneracy_zero_crossing: bool

    def to_dict(self):
        return {k: (float(v) if not isinstance(v, bool) else v)
                for k, v in asdict(self).items()}

    def passed(self, hessian=1e-5, integrability=1e-5, curvature=1e-4):
        return bool(self.hessian_rel_err < hessian
                    and self.integrability_max < integrability
                    and self.curvature_max < curvature
                    and self.pd_min_trace > 0 and self.pd_min_det > 0)


def _crosses_zero(a):
    return bool(np.any(a > 0) and np.any(a < 0))


def verify_roundtrip(rp: ReconstructedPotential, m, margin=MARGIN, h=None,
                     accuracy=6) -> RoundtripReport:
    """Difference-based diagnostics of f against the metric on the rp grid.

    Interior nodes only. The Hessian of f uses grid stencils of the given
    accuracy; partials of (E, F, G) are pointwise central differences with
    step `h` (default: the smaller of 2.5e-4 and a quarter grid step). Third
    derivatives of f are taken from the metric as (E_x, (E_y + F_x)/2,
    (F_y + G_x)/2, G_y).
    """
    hx, hy = rp.xs[1] - rp.xs[0], rp.ys[1] - rp.ys[0]
    h = h or min(2.5e-4, hx / 4, hy / 4)
    X, Y = np.meshgrid(rp.xs, rp.ys, indexing="ij")
    Xi, Yi = _interior(X, margin), _interior(Y, margin)

    def stacked(x, y):
        return np.stack([np.asarray(a, float) for a in m(x, y)])

    E, F, G = stacked(Xi, Yi)
    Ex, Fx, Gx = fd.partial(stacked, Xi, Yi, 1, 0, h)
    Ey, Fy, Gy = fd.partial(stacked, Xi, Yi, 0, 1, h)
    I = lambda a: _interior(a, margin)  # noqa: E731
    fxx = I(fd.derivative(rp.f, hx, axis=0, order=2, accuracy=accuracy))
    fyy = I(fd.derivative(rp.f, hy, axis=1, order=2, accuracy=accuracy))
    fxy = I(fd.derivative(fd.derivative(rp.f, hx, axis=0, accuracy=accuracy), hy,
                          axis=1, accuracy=accuracy))
    hscale = max(np.max(np.abs(E)), np.max(np.abs(F)), np.max(np.abs(G)))
    herr = max(np.max(np.abs(fxx - E)), np.max(np.abs(fxy - F)),
               np.max(np.abs(fyy - G))) / hscale
    integ = max(np.max(np.abs(Ey - Fx)), np.max(np.abs(Fy - Gx)))
    dscale = max(np.max(np.abs(d)) for d in (Ex, Ey, Fx, Fy, Gx, Gy))
    a, b, c, d = Ex, 0.5 * (Ey + Fx), 0.5 * (Fy + Gx), Gy
    det3 = E * (b * d - c * c) + F * (c * b - a * d) + G * (a * c - b * b)
    trace, det2 = E + G, E * G - F * F
    K = -det3 / (4.0 * det2 ** 2)
    b0 = bracket(Ex + Gx, Ey + Gy, Fx, Fy)
    b1 = b0 ** 2
    b2 = bracket(Ex, Ey, Fx, Fy) ** 2 + bracket(Gx, Gy, Fx, Fy) ** 2
    return RoundtripReport(
        hessian_rel_err=float(herr),
        integrability_max=float(integ / max(dscale, 1e-300)),
        integrability_abs=float(integ),
        flatness_max=float(np.max(np.abs(det3))),
        curvature_max=float(np.max(np.abs(K))),
        pd_min_trace=float(np.min(trace)),
        pd_min_det=float(np.min(det2)),
        nondegeneracy_min=float(min(np.min(b1), np.min(b2))),
        nondegeneracy_zero_crossing=_crosses_zero(b0) or bool(np.any(b2 == 0)),
    )
