"""Curvature and flatness diagnostics for Hessian potentials in two variables.

For a potential f with positive-definite Hessian, the metric
``g = f_xx dx^2 + 2 f_xy dx dy + f_yy dy^2`` has Gaussian curvature

    K = -det3 / (4 det2^2),

where ``det2 = f_xx f_yy - f_xy^2`` and ``det3`` is the determinant of the
3x3 matrix with columns (f_xx, f_xy, f_yy), (f_xxx, f_xxy, f_xyy) and
(f_xxy, f_xyy, f_yyy). The metric is flat exactly when det3 vanishes, which
in turn happens exactly when (f_xx, f_xy, f_yy) stays on a cone through the
origin.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import RectBivariateSpline

from . import fd
from .errors import (GridError, HesseFlatError, NotFlat, NotPositiveDefinite,
                     NotRadiallySymmetric, OutsideDomain)
from .expr import BundleTrees, DiffBundle, Expr, parse

PD_TOL = 1e-12
NUMERATOR_RTOL = 1e-9


@dataclass(frozen=True)
class Domain:
    """Closed rectangle x-interval by y-interval (infinite by default)."""
    x: tuple = (-np.inf, np.inf)
    y: tuple = (-np.inf, np.inf)

    def contains(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        return ((x >= self.x[0]) & (x <= self.x[1])
                & (y >= self.y[0]) & (y <= self.y[1]))

    def check(self, x, y):
        inside = self.contains(x, y)
        if not np.all(inside):
            bad = np.argwhere(np.atleast_1d(~inside))[0]
            px = float(np.atleast_1d(np.broadcast_to(x, inside.shape))[tuple(bad)])
            py = float(np.atleast_1d(np.broadcast_to(y, inside.shape))[tuple(bad)])
            raise OutsideDomain(f"point ({px}, {py}) outside domain {self.x} x {self.y}",
                                point=[px, py], domain=[list(self.x), list(self.y)])


@dataclass(frozen=True)
class Grid:
    """Tensor grid of sample points; arrays are indexed [ix, iy]."""
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        if len(self.xs) == 0 or len(self.ys) == 0:
            raise GridError("empty grid")

    @classmethod
    def uniform(cls, xrange, yrange, nx, ny=None):
        return cls(np.linspace(*xrange, nx), np.linspace(*yrange, ny or nx))

    @property
    def shape(self):
        return len(self.xs), len(self.ys)

    @property
    def hx(self):
        return self.xs[1] - self.xs[0]

    @property
    def hy(self):
        return self.ys[1] - self.ys[0]

    def mesh(self):
        return np.meshgrid(self.xs, self.ys, indexing="ij")


def _points(grid):
    """Accept a Grid or a pair of coordinate arrays."""
    if isinstance(grid, Grid):
        return grid.mesh()
    x, y = (np.asarray(a, dtype=float) for a in grid)
    if x.size == 0:
        raise GridError("empty grid")
    return x, y


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------

class ScalarField2D:
    """Uniform derivative-query interface: point -> DiffBundle."""
    provenance = "abstract"
    domain = Domain()

    def bundle(self, x, y) -> DiffBundle:
        raise NotImplementedError

    def __call__(self, x, y):
        return self.bundle(x, y).f


class ClosedFormField(ScalarField2D):
    """A potential given by an expression; derivatives are symbolic."""
    provenance = "closed-form"

    def __init__(self, source, domain=Domain(), name=None):
        self.expr = parse(source) if isinstance(source, str) else source
        self.domain = domain
        self.name = name or str(self.expr)
        self._trees = BundleTrees(self.expr)

    def bundle(self, x, y):
        self.domain.check(x, y)
        return self._trees(x, y)

    def __repr__(self):
        return f"ClosedFormField({self.name!r})"


class SampledField(ScalarField2D):
    """A potential known only on a uniform grid.

    Derivative tables use 4th-order stencils with step equal to the grid
    spacing; third derivatives come from nested application. Off-node
    queries interpolate each table bicubically.
    """
    provenance = "finite-difference-wrapped sample grid"

    def __init__(self, grid: Grid, values):
        self.grid = grid
        self.values = np.asarray(values, dtype=float)
        self.domain = Domain((grid.xs[0], grid.xs[-1]), (grid.ys[0], grid.ys[-1]))
        hx, hy = grid.hx, grid.hy

        def dx(a):
            return fd.derivative(a, hx, axis=0)

        def dy(a):
            return fd.derivative(a, hy, axis=1)

        f = self.values
        fxx = fd.derivative(f, hx, axis=0, order=2)
        fyy = fd.derivative(f, hy, axis=1, order=2)
        fx = dx(f)
        self.tables = {
            "f": f, "fx": fx, "fy": dy(f),
            "fxx": fxx, "fxy": dy(fx), "fyy": fyy,
            "fxxx": dx(fxx), "fxxy": dy(fxx), "fxyy": dx(fyy), "fyyy": dy(fyy),
        }
        self._splines = {}

    def _spline(self, name):
        if name not in self._splines:
            self._splines[name] = RectBivariateSpline(self.grid.xs, self.grid.ys,
                                                      self.tables[name])
        return self._splines[name]

    def bundle(self, x, y):
        self.domain.check(x, y)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        xb, yb = np.broadcast_to(x, shape), np.broadcast_to(y, shape)
        return DiffBundle(**{k: self._spline(k).ev(xb, yb).reshape(shape)
                             for k in self.tables})

    def node_bundle(self):
        """Derivative tables at the grid nodes, without interpolation."""
        return DiffBundle(**self.tables)


@dataclass(frozen=True)
class MetricTriple:
    """Coefficients (E, F, G) of ``E dx^2 + 2F dx dy + G dy^2`` as callables."""
    E: Callable
    F: Callable
    G: Callable
    domain: Domain = field(default_factory=Domain)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        shape = np.broadcast(x, y).shape
        return tuple(np.broadcast_to(c(x, y), shape).astype(float)
                     for c in (self.E, self.F, self.G))

    @classmethod
    def from_potential(cls, f: ScalarField2D):
        return cls(lambda x, y: f.bundle(x, y).fxx,
                   lambda x, y: f.bundle(x, y).fxy,
                   lambda x, y: f.bundle(x, y).fyy, f.domain)

    @classmethod
    def from_expressions(cls, E, F, G, domain=Domain()):
        trees = [parse(s) if isinstance(s, str) else s for s in (E, F, G)]
        return cls(*(_expr_callable(t) for t in trees), domain)

    @classmethod
    def constant(cls, e, f, g):
        return cls(lambda x, y: e + 0 * x, lambda x, y: f + 0 * x,
                   lambda x, y: g + 0 * x)


def _expr_callable(e: Expr):
    def fn(x, y):
        return e.evaluate(x=x, y=y)
    return fn


# ---------------------------------------------------------------------------
# pointwise diagnostics
# ---------------------------------------------------------------------------

def bracket(ax, ay, bx, by):
    """Poisson bracket {a, b} = a_x b_y - a_y b_x from first partials."""
    return ax * by - ay * bx


def poisson_bracket(a: ScalarField2D, b: ScalarField2D, point):
    """{a, b} at `point`, normalised so that {x, y} = 1."""
    x, y = point
    ba, bb = a.bundle(x, y), b.bundle(x, y)
    return bracket(ba.fx, ba.fy, bb.fx, bb.fy)


def check_positive_definite(E, F, G, where=None):
    """Raise NotPositiveDefinite unless E + G > 0 and EG - F^2 > 0.

    Both inequalities are tested after scaling by max(|E|, |F|, |G|), so a
    vanishing Hessian is never declared positive definite.
    """
    E, F, G = np.broadcast_arrays(*(np.asarray(c, dtype=float) for c in (E, F, G)))
    scale = np.maximum(np.maximum(np.abs(E), np.abs(F)), np.abs(G))
    trace = E + G
    det = E * G - F * F
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = (scale > 0) & (trace / scale > PD_TOL) & (det / scale ** 2 > PD_TOL)
    if not np.all(ok):
        idx = tuple(np.argwhere(np.atleast_1d(~ok))[0])
        t = float(np.atleast_1d(trace)[idx])
        d = float(np.atleast_1d(det)[idx])
        loc = None
        if where is not None:
            loc = [float(np.atleast_1d(np.broadcast_to(w, ok.shape))[idx]) for w in where]
        raise NotPositiveDefinite(
            f"Hessian not positive definite at {loc}: trace={t:.6g}, det={d:.6g}",
            point=loc, trace=t, det=d)
    return trace, det


def _det3(b: DiffBundle):
    E, F, G = b.fxx, b.fxy, b.fyy
    a, c2, c3, d = b.fxxx, b.fxxy, b.fxyy, b.fyyy
    return E * (c2 * d - c3 * c3) + F * (c3 * c2 - a * d) + G * (a * c3 - c2 * c2)


def _bracket_numerator(b: DiffBundle):
    # f_xx{f_xy, f_yy} + f_xy{f_yy, f_xx} + f_yy{f_xx, f_xy}
    return (b.fxx * bracket(b.fxxy, b.fxyy, b.fxyy, b.fyyy)
            + b.fxy * bracket(b.fxyy, b.fyyy, b.fxxx, b.fxxy)
            + b.fyy * bracket(b.fxxx, b.fxxy, b.fxxy, b.fxyy))


def curvature_from_bundle(b: DiffBundle, where=None):
    """K and det3 from a derivative bundle; checks PD and both numerator forms."""
    _, det2 = check_positive_definite(b.fxx, b.fxy, b.fyy, where)
    det3 = _det3(b)
    alt = _bracket_numerator(b)
    scale = (np.abs(b.fxx) * (np.abs(b.fxxy * b.fyyy) + b.fxyy ** 2)
             + np.abs(b.fxy) * (np.abs(b.fxyy * b.fxxy) + np.abs(b.fxxx * b.fyyy))
             + np.abs(b.fyy) * (np.abs(b.fxxx * b.fxyy) + b.fxxy ** 2))
    if np.any(np.abs(det3 - alt) > NUMERATOR_RTOL * scale + 1e-300):
        raise HesseFlatError("Poisson-bracket and determinant numerators disagree")
    return -det3 / (4.0 * det2 ** 2), det3


def hessian_curvature(f: ScalarField2D, point):
    """Gaussian curvature of the Hessian metric of `f` at `point`."""
    x, y = point
    K, _ = curvature_from_bundle(f.bundle(x, y), where=(x, y))
    return K


def flatness_residual(f: ScalarField2D, point):
    """The unnormalised flatness residual det3 (zero iff flat)."""
    x, y = point
    return _det3(f.bundle(x, y))


def brioschi_oracle(m: MetricTriple, point, h=1e-3):
    """Gaussian curvature of a general metric triple by Brioschi's formula.

    Partials of E, F, G up to second order come from 4th-order central
    differences with step `h`; no potential is involved.
    """
    x, y = (np.asarray(c, dtype=float) for c in point)
    E, F, G = m(x, y)
    check_positive_definite(E, F, G, where=(x, y))

    def d(c, nx, ny):
        return fd.partial(c, x, y, nx, ny, h)

    Eu, Ev, Evv = d(m.E, 1, 0), d(m.E, 0, 1), d(m.E, 0, 2)
    Fu, Fv, Fuv = d(m.F, 1, 0), d(m.F, 0, 1), d(m.F, 1, 1)
    Gu, Gv, Guu = d(m.G, 1, 0), d(m.G, 0, 1), d(m.G, 2, 0)
    a11 = -0.5 * Evv + Fuv - 0.5 * Guu
    A = np.array([[a11, 0.5 * Eu, Fu - 0.5 * Ev],
                  [Fv - 0.5 * Gu, E, F],
                  [0.5 * Gv, F, G]], dtype=float)
    zero = np.zeros_like(E)
    B = np.array([[zero, 0.5 * Ev, 0.5 * Gu],
                  [0.5 * Ev, E, F],
                  [0.5 * Gu, F, G]], dtype=float)
    detA = np.linalg.det(np.moveaxis(A, (0, 1), (-2, -1)))
    detB = np.linalg.det(np.moveaxis(B, (0, 1), (-2, -1)))
    return (detA - detB) / (E * G - F * F) ** 2


# ---------------------------------------------------------------------------
# cone characterisation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConeWitness:
    """Homogeneous polynomial P(a, b, c) = sum coef * a^i b^j c^k."""
    terms: tuple      # ((coef, (i, j, k)), ...)
    degree: int
    tol: float = 1e-12

    def __post_init__(self):
        if not self.terms:
            raise ValueError("cone witness needs at least one term")
        for coef, exps in self.terms:
            if sum(exps) != self.degree:
                raise ValueError(f"monomial {exps} is not of degree {self.degree}")

    @classmethod
    def from_string(cls, text, tol=1e-12):
        """Parse ``"1:2,0,0; -4:1,0,1; 4:0,2,0"`` (coefficient:exponents)."""
        terms = []
        for chunk in text.split(";"):
            if not chunk.strip():
                continue
            coef, exps = chunk.split(":")
            terms.append((float(coef), tuple(int(e) for e in exps.split(","))))
        degrees = {sum(e) for _, e in terms}
        if len(degrees) != 1:
            raise ValueError(f"mixed monomial degrees {sorted(degrees)}")
        return cls(tuple(terms), degrees.pop(), tol)

    def __call__(self, a, b, c):
        return sum(coef * a ** i * b ** j * c ** k for coef, (i, j, k) in self.terms)


def cone_identity_check(m: MetricTriple, w: ConeWitness, grid):
    """Max over the grid of |P(E,F,G)| / max(|E|,|F|,|G|)^degree."""
    x, y = _points(grid)
    E, F, G = m(x, y)
    scale = np.maximum(np.maximum(np.abs(E), np.abs(F)), np.abs(G))
    return float(np.max(np.abs(w(E, F, G)) / scale ** w.degree))


def normalized_rank_test(m, grid, h=1e-3):
    """Max over the grid of |N_x x N_y| with N = (E,F,G)/|(E,F,G)|.

    A vanishing cross product means the direction of (E, F, G) moves along
    a curve on the sphere, i.e. the triple lies on a cone. For a callable
    triple the partials are pointwise central differences with step `h`;
    for a triple of arrays sampled on `grid` they use the grid spacing.
    """
    if isinstance(m, MetricTriple):
        x, y = _points(grid)

        def N(px, py):
            v = np.stack(m(px, py))
            return v / np.linalg.norm(v, axis=0)

        Nx = fd.partial(N, x, y, 1, 0, h)
        Ny = fd.partial(N, x, y, 0, 1, h)
    else:
        if not isinstance(grid, Grid):
            raise GridError("sampled triples need a tensor Grid")
        v = np.stack([np.asarray(c, dtype=float) for c in m])
        v = v / np.linalg.norm(v, axis=0)
        Nx = fd.derivative(v, grid.hx, axis=1)
        Ny = fd.derivative(v, grid.hy, axis=2)
    return float(np.max(np.linalg.norm(np.cross(Nx, Ny, axis=0), axis=0)))


def euler_homogeneity_residual(f: ScalarField2D, d, grid):
    """Max of |(2-d)H + x H_x + y H_y| / max|H| over the grid.

    Zero for potentials homogeneous of degree `d`.
    """
    x, y = _points(grid)
    if np.any((x == 0) & (y == 0)):
        raise GridError("grid contains the origin")
    b = f.bundle(x, y)
    H = [b.fxx, b.fxy, b.fyy]
    Hx = [b.fxxx, b.fxxy, b.fxyy]
    Hy = [b.fxxy, b.fxyy, b.fyyy]
    resid = np.max([np.abs((2 - d) * h + x * hx + y * hy)
                    for h, hx, hy in zip(H, Hx, Hy)], axis=0)
    scale = np.max([np.abs(h) for h in H], axis=0)
    return float(np.max(resid / scale))


def disk_points(radius=1.0, n=41, include_center=True):
    """Points of an n-by-n tensor grid lying in the closed disk."""
    s = np.linspace(-radius, radius, n)
    X, Y = np.meshgrid(s, s, indexing="ij")
    inside = X ** 2 + Y ** 2 <= radius ** 2 * (1 + 1e-12)
    x, y = X[inside], Y[inside]
    if include_center and not np.any((x == 0) & (y == 0)):
        x, y = np.append(x, 0.0), np.append(y, 0.0)
    return x, y


@dataclass(frozen=True)
class RadialFit:
    C: float
    residual: float


def radial_flat_fit(f: ScalarField2D, radius=1.0, n=41, sym_tol=1e-9, flat_tol=1e-8):
    """Fit f = C (x^2 + y^2) for a radially symmetric flat potential on a disk.

    The affine jet of f at the centre is removed first, since a Hessian
    determines its potential only up to affine terms.
    """
    x, y = disk_points(radius, n)
    c0 = f.bundle(0.0, 0.0)

    def gauged(px, py):
        return f.bundle(px, py).f - c0.f - c0.fx * px - c0.fy * py

    g = gauged(x, y)
    asym = float(np.max(np.abs(g - gauged(-y, x))))
    if asym > sym_tol:
        raise NotRadiallySymmetric(
            f"|f(x,y) - f(-y,x)| reaches {asym:.3g}", max_asymmetry=asym)
    b = f.bundle(x, y)
    check_positive_definite(b.fxx, b.fxy, b.fyy, where=(x, y))
    K, _ = curvature_from_bundle(b)
    kmax = float(np.max(np.abs(K)))
    if kmax > flat_tol:
        idx = int(np.argmax(np.abs(K)))
        raise NotFlat(f"curvature reaches {kmax:.3g} at ({x[idx]:.3g}, {y[idx]:.3g})",
                      curvature_max=kmax, point=[float(x[idx]), float(y[idx])])
    r2 = x ** 2 + y ** 2
    C = float(np.sum(g * r2) / np.sum(r2 * r2))
    return RadialFit(C, float(np.max(np.abs(g - C * r2))))


# ---------------------------------------------------------------------------
# grid sweeps
# ---------------------------------------------------------------------------

def curvature_grid(f: ScalarField2D, grid: Grid):
    """Columns x, y, E, F, G, K, residual over the grid (flattened, x-major)."""
    X, Y = grid.mesh()
    b = f.bundle(X, Y)
    K, det3 = curvature_from_bundle(b, where=(X, Y))
    return {"x": X.ravel(), "y": Y.ravel(), "E": np.ravel(b.fxx),
            "F": np.ravel(b.fxy), "G": np.ravel(b.fyy), "K": np.ravel(K),
            "residual": np.ravel(det3)}
