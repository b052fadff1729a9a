"""Named potentials used as fixtures by the tests and the ``catalog`` command."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (ClosedFormField, ConeWitness, Domain, Grid, MetricTriple,
                       cone_identity_check, curvature_from_bundle,
                       euler_homogeneity_residual, normalized_rank_test,
                       radial_flat_fit)


@dataclass(frozen=True)
class Fixture:
    name: str
    potential: str
    domain: Domain
    flat: bool
    sample_point: tuple
    description: str
    witness: str | None = None        # cone witness, coefficient:exponents form
    degree: float | None = None       # homogeneity degree
    annulus: tuple | None = None      # (r_min, r_max) sampling region
    radial_C: float | None = None

    def field(self):
        return ClosedFormField(self.potential, self.domain, self.name)

    def grid(self, n=41):
        return Grid.uniform(self.domain.x, self.domain.y, n)

    def points(self, n=41, shrink=1.0):
        """Sample points: the annulus when one is declared, else the box grid.

        `shrink` < 1 pulls the samples towards the box centre, leaving room
        for difference stencils.
        """
        if self.annulus is None:
            (a, b), (c, d) = self.domain.x, self.domain.y
            mx, my = (a + b) / 2, (c + d) / 2
            rx, ry = shrink * (b - a) / 2, shrink * (d - c) / 2
            return Grid.uniform((mx - rx, mx + rx), (my - ry, my + ry), n).mesh()
        r = shrink * np.linspace(*self.annulus, n)
        a = np.linspace(0.0, 2 * np.pi, 4 * n, endpoint=False)
        R, A = np.meshgrid(r, a, indexing="ij")
        return R * np.cos(A), R * np.sin(A)


FIXTURES = {f.name: f for f in [
    Fixture("example-4.2", "x^2/(2*y) + y*log(y)/4",
            Domain((-1.0, 1.0), (0.5, 2.0)), True, (1.0, 1.0),
            "upper half-plane potential whose Hessian metric is the Euclidean "
            "plane in polar form",
            witness="1:2,0,0; -4:1,0,1; 4:0,2,0"),
    Fixture("homogeneous-r4", "(x^2+y^2)^2",
            Domain((-1.0, 1.0), (-1.0, 1.0)), True, (0.6, 0.3),
            "homogeneous of degree 4, flat away from the origin",
            degree=4.0, annulus=(0.5, 1.0)),
    Fixture("separable-exp", "exp(x) + exp(y)",
            Domain((-1.0, 1.0), (-1.0, 1.0)), True, (0.2, -0.3),
            "separable potential a(x) + b(y)",
            witness="1:0,1,0"),
    Fixture("radial-Cr2", "3*(x^2+y^2)",
            Domain((-1.0, 1.0), (-1.0, 1.0)), True, (0.0, 0.0),
            "the radially symmetric flat potential with C = 3",
            degree=2.0, radial_C=3.0),
    Fixture("nonflat-x2y2", "x^2 + y^2 + x^2*y^2",
            Domain((0.0, 0.9), (0.0, 0.9)), False, (0.5, 0.5),
            "non-flat control; K(0.5, 0.5) = 16/110.25"),
]}


def get_fixture(name) -> Fixture:
    try:
        return FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; available: {', '.join(FIXTURES)}")


def run_fixture(name, n=41, tol=1e-8):
    """Full geometric verification of a fixture; returns (passed, summary dict)."""
    fx = get_fixture(name)
    f = fx.field()
    x, y = fx.points(n)
    b = f.bundle(x, y)
    K, det3 = curvature_from_bundle(b, where=(x, y))
    sx, sy = fx.sample_point
    Ks, _ = curvature_from_bundle(f.bundle(sx, sy))
    summary = {
        "fixture": name,
        "potential": fx.potential,
        "flat_expected": fx.flat,
        "curvature_max": float(np.max(np.abs(K))),
        "flatness_max": float(np.max(np.abs(det3))),
        "sample_point": [sx, sy],
        "curvature_at_sample": float(Ks),
    }
    flat = summary["curvature_max"] < tol
    checks = [flat == fx.flat]
    m = MetricTriple.from_potential(f)
    if fx.witness:
        w = ConeWitness.from_string(fx.witness)
        summary["cone_residual"] = cone_identity_check(m, w, (x, y))
        checks.append(summary["cone_residual"] < 1e-12)
    if fx.degree is not None and fx.annulus is not None:
        summary["euler_residual"] = euler_homogeneity_residual(f, fx.degree, (x, y))
        checks.append(summary["euler_residual"] < 1e-10)
    if fx.radial_C is not None:
        fit = radial_flat_fit(f)
        summary["radial_C"] = fit.C
        summary["radial_residual"] = fit.residual
        checks.append(abs(fit.C - fx.radial_C) < 1e-12 and fit.residual < 1e-12)
    if fx.flat and fx.witness is None:
        rank = normalized_rank_test(m, fx.points(n, shrink=0.95))
        summary["rank_cross_max"] = rank
    summary["passed"] = bool(all(checks))
    return summary["passed"], summary
