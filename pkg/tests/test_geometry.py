import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hesseflat.errors import (GridError, NotFlat, NotPositiveDefinite,
                              NotRadiallySymmetric, OutsideDomain)
from hesseflat.geometry import (ClosedFormField, ConeWitness, Domain, Grid, MetricTriple,
                                SampledField, brioschi_oracle, cone_identity_check,
                                curvature_grid, euler_homogeneity_residual,
                                flatness_residual, hessian_curvature,
                                normalized_rank_test, poisson_bracket, radial_flat_fit)

EX42 = "x^2/(2*y) + y*log(y)/4"


def test_nonflat_curvature_value():
    f = ClosedFormField("x^2 + y^2 + x^2*y^2")
    assert hessian_curvature(f, (0.5, 0.5)) == pytest.approx(16 / 110.25, rel=1e-12)
    assert flatness_residual(f, (0.5, 0.5)) == pytest.approx(-16, rel=1e-12)


def test_brioschi_agrees_with_hessian_formula():
    f = ClosedFormField("x^2 + y^2 + x^2*y^2")
    m = MetricTriple.from_potential(f)
    assert brioschi_oracle(m, (0.5, 0.5)) == pytest.approx(16 / 110.25, rel=1e-6)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.6), st.floats(0.1, 0.6), st.floats(0.05, 0.5))
def test_brioschi_oracle_property(x, y, c):
    # both curvature routes agree for a family of non-flat potentials
    f = ClosedFormField(f"exp(x) + exp(y) + {c!r}*x^2*y^2")
    m = MetricTriple.from_potential(f)
    K = hessian_curvature(f, (x, y))
    assert brioschi_oracle(m, (x, y)) == pytest.approx(K, rel=1e-5, abs=1e-8)


def test_brioschi_on_plane_is_zero():
    m = MetricTriple.from_expressions("1", "0", "x^2")
    # E = 1, G = x^2: polar form of the flat plane
    assert abs(brioschi_oracle(m, (0.7, 0.2))) < 1e-8


def test_example_flat_on_grid():
    f = ClosedFormField(EX42, Domain((-1, 1), (0.5, 2)))
    cols = curvature_grid(f, Grid.uniform((-1, 1), (0.5, 2), 101))
    assert np.max(np.abs(cols["K"])) < 1e-8
    assert set(cols) == {"x", "y", "E", "F", "G", "K", "residual"}


def test_cone_witness():
    f = ClosedFormField(EX42, Domain((-1, 1), (0.5, 2)))
    m = MetricTriple.from_potential(f)
    w = ConeWitness.from_string("1:2,0,0; -4:1,0,1; 4:0,2,0")
    assert w.degree == 2
    grid = Grid.uniform((-1, 1), (0.5, 2), 51)
    assert cone_identity_check(m, w, grid) < 1e-12
    # the non-flat control does not lie on this cone
    g = MetricTriple.from_potential(ClosedFormField("x^2 + y^2 + x^2*y^2"))
    assert cone_identity_check(g, w, Grid.uniform((0.1, 0.9), (0.1, 0.9), 11)) > 1e-3


def test_rank_test_separates_flat_from_nonflat():
    flat = MetricTriple.from_potential(ClosedFormField(EX42, Domain((-1, 1), (0.5, 2))))
    grid = Grid.uniform((-0.9, 0.9), (0.6, 1.9), 41)
    assert normalized_rank_test(flat, grid) < 1e-6
    bent = MetricTriple.from_potential(ClosedFormField("x^2 + y^2 + x^2*y^2"))
    assert normalized_rank_test(bent, Grid.uniform((0.1, 0.8), (0.1, 0.8), 11)) > 1e-2


def test_euler_residual():
    f = ClosedFormField("(x^2+y^2)^2")
    r = np.linspace(0.5, 1, 11)
    a = np.linspace(0, 2 * np.pi, 24)
    R, A = np.meshgrid(r, a)
    pts = (R * np.cos(A), R * np.sin(A))
    assert euler_homogeneity_residual(f, 4, pts) < 1e-10
    assert euler_homogeneity_residual(f, 3, pts) > 0.1
    with pytest.raises(GridError):
        euler_homogeneity_residual(f, 4, (np.array([0.0]), np.array([0.0])))


def test_radial_fit():
    assert radial_flat_fit(ClosedFormField("3*(x^2+y^2)")).C == pytest.approx(3, abs=1e-12)
    assert radial_flat_fit(ClosedFormField("3*(x^2+y^2) + x - 2")).residual < 1e-12
    with pytest.raises(NotPositiveDefinite):
        radial_flat_fit(ClosedFormField("(x^2+y^2)^2"))
    with pytest.raises(NotFlat):
        radial_flat_fit(ClosedFormField("3*(x^2+y^2) + 0.01*(x^2+y^2)^2"))
    with pytest.raises(NotRadiallySymmetric):
        radial_flat_fit(ClosedFormField("x^2 + 2*y^2"))


def test_poisson_bracket_normalisation():
    x, y = ClosedFormField("x"), ClosedFormField("y")
    assert poisson_bracket(x, y, (0.3, 0.4)) == pytest.approx(1.0)
    a, b = ClosedFormField("x^2"), ClosedFormField("x*y^2")
    # {x^2, x y^2} = 2x * 2xy at (1, 2)
    assert poisson_bracket(a, b, (1.0, 2.0)) == pytest.approx(8.0)


def test_not_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        hessian_curvature(ClosedFormField("x^2 - y^2"), (0.1, 0.1))


def test_domain_checks():
    f = ClosedFormField(EX42, Domain((-1, 1), (0.5, 2)))
    with pytest.raises(OutsideDomain):
        f.bundle(0.0, 3.0)
    with pytest.raises(GridError):
        Grid(np.array([]), np.array([1.0]))


def test_sampled_field_matches_closed_form():
    f = ClosedFormField("exp(x) + x^2*y + y^4/12")
    grid = Grid.uniform((0, 1), (0, 1), 81)
    X, Y = grid.mesh()
    s = SampledField(grid, f(X, Y))
    b, e = s.bundle(0.4, 0.6), f.bundle(0.4, 0.6)
    assert b.fxx == pytest.approx(e.fxx, rel=1e-6)
    assert b.fxy == pytest.approx(e.fxy, rel=1e-6)
    assert b.fyy == pytest.approx(e.fyy, rel=1e-6)
