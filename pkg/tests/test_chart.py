from dataclasses import replace

import numpy as np
import pytest

from hesseflat import fd
from hesseflat.chart import (ChartInverter, _metric_from_uv, assemble_metric,
                             build_chart, invert_chart, reconstruct_potential,
                             recover_x, recover_y, verify_roundtrip)
from hesseflat.errors import (NotClosed, NotStarShaped, OutsideChart, OutsideDomain,
                              PositivityViolation, SingularJacobian)
from hesseflat.geometry import MetricTriple
from hesseflat.pipeline import (KGField, SpectralMode, kg_superpose, solve_modes)
from hesseflat.run import psi_field

EX42_METRIC = ("1/y", "-x/y^2", "x^2/y^3 + 1/(4*y)")


def mesh(chart):
    return np.meshgrid(chart.t, chart.theta, indexing="ij")


def interior(a, m=2):
    return a[m:-m, m:-m]


def test_recover_y(free_run, quad_run):
    c = free_run.chart
    np.testing.assert_array_equal(recover_y(free_run.wave, c.psi, c.t), c.psi)
    w, q = quad_run.wave, quad_run.chart
    np.testing.assert_allclose(recover_y(w, 3 * q.psi, q.t), 3 * q.y, rtol=1e-14)


def test_free_chart_closed_form(free_run):
    c = free_run.chart
    T, TH = mesh(c)
    np.testing.assert_allclose(c.y, np.cos(TH) * np.cos(T), atol=1e-9)
    x = -np.sin(TH) * np.sin(T)
    np.testing.assert_allclose(c.x, x - x[c.base], atol=1e-9)


def test_zero_field_gives_zero_x(free_run):
    c = free_run.chart
    zero = np.zeros(c.shape)
    blank = replace(c, psi=zero, y=zero, y_t=zero, y_theta=zero)
    assert np.all(recover_x(blank, check_jacobian=False).x == 0)
    with pytest.raises(SingularJacobian):
        recover_x(blank)


def test_non_solution_is_not_closed(free_run):
    c = free_run.chart
    fld = psi_field("t^2*theta", c.t, c.theta)
    with pytest.raises(NotClosed) as info:
        build_chart(free_run.phase, free_run.wave, fld)
    assert info.value.exit_code == 1
    assert info.value.details["residual"] > 0.1


def test_singular_jacobian(free_run):
    # y_{r1} = -sin(theta + t)/2 vanishes on theta + t = pi
    t = np.linspace(0.2, 0.45, 33)
    th = np.linspace(2.8, 3.2, 33)
    solved = solve_modes(free_run.wave, [SpectralMode(1, 0, 1)], (0.2, 0.45), 1e-3)
    with pytest.raises(SingularJacobian):
        build_chart(free_run.phase, free_run.wave, kg_superpose(solved, t, th))


@pytest.mark.parametrize("run", ["free_run", "quad_run"])
def test_riemann_invariant_identity(run, request):
    c = request.getfixturevalue(run).chart
    T, TH = mesh(c)
    v = c.v
    np.testing.assert_allclose(v + c.p1[:, None], TH + T, atol=1e-10)
    np.testing.assert_allclose(v + c.p2[:, None], TH - T, atol=1e-10)


@pytest.mark.parametrize("run", ["free_run", "quad_run"])
def test_linear_system_and_jacobian(run, request):
    c = request.getfixturevalue(run).chart
    ht, hth = c.t[1] - c.t[0], c.theta[1] - c.theta[0]
    xt, xth = fd.derivative(c.x, ht, axis=0), fd.derivative(c.x, hth, axis=1)
    yt, yth = fd.derivative(c.y, ht, axis=0), fd.derivative(c.y, hth, axis=1)
    x1, x2 = 0.5 * (xth + xt), 0.5 * (xth - xt)
    y1, y2 = 0.5 * (yth + yt), 0.5 * (yth - yt)
    l1, l2 = c.lam1[:, None], c.lam2[:, None]
    scale = np.max(np.abs(interior(x1))) + np.max(np.abs(interior(x2)))
    # Riemann invariant r1 pairs with lambda_2 in the x-equation and vice versa
    assert np.max(np.abs(interior(x1 + l2 * y1))) < 1e-6 * scale
    assert np.max(np.abs(interior(x2 + l1 * y2))) < 1e-6 * scale
    det = x1 * y2 - x2 * y1
    expected = (l1 - l2) * y1 * y2
    np.testing.assert_allclose(interior(det), interior(expected), rtol=1e-8)


@pytest.mark.parametrize("run", ["free_run", "quad_run"])
def test_path_independence(run, request):
    c = request.getfixturevalue(run).chart
    assert c.path_mismatch < 1e-6 * c.path_scale
    assert c.closedness < 1e-6 * c.closedness_scale
    assert np.all(np.abs(interior(c.jacobian)) > 0)


def test_assemble_metric(free_run):
    E, F, G = _metric_from_uv(free_run.profile, np.array(0.3), np.array(1.2))
    e = np.exp(1.2)
    np.testing.assert_allclose([E, F, G], [e / 2, 0.3 * e, e / 2], rtol=1e-15)
    c = free_run.chart
    m = assemble_metric(c, free_run.profile)
    np.testing.assert_allclose(m.E + m.G, np.exp(c.v), rtol=1e-14)
    bad = replace(c, u=np.full_like(c.u, 0.6))
    with pytest.raises(PositivityViolation):
        assemble_metric(bad, free_run.profile)


def test_invert_closed_form(free_run):
    c = free_run.chart
    # x carries the gauge x(base) = 0
    i, j = c.base
    shift = np.sin(c.theta[j]) * np.sin(c.t[i])
    qx = -np.sin(1.2) * np.sin(0.3) + shift
    qy = np.cos(1.2) * np.cos(0.3)
    t, th, u, v = invert_chart(c, free_run.phase, qx, qy)
    assert abs(t - 0.3) < 1e-9 and abs(th - 1.2) < 1e-9
    assert abs(u - free_run.phase.u_of_t(0.3)) < 1e-9


def test_invert_nodes_and_roundtrip(quad_run):
    c = quad_run.chart
    inv = ChartInverter(c)
    i, j = 17, 90
    t, th = inv(c.x[i, j], c.y[i, j])
    assert abs(t - c.t[i]) < 1e-12 and abs(th - c.theta[j]) < 1e-12
    rng = np.random.default_rng(1)
    ts = rng.uniform(c.t[3], c.t[-4], 200)
    ths = rng.uniform(c.theta[3], c.theta[-4], 200)
    qx, qy = inv.forward(ts, ths)
    t, th = inv(qx, qy)
    assert np.max(np.abs(t - ts)) < 1e-9 and np.max(np.abs(th - ths)) < 1e-9


def test_invert_outside(free_run):
    with pytest.raises(OutsideChart):
        invert_chart(free_run.chart, free_run.phase, 10.0, 10.0)


def test_reconstruct_identity():
    m = MetricTriple.constant(1.0, 0.0, 1.0)
    xs, ys = np.linspace(-1, 1, 21), np.linspace(0, 2, 21)
    rp = reconstruct_potential(m, (0.2, 1.0), xs, ys)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    np.testing.assert_allclose(rp.f, ((X - 0.2) ** 2 + (Y - 1) ** 2) / 2, atol=1e-14)
    assert rp(0.2, 1.0) == pytest.approx(0, abs=1e-14)
    with pytest.raises(OutsideDomain):
        rp(1.5, 1.0)


def test_reconstruct_example_up_to_affine():
    m = MetricTriple.from_expressions(*EX42_METRIC)
    xs, ys = np.linspace(-1, 1, 41), np.linspace(0.5, 2, 41)
    rp = reconstruct_potential(m, (0.0, 1.25), xs, ys)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    diff = (X ** 2 / (2 * Y) + Y * np.log(Y) / 4 - rp.f).ravel()
    A = np.column_stack([np.ones_like(diff), X.ravel(), Y.ravel()])
    coef, *_ = np.linalg.lstsq(A, diff, rcond=None)
    assert np.max(np.abs(diff - A @ coef)) < 1e-8


def test_not_star_shaped():
    m = MetricTriple.constant(1.0, 0.0, 1.0)
    xs = ys = np.linspace(-1, 1, 11)

    def outside_hole(x, y):
        return (x - 0.5) ** 2 + y ** 2 > 0.01

    with pytest.raises(NotStarShaped) as info:
        reconstruct_potential(m, (0.0, 0.0), xs, ys, inside=outside_hole)
    assert info.value.exit_code == 1


def test_roundtrip_free(free_run):
    r = free_run.report
    assert r.hessian_rel_err < 1e-5 and r.integrability_max < 1e-5
    assert r.curvature_max < 1e-5
    assert r.pd_min_trace > 0 and r.pd_min_det > 0
    assert free_run.passed
    assert set(r.to_dict()) >= {"hessian_rel_err", "integrability_max", "flatness_max",
                                "curvature_max", "pd_min_trace", "pd_min_det",
                                "nondegeneracy_min"}


def test_roundtrip_closed_form_and_corrupted():
    xs, ys = np.linspace(-1, 1, 41), np.linspace(0.5, 2, 41)
    m = MetricTriple.from_expressions(*EX42_METRIC)
    rp = reconstruct_potential(m, (0.0, 1.25), xs, ys)
    good = verify_roundtrip(rp, m)
    assert good.integrability_max < 1e-10 and good.curvature_max < 1e-9
    bad_m = MetricTriple.from_expressions(EX42_METRIC[0], EX42_METRIC[1] + " + 0.001*x",
                                          EX42_METRIC[2])
    bad = verify_roundtrip(reconstruct_potential(bad_m, (0.0, 1.25), xs, ys), bad_m)
    # F_x shifts by 1e-3 everywhere
    assert bad.integrability_abs > 1e-4
    assert not bad.passed()


def test_field_from_expression():
    t = np.linspace(0, 1, 5)
    th = np.linspace(0, 2, 3)
    f = psi_field("t^2*theta", t, th)
    assert isinstance(f, KGField)
    np.testing.assert_allclose(f.psi_t, 2 * t[:, None] * th[None, :])
    np.testing.assert_allclose(f.psi_theta, np.broadcast_to(t[:, None] ** 2, (5, 3)))
