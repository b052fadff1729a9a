"""End-to-end generation runs: profile -> flat Hessian potential."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chart import (ChartMetric, ConformalChart, NodeMetric, ReconstructedPotential,
                    RoundtripReport, assemble_metric, build_chart,
                    reconstruct_potential, star_domain, verify_roundtrip)
from .errors import VerificationFailed
from .expr import differentiate, parse
from .pipeline import (KGField, PhaseTable, Profile, SpectralMode, WaveData,
                       kg_superpose, phase_table, solve_modes, validate_profile,
                       wave_data)


@dataclass
class PipelineConfig:
    profile: str = "1/2"
    modes: list = field(default_factory=lambda: [(1.0, 0.0, 1.0)])
    urange: tuple = (-0.45, 0.45)
    u0: float | None = None
    grid: tuple = (129, 129)
    trange: tuple = (0.2, 0.45)
    thetarange: tuple = (1.0, 1.4)
    phase_samples: int = 2049
    refine: int = 8               # mode-solver steps per chart t-step
    potential_grid: int = 41
    base: tuple | None = None     # chart node (it, ith); default centre
    psi: str | None = None        # explicit Psi(t, theta), bypasses the modes
    closed_tol: float = 1e-6
    hessian_tol: float = 1e-5
    integrability_tol: float = 1e-5
    curvature_tol: float = 1e-4

    def spectral_modes(self):
        return [SpectralMode(float(a), float(b), float(k)) for a, b, k in self.modes]


@dataclass
class PipelineResult:
    config: PipelineConfig
    profile: Profile
    phase: PhaseTable
    wave: WaveData
    solved: list
    field: KGField
    chart: ConformalChart
    node_metric: NodeMetric
    metric: ChartMetric
    potential: ReconstructedPotential
    report: RoundtripReport

    @property
    def passed(self):
        c = self.config
        return self.report.passed(c.hessian_tol, c.integrability_tol, c.curvature_tol)

    def summary(self):
        ch = self.chart
        return {
            "profile": self.config.profile,
            "u_interval": [self.profile.u_lo, self.profile.u_hi],
            "t_interval": list(self.phase.t_interval),
            "closedness": ch.closedness,
            "closedness_scale": ch.closedness_scale,
            "path_mismatch": ch.path_mismatch,
            "path_scale": ch.path_scale,
            "base_xy": list(ch.base_xy),
            "potential_box": [float(self.potential.xs[0]), float(self.potential.xs[-1]),
                              float(self.potential.ys[0]), float(self.potential.ys[-1])],
            "roundtrip": self.report.to_dict(),
            "passed": self.passed,
        }


def psi_field(source, t, theta) -> KGField:
    """Sample an explicit Psi(t, theta) and its first partials."""
    e = parse(source, variables=("t", "theta"))
    T, TH = np.meshgrid(t, theta, indexing="ij")
    env = {"t": T, "theta": TH}

    def ev(tree):
        return np.broadcast_to(tree.evaluate(**env), T.shape).astype(float)

    return KGField(np.asarray(t), np.asarray(theta), ev(e),
                   ev(differentiate(e, "t")), ev(differentiate(e, "theta")))


def prepare(cfg: PipelineConfig):
    """Profile, phases, wave data and the sampled field on the chart grid."""
    profile = validate_profile(cfg.profile, cfg.urange)
    phase = phase_table(profile, cfg.u0, cfg.phase_samples)
    wave = wave_data(phase)
    nt, nth = cfg.grid
    t = np.linspace(*cfg.trange, nt)
    theta = np.linspace(*cfg.thetarange, nth)
    phase.u_of_t(t)   # raises OutsideInterval for an unreachable t-range
    solved = []
    if cfg.psi is not None:
        fld = psi_field(cfg.psi, t, theta)
    else:
        modes = cfg.spectral_modes()
        if not modes:
            raise ValueError("at least one mode is required")
        step = (t[1] - t[0]) / cfg.refine
        solved = solve_modes(wave, modes, cfg.trange, step)
        fld = kg_superpose(solved, t, theta)
    return profile, phase, wave, solved, fld


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    profile, phase, wave, solved, fld = prepare(cfg)
    chart = build_chart(phase, wave, fld, cfg.base, cfg.closed_tol)
    nodes = assemble_metric(chart, profile)
    metric = ChartMetric(chart, phase)
    xs, ys = star_domain(chart, cfg.potential_grid)
    pot = reconstruct_potential(metric, chart.base_xy, xs, ys, inside=metric.inside)
    report = verify_roundtrip(pot, metric)
    return PipelineResult(cfg, profile, phase, wave, solved, fld, chart, nodes,
                          metric, pot, report)


def require_pass(result: PipelineResult):
    if not result.passed:
        raise VerificationFailed("round-trip verification failed",
                                 report=result.report.to_dict())
    return result
