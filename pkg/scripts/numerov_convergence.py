"""Step-halving study of the Numerov solver.

Free mode against cos(k t), then self-convergence on the Schrodinger
potential of a non-constant profile.  Writes a CSV table.
"""
import argparse
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hesseflat import io
from hesseflat.pipeline import phase_table, solve_schrodinger, validate_profile, wave_data


@dataclass
class Config:
    k: float = 2.0
    steps: list = field(default_factory=lambda: [0.04, 0.02, 0.01, 0.005, 0.0025])
    profile: str = "1/2 + u^2/8"
    span: tuple = (-1.0, 1.0)
    out: str = "out/numerov_convergence.csv"


def free_error(cfg, h):
    s = solve_schrodinger(lambda t: 0 * t, cfg.k, (1.0, 0.0), h, cfg.span)
    return float(np.max(np.abs(s.psi - np.cos(cfg.k * s.t))))


def self_error(cfg, Q, h):
    # compare against the half step on shared nodes
    a = solve_schrodinger(Q, cfg.k, (1.0, 0.0), h, cfg.span)
    b = solve_schrodinger(Q, cfg.k, (1.0, 0.0), h / 2, cfg.span)
    return float(np.max(np.abs(a.psi - b(a.t))))


def main():
    cfg = Config()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=float, default=cfg.k)
    ap.add_argument("--profile", default=cfg.profile)
    ap.add_argument("--out", default=cfg.out)
    cfg = Config(**{**asdict(cfg), **vars(ap.parse_args())})

    Q = wave_data(phase_table(validate_profile(cfg.profile))).schrodinger_potential(cfg.k)
    free = [free_error(cfg, h) for h in cfg.steps]
    selfc = [self_error(cfg, Q, h) for h in cfg.steps]
    print(f"{'step':>8} {'free err':>11} {'ratio':>6} {'self err':>11} {'ratio':>6}")
    for i, h in enumerate(cfg.steps):
        r1 = free[i - 1] / free[i] if i else float("nan")
        r2 = selfc[i - 1] / selfc[i] if i else float("nan")
        print(f"{h:8.4g} {free[i]:11.3e} {r1:6.2f} {selfc[i]:11.3e} {r2:6.2f}")
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    io.write_csv(cfg.out, {"step": np.array(cfg.steps), "free_error": np.array(free),
                           "self_error": np.array(selfc)})


if __name__ == "__main__":
    main()
