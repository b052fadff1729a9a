"""Run the generation pipeline over a handful of profiles and tabulate outcomes.

Rejected profiles are reported with their error name instead of aborting.
"""
import argparse
from dataclasses import dataclass, field

from hesseflat.errors import HesseFlatError
from hesseflat.run import PipelineConfig, run_pipeline


@dataclass
class Config:
    profiles: list = field(default_factory=lambda: [
        "1/2", "1/2 + u/10", "1/2 + u^2/8", "1/2 + sin(u)/5", "exp(u)/(1 + exp(u))",
        "u^2"])
    modes: list = field(default_factory=lambda: [(1, 0, 1)])
    grid: int = 65


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--grid", type=int, default=Config.grid)
    cfg = Config(grid=ap.parse_args().grid)
    print(f"{'profile':<24} {'status':<26} {'closed':>9} {'K max':>9}")
    for prof in cfg.profiles:
        try:
            res = run_pipeline(PipelineConfig(profile=prof, modes=cfg.modes,
                                              grid=(cfg.grid, cfg.grid)))
        except HesseFlatError as e:
            print(f"{prof:<24} {type(e).__name__:<26}")
            continue
        ch = res.chart
        status = "pass" if res.passed else "roundtrip failed"
        print(f"{prof:<24} {status:<26} {ch.closedness / ch.closedness_scale:9.2e} "
              f"{res.report.curvature_max:9.2e}")


if __name__ == "__main__":
    main()
