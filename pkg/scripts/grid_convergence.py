"""Round-trip diagnostics of the full pipeline as the chart grid is refined."""
import argparse
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

from hesseflat.run import PipelineConfig, run_pipeline


@dataclass
class Config:
    profile: str = "1/2 + u^2/8"
    modes: list = field(default_factory=lambda: [(1, 0, 1), (0, 0.5, 2)])
    sizes: list = field(default_factory=lambda: [33, 65, 129, 257])
    out: str = "out/grid_convergence.json"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--profile", default=Config.profile)
    ap.add_argument("--sizes", type=lambda s: [int(v) for v in s.split(",")])
    ap.add_argument("--out", default=Config.out)
    args = ap.parse_args()
    cfg = Config(profile=args.profile, out=args.out)
    if args.sizes:
        cfg.sizes = args.sizes

    rows = []
    for n in cfg.sizes:
        t0 = time.perf_counter()
        res = run_pipeline(PipelineConfig(profile=cfg.profile, modes=cfg.modes, grid=(n, n)))
        ch = res.chart
        row = {"n": n, "seconds": time.perf_counter() - t0,
               "closedness_rel": ch.closedness / ch.closedness_scale,
               "path_mismatch_rel": ch.path_mismatch / ch.path_scale,
               **res.report.to_dict()}
        rows.append(row)
        print(f"n={n:4d}  closed={row['closedness_rel']:.2e}  "
              f"hess={row['hessian_rel_err']:.2e}  K={row['curvature_max']:.2e}  "
              f"{row['seconds']:.1f}s")
    Path(cfg.out).parent.mkdir(parents=True, exist_ok=True)
    Path(cfg.out).write_text(json.dumps({"profile": cfg.profile, "modes": cfg.modes,
                                         "rows": rows}, indent=2))


if __name__ == "__main__":
    main()
