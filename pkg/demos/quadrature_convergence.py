"""How many Overhauser samples the single-magnon spectrum needs.

Scans dw_D across the first As sideband with 21 and 61 samples.  Each
sample's resonance is much narrower than the 21-point grid spacing, so
the 21-sample curve is a comb of sub-peaks; 61 samples resolve the
smooth Gaussian line.  Takes several minutes on one core.
"""
import argparse

import numpy as np

from magnon_sense.config import default_config
from magnon_sense.master_equation import calibrate_gamma_e
from magnon_sense.sequences import make_overhauser_grid, spectrum_scan


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--center", type=float, default=32.5, help="MHz")
    ap.add_argument("--half-width", type=float, default=8.0, help="MHz")
    ap.add_argument("--points", type=int, default=9)
    ap.add_argument("--samples", default="21,61")
    args = ap.parse_args()

    cfg = default_config()
    cfg = cfg.with_(Gamma_e=calibrate_gamma_e(cfg))
    deltas = np.linspace(args.center - args.half_width, args.center + args.half_width, args.points)
    counts = [int(s) for s in args.samples.split(",")]
    curves = {}
    for n in counts:
        res = spectrum_scan(cfg, 8.0, 1800.0, deltas, grid=make_overhauser_grid(cfg, n))
        curves[n] = [r.dw_D for r in res]
    print("delta_MHz " + " ".join(f"dw_D[{n}]" for n in counts))
    for i, d in enumerate(deltas):
        print(f"{d:9.2f} " + " ".join(f"{curves[n][i]:+9.5f}" for n in counts))


if __name__ == "__main__":
    main()
