"""Planner sweep over mini-batch sizes for L=1, n=1000, mu=1/n.

Writes speedup_rho{rho}.csv per target rate and prints the regime threshold.
Plot m_star against b on log-log axes to compare with the 1/b reference line.
"""

import argparse
from pathlib import Path

from ms2gd.cli import main as cli_main
from ms2gd.theory import speedup_curve


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--L", type=float, default=1.0)
    ap.add_argument("--rho", default="0.01,0.1")
    ap.add_argument("--out-dir", default="runs/figure2")
    args = ap.parse_args(argv)
    mu = 1.0 / args.n
    out = Path(args.out_dir)
    for rho in args.rho.split(","):
        path = out / f"speedup_rho{rho}.csv"
        cli_main(["speedup", "--rho-target", rho, "--n", str(args.n), "--L", str(args.L),
                  "--mu", repr(mu), "--b-max", str(args.n), "--out", str(path)])
        curve = speedup_curve(float(rho), args.n, args.L, mu, range(1, args.n + 1))
        ratios = [pt.work_ratio for pt in curve if pt.regime == "uncapped"]
        print(f"rho={rho}: threshold b={curve.threshold}, "
              f"work ratio in uncapped region {min(ratios):.4f}..{max(ratios):.4f} -> {path}")


if __name__ == "__main__":
    main()
