"""Subset-error and bound curves for chosen chi elements (plot-ready CSV on stdout).

Example: python scripts/convergence_curves.py --channel qwp --param 0 --element I Z --element Z Z --shots 10000
"""
import argparse
import sys

from seqpt import NoiseModel, builtin_channel, convergence_report, mub_design
from seqpt.experiment import CONVERGENCE_COLUMNS
from seqpt.tomography import per_state_estimates


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--channel", default="identity")
    ap.add_argument("--param", type=float, action="append", default=[])
    ap.add_argument("--element", nargs=2, action="append", metavar=("A", "B"))
    ap.add_argument("--shots", type=int, default=None, help="omit for exact probabilities")
    ap.add_argument("--noisy", action="store_true", help="use the default interferometer noise")
    ap.add_argument("--scale-rule", default="worst-case-deviation")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    ch = builtin_channel(args.channel, args.param)
    design = mub_design(1 if ch.dim == 2 else 2)
    elements = args.element or [["Z", "Z"], ["I", "Z"]]
    noise = NoiseModel() if args.noisy else None
    sys.stdout.write(",".join(CONVERGENCE_COLUMNS) + "\n")
    for a, b in elements:
        vals, _ = per_state_estimates(ch, a, b, design, args.shots, noise, args.seed)
        rep = convergence_report(vals, scale_rule=args.scale_rule, element=(a, b), seed=args.seed)
        rep.to_csv(sys.stdout, header=False)
        print(f"# {a},{b}: scale {rep.scale:.4f}, violations {rep.violations}", file=sys.stderr)


if __name__ == "__main__":
    main()
