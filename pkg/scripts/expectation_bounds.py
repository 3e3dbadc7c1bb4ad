"""Monte Carlo check of the expectation bounds on the shipped quadratic configs.

Writes one summary CSV per config into --out-dir and prints the
certification lines.  Exit status is nonzero if any certification fails.
"""
import argparse
import sys
from pathlib import Path

from pairbcd.config import load_config
from pairbcd.experiment import certify, run_replicas

ROOT = Path(__file__).resolve().parents[1]
DEFAULT = ["quadratic_sublinear", "quadratic_loose", "pseudo_huber"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("configs", nargs="*", default=DEFAULT,
                    help="config names under configs/ or paths")
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--replicas", type=int)
    args = ap.parse_args()

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    failed = False
    for name in args.configs:
        path = Path(name) if name.endswith(".ini") else ROOT / "configs" / f"{name}.ini"
        summary = run_replicas(load_config(path).experiment_config(replicas=args.replicas))
        with open(out_dir / f"{path.stem}.csv", "w", newline="") as fh:
            summary.write_csv(fh)
        report = certify(summary)
        failed |= not report.passed
        print(f"== {path.stem}: mu_f={summary.mu_f} tilde_R_sq={summary.tilde_R_sq:.6g} "
              f"certify={'pass' if report.passed else 'fail'}")
        print(f"{'k':>5} {'mean_gap':>12} {'stderr':>10} {'sublinear':>12} {'linear':>12}")
        for c, k in enumerate(summary.checkpoints):
            print(f"{k:>5} {summary.mean_gap[c]:>12.4g} {summary.stderr_gap[c]:>10.3g} "
                  f"{summary.bounds[c, 0]:>12.4g} {summary.bounds[c, 1]:>12.4g}")
        for line in report.failures:
            print("  " + line)
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
