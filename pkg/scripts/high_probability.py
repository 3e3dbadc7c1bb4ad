"""Success fraction after ceil(K) iterations versus the (1 - rho) target.

Sweeps eps (as a fraction of the initial gap) and rho on the shipped
high-probability config; each row runs its own replica set.
"""
import argparse
import math
from pathlib import Path

from pairbcd.config import load_config
from pairbcd.experiment import run_replicas

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "high_probability.ini"))
    ap.add_argument("--replicas", type=int, default=500)
    ap.add_argument("--eps-rel", type=float, nargs="+", default=[0.3, 0.1, 0.03])
    ap.add_argument("--rho", type=float, nargs="+", default=[0.3, 0.1])
    args = ap.parse_args()

    cfg = load_config(args.config)
    print(f"{'eps_rel':>8} {'rho':>6} {'iters':>7} {'success':>8} {'required':>9}")
    for eps_rel in args.eps_rel:
        for rho in args.rho:
            cfg.experiment.update(eps_rel=eps_rel, rho=rho, iters=None)
            cfg.experiment.pop("checkpoints", None)
            s = run_replicas(cfg.experiment_config(replicas=args.replicas))
            need = (1 - rho) - 3 * math.sqrt(rho * (1 - rho) / s.replicas)
            print(f"{eps_rel:>8g} {rho:>6g} {s.iters:>7d} {s.success_fraction:>8.4f} {need:>9.4f}")


if __name__ == "__main__":
    main()
