"""Iteration complexities and bound ratios over a grid of block counts.

Prints K, K_bar, K_tilde and K_hat for a unit-radius problem
(R^2 = ratio * tilde_R^2, gap0 = tilde_R^2 / 2) together with the
sublinear bound ratio at k = N.
"""
import argparse

from pairbcd.theory import compare_bounds, complexity_report


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, nargs="+", default=[2, 3, 5, 10, 20, 50, 100])
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--rho", type=float, default=0.05)
    ap.add_argument("--mu", type=float, default=0.5)
    ap.add_argument("--ratio", type=float, default=2.0, help="R^2 / tilde_R^2")
    args = ap.parse_args()

    header = f"{'N':>5} {'K':>12} {'K_bar':>12} {'K_tilde':>10} {'K_hat':>10} {'B/A(k=N)':>9}"
    print(header)
    for N in args.N:
        rep = complexity_report(N, args.ratio, 1.0, args.eps, args.rho, gap0=0.5, mu_f=args.mu)
        ratio = compare_bounds(N, N, args.ratio, 1.0)
        print(f"{N:>5} {rep.K:>12.2f} {rep.K_bar:>12.2f} {rep.K_tilde:>10.2f} "
              f"{rep.K_hat:>10.2f} {ratio:>9.3f}")


if __name__ == "__main__":
    main()
