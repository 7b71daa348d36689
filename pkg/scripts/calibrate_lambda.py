"""Pick the constant c in lambda = c * sqrt(s log q / T) on held-out seeds.

For each candidate c, reports the success rate over a T grid and the first
T reaching the success level. Seeds here are disjoint from those used by
the test suite.

    python3 scripts/calibrate_lambda.py [--trials 20] [--seed 1000]
"""
import argparse
import time

from sdebounds.ensembles import DenseEnsembleSpec, NetworkSpec, SparseEnsembleSpec, mass_spring_network
from sdebounds.estimator import estimate_sample_complexity, spring_trial

LINEAR_CASES = [
    (SparseEnsembleSpec(16, 3, 1.0, 0.1), [100, 200, 300, 400, 600, 800]),
    (SparseEnsembleSpec(32, 3, 1.0, 0.1), [100, 200, 300, 400, 600, 800]),
    (DenseEnsembleSpec(8, 1.0, 0.1), [200, 400, 800, 1600, 3200]),
]
LINEAR_C = [0.03, 0.1, 0.3]
SPRING_T = [50, 100, 200, 400, 800]
SPRING_C = [0.01, 0.03, 0.1]


def first_at(T_grid, rates, level):
    return next((T for T, r in zip(T_grid, rates) if r >= level), None)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=1000)
    ap.add_argument("--level", type=float, default=0.9)
    args = ap.parse_args(argv)

    for spec, T_grid in LINEAR_CASES:
        for c in LINEAR_C:
            t0 = time.time()
            tab = estimate_sample_complexity(spec, T_grid, args.trials, master_seed=args.seed, lam_c=c)
            rates = [round(r, 2) for r in tab.success_rate]
            print(f"{spec.regime:6s} p={spec.p:3d} c={c:<5} rates={rates} "
                  f"T*={first_at(T_grid, rates, args.level)} ({time.time() - t0:.0f}s)", flush=True)

    model = mass_spring_network(NetworkSpec(3, 3))
    for c in SPRING_C:
        t0 = time.time()
        succ = [0] * len(SPRING_T)
        for trial in range(args.trials):
            for i, r in enumerate(spring_trial(model, SPRING_T, trial, args.seed, lam_c=c)):
                succ[i] += r.success
        rates = [s / args.trials for s in succ]
        print(f"spring 3x3  c={c:<5} rates={rates} T*={first_at(SPRING_T, rates, args.level)} "
              f"({time.time() - t0:.0f}s)", flush=True)


if __name__ == "__main__":
    main()
