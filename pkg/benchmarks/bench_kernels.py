"""Time the compiled kernels against their numpy twins.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import timeit

import numpy as np

from sdebounds import kernels
from sdebounds.ensembles import NetworkSpec, SparseEnsembleSpec, mass_spring_network, sample_ensemble
from sdebounds.sde import DIVERGENCE_GUARD, stationary_covariance


def cases():
    A = np.ascontiguousarray(sample_ensemble(SparseEnsembleSpec(64, 3, 1.0, 0.1), 0).entries)
    rng = np.random.default_rng(1)
    noise = rng.standard_normal((20_000, 64)) * 0.01
    x0 = np.zeros(64)
    yield "euler_linear p=64 n=20000", "euler_linear", (A, x0, 0.001, noise, DIVERGENCE_GUARD)

    m = mass_spring_network(NetworkSpec(3, 3))
    pd = m.p * m.d
    noise = rng.standard_normal((20_000, pd)) * 0.03
    yield ("euler_mass_spring 3x3 n=20000", "euler_mass_spring",
           (m._ei, m._ej, m._rest, m.d, m.gamma_damp, 0.005, m.rest_state(), noise, DIVERGENCE_GUARD))

    G = stationary_covariance(A)
    C = np.ascontiguousarray((A @ G).T)
    yield "lasso_cd q=64 r=64", "lasso_cd", (G, C, 0.05, None, 1e-8, 10_000)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    compiled = kernels.compiled_backend
    python = kernels.python_backend
    if compiled is None:
        print("compiled backend not built; only the python timings are shown")
    print(f"{'kernel':34s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s}")
    for label, name, args_ in cases():
        times = {}
        for tag, mod in (("python", python), ("compiled", compiled)):
            if mod is None:
                continue
            fn = getattr(mod, name)

            def call():
                a = list(args_)
                if name == "lasso_cd":
                    a[3] = np.zeros_like(a[1])
                return fn(*a)

            times[tag] = min(timeit.repeat(call, number=1, repeat=args.repeat))
        comp = times.get("compiled", float("nan"))
        print(f"{label:34s} {times['python']:10.4f} {comp:11.4f} {times['python'] / comp:8.1f}x")


if __name__ == "__main__":
    main()
