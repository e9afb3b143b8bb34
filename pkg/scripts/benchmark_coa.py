"""COA on standard test functions.

    python scripts/benchmark_coa.py --seeds 10

Reports the final best value, improvement over the initial population and
evaluation count for sphere (2-D) and Rastrigin (10-D).
"""

from __future__ import annotations

import argparse

import numpy as np

from microdispatch.coa import CoaParams, optimize


def sphere(x):
    return float(x @ x)


def rastrigin(x):
    return float(10 * x.size + np.sum(x * x - 10 * np.cos(2 * np.pi * x)))


CASES = {
    "sphere-2d": (sphere, 2, 5.0, dict(max_iterations=10_000, max_evaluations=5000)),
    "rastrigin-10d": (rastrigin, 10, 5.12, dict(max_iterations=300)),
}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--fixed-flight", action="store_true", help="migrate a fixed fraction toward the goal")
    args = ap.parse_args()
    for name, (fn, dim, half, kw) in CASES.items():
        box = (np.full(dim, -half), np.full(dim, half))
        print(name)
        for seed in range(args.seeds):
            res = optimize(fn, box, CoaParams(seed=seed, random_flight=not args.fixed_flight, **kw))
            first = res.history[0]["best_fitness"]
            gain = 1.0 - res.best_fitness / first if first > 0 else 0.0
            print(f"  seed {seed:>2}: best {res.best_fitness:.3e}  improvement {gain:.1%}  "
                  f"evals {res.evaluations}  iters {res.iterations}")


if __name__ == "__main__":
    main()
