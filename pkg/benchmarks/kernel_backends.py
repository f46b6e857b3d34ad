#!/usr/bin/env python3
"""Compare the compiled kernel core against the numpy/scipy fallback.

Times one objective+gradient evaluation per backend, for both the sparse
(weighted) and fully materialized (unweighted) regimes, and checks that the
backends agree numerically. Writes a CSV when --out is given.

Usage:
    python benchmarks/kernel_backends.py [--objects 2000] [--fill 0.1]
        [--rank 10] [--slices 3] [--evals 10] [--out backends.csv]
"""

import argparse
import sys

from mrtensor import (
    LossAssignment,
    SplitSpec,
    SynthConfig,
    evaluate,
    generate,
    random_init,
    split,
    time_per_evaluation,
)
from mrtensor import kernels
from mrtensor.optimizer import densify_unweighted


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--objects", type=int, default=2000)
    parser.add_argument("--fill", type=float, default=0.1)
    parser.add_argument("--rank", type=int, default=10)
    parser.add_argument("--slices", type=int, default=3)
    parser.add_argument("--evals", type=int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out")
    args = parser.parse_args(argv)

    full, _ = generate(
        SynthConfig(args.objects, args.slices, 0, args.rank, seed=args.seed)
    )
    train, _, _ = split(full, SplitSpec(args.fill, 0.0, args.seed))
    hinge = LossAssignment.auto(train.slice_types)
    model = random_init(train, hinge, args.rank, seed=args.seed)
    dense = densify_unweighted(train)
    quad = LossAssignment.all_quadratic(dense.slice_types)
    model_dense = random_init(dense, quad, args.rank, seed=args.seed)

    problems = {
        "sparse": (model, train, hinge),
        "materialized": (model_dense, dense, quad),
    }
    backends = kernels.available_backends()
    if len(backends) < 2:
        print("note: compiled backend unavailable, timing the fallback only")

    rows = []
    reference = {}
    for name in backends:
        kernels.use(name)
        for regime, (mdl, data, losses) in problems.items():
            seconds = time_per_evaluation(mdl, data, losses, 1.0, args.evals)
            value = evaluate(mdl, data, losses, 1.0).value
            reference.setdefault(regime, value)
            drift = abs(value - reference[regime]) / max(1.0, abs(reference[regime]))
            rows.append((name, regime, data.num_entries, seconds, drift))
            print(
                f"{name:>7} | {regime:>12} | entries {data.num_entries:>9} | "
                f"{seconds * 1e3:8.2f} ms/eval | value drift {drift:.2e}"
            )

    by_regime = {}
    for name, regime, _, seconds, _ in rows:
        by_regime.setdefault(regime, {})[name] = seconds
    for regime, timings in by_regime.items():
        if len(timings) == 2:
            ratio = timings["numpy"] / timings["cython"]
            print(f"{regime}: compiled core is {ratio:.2f}x the fallback speed")

    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write("backend,regime,entries,seconds_per_eval,value_drift\n")
            for name, regime, entries, seconds, drift in rows:
                fh.write(f"{name},{regime},{entries},{seconds!r},{drift!r}\n")
        print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
