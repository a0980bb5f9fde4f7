"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5] [--quick]

Prints one row per (kernel, size) with the best-of-N time for each backend
and the speedup. Outputs are compared for equality before timing.
"""
import argparse
import sys
import timeit

import numpy as np

from textless import kernels


def _cases(quick):
    rng = np.random.default_rng(0)
    sizes = (50, 200) if quick else (50, 200, 800)
    for n in sizes:
        cost = rng.random((n, n))
        yield "dtw_accumulate", f"{n}x{n}", (cost,)
    for n in sizes:
        a = rng.integers(0, 30, size=n)
        b = rng.integers(0, 30, size=n)
        yield "levenshtein", f"{n}x{n}", (a, b)
    for n in ((500, 2000) if quick else (500, 2000, 8000)):
        h, q, order = 32, 256, 2
        args = (rng.normal(size=(n, h)), rng.normal(size=(order, q, h)) * 0.1,
                rng.normal(size=(h, q)) * 0.1, rng.normal(size=q), 0.8, rng.random(n), q // 2)
        yield "ar_generate", f"{n} samples", args


def _best(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05 and number < 1000:
        number *= 4
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--quick", action="store_true", help="skip the largest sizes")
    args = p.parse_args(argv)

    impls = kernels.implementations()
    if "cython" not in impls:
        print("compiled extension not built; only the python backend is available", file=sys.stderr)
    names = sorted(impls)
    print(f"{'kernel':<16}{'size':<14}" + "".join(f"{n + ' (ms)':>14}" for n in names)
          + (f"{'speedup':>10}" if len(names) == 2 else ""))
    for kernel, label, kargs in _cases(args.quick):
        fns = {n: getattr(impls[n], kernel) for n in names}
        outs = [np.asarray(fns[n](*kargs)) for n in names]
        if any(not np.array_equal(outs[0], o) for o in outs[1:]):
            raise SystemExit(f"{kernel} {label}: backends disagree")
        times = {n: _best(fns[n], kargs, args.repeat) for n in names}
        row = f"{kernel:<16}{label:<14}" + "".join(f"{1e3 * times[n]:>14.3f}" for n in names)
        if len(names) == 2:
            row += f"{times['python'] / times['cython']:>9.1f}x"
        print(row, flush=True)


if __name__ == "__main__":
    main()
