"""Time the CRF kernels on each available backend.

    python benchmarks/bench_kernels.py [--tokens 512] [--tags 275 11] [--repeat 5]

Prints the best-of-N wall time per kernel for the numpy and compiled
backends, the default size-dispatched kernels, and the compiled speedup.
"""

import argparse
import timeit

import numpy as np

from stanceseg.crf import _backend, available_backends


def bench(kernels, em, trans, start, end, repeat):
    alpha, log_z = kernels.forward(em, trans, start, end)
    beta = kernels.backward(em, trans, end)
    cases = {
        "forward": lambda: kernels.forward(em, trans, start, end),
        "backward": lambda: kernels.backward(em, trans, end),
        "pair_marginals": lambda: kernels.pair_marginal_sum(em, trans, alpha, beta, log_z),
        "viterbi": lambda: kernels.viterbi(em, trans, start, end),
    }
    return {name: min(timeit.repeat(fn, number=1, repeat=repeat)) for name, fn in cases.items()}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tokens", type=int, default=512)
    ap.add_argument("--tags", type=int, nargs="+", default=[11, 275])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    backends = available_backends()
    if _backend.BACKEND == "cython":
        backends["default"] = _backend.kernels
    rng = np.random.default_rng(0)
    for k in args.tags:
        em = rng.normal(size=(args.tokens, k))
        trans = rng.normal(size=(k, k))
        start, end = rng.normal(size=k), rng.normal(size=k)
        times = {name: bench(mod, em, trans, start, end, args.repeat) for name, mod in backends.items()}
        print(f"T={args.tokens} K={k}")
        print(f"  {'kernel':<16}" + "".join(f"{name:>12}" for name in times) + ("     speedup" if "cython" in times else ""))
        for kernel in next(iter(times.values())):
            row = f"  {kernel:<16}" + "".join(f"{t[kernel] * 1e3:10.2f}ms" for t in times.values())
            if "cython" in times and "python" in times:
                row += f"{times['python'][kernel] / times['cython'][kernel]:11.1f}x"
            print(row)


if __name__ == "__main__":
    main()
