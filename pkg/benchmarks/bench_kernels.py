"""Time the compiled kernels against the NumPy fallback.

Usage: ``python benchmarks/bench_kernels.py [--repeat R]``
"""
import argparse
import timeit

import numpy as np

from wickfield import _backend


def cases():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(256, 256))
    ka, kb = rng.integers(-2000, 2000, 400), rng.integers(-2000, 2000, 400)
    wa, wb = rng.random(400), rng.random(400)
    return {
        "hermite_stack j<=6 256x256": lambda k: k.hermite_stack(x, 1.0, 6),
        "hermite_eval j=6 256x256": lambda k: k.hermite_eval(x, 1.0, 6),
        "sparse_convolve 400x400": lambda k: k.sparse_convolve(ka, wa, kb, wb),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = {"python": _backend.python_kernels}
    if _backend.compiled_kernels is not None:
        backends["cython"] = _backend.compiled_kernels
    print(f"{'case':32s}" + "".join(f"{b:>12s}" for b in backends) + f"{'speedup':>10s}")
    for name, fn in cases().items():
        times = {b: min(timeit.repeat(lambda: fn(k), number=3, repeat=args.repeat)) / 3
                 for b, k in backends.items()}
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        print(f"{name:32s}" + "".join(f"{t * 1e3:10.3f}ms" for t in times.values())
              + f"{speed:9.2f}x")


if __name__ == "__main__":
    main()
