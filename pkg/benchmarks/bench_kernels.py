"""Time the compiled kernels against their numpy fallbacks.

    python benchmarks/bench_kernels.py [--repeat 5]

Also checks that both backends agree on every input before timing it.
"""

import argparse
import timeit

import numpy as np

from hpm import _pykernels as python
from hpm.kernels import compiled


def _cases(rng):
    for n in (50, 200, 800):
        yield f"dtw_accumulate {n}x{n}", "dtw_accumulate", (rng.random((n, n)),)
    for n in (50, 200, 800):
        acc = python.dtw_accumulate(rng.random((n, n)))
        yield f"dtw_backtrack {n}x{n}", "dtw_backtrack", (acc,)
    for frames in (100, 1000):
        x = rng.normal(size=(frames, 1024))
        yield f"frame_autocorr {frames}x1024", "frame_autocorr", (x, 26, 267)


def _same(a, b):
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-9, atol=1e-9)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    if compiled is None:
        print("compiled extension not built; run `pip install -e . --no-build-isolation` first")
        return 1
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for label, name, inputs in _cases(rng):
        py_fn, c_fn = getattr(python, name), getattr(compiled, name)
        if not _same(py_fn(*inputs), c_fn(*inputs)):
            raise SystemExit(f"backends disagree on {label}")
        t_py = min(timeit.repeat(lambda: py_fn(*inputs), number=1, repeat=args.repeat)) * 1e3
        t_c = min(timeit.repeat(lambda: c_fn(*inputs), number=1, repeat=args.repeat)) * 1e3
        print(f"{label:<28}{t_py:>12.3f}{t_c:>12.3f}{t_py / t_c:>9.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
