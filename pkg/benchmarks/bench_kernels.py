"""Compare the compiled window-reduction kernels against the numpy fallback.

Times the three hot kernels on LeNet-shaped workloads (the two 2D conv
layers on a 28x28 batch and the long 1D first conv). Run:

    python benchmarks/bench_kernels.py [--repeats 5]
"""

import argparse
import time

import numpy as np

from tcnn import kernels
from tcnn.kernels import numpy_backend

WORKLOADS = {
    # name: (batch, c_in, spatial, c_out, kernel, stride, pad)
    "conv2d_first": (64, 1, (28, 28), 6, (5, 5), (1, 1), (2, 2)),
    "conv2d_second": (64, 6, (14, 14), 16, (5, 5), (1, 1), (0, 0)),
    "conv1d_long": (64, 1, (187,), 6, (80,), (1,), (2,)),
}


def materialize(workload, seed=0):
    n, ci, spatial, co, kernel, stride, pad = workload
    rng = np.random.Generator(np.random.PCG64(seed))
    x = rng.normal(size=(n, ci, int(np.prod(spatial)))).astype(np.float32)
    w = rng.normal(size=(co, ci, int(np.prod(kernel)))).astype(np.float32)
    table = kernels.gather_table(spatial, kernel, stride, pad)
    return x, w, table


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return min(times)


def bench_backend(backend, x, w, table, repeats):
    fwd = best_of(lambda: backend.window_reduce(x, w, table, kernels.MODE_MIN), repeats)
    comp = best_of(lambda: backend.compound_reduce(x, w, table), repeats)
    _, args = backend.window_reduce(x, w, table, kernels.MODE_MIN)
    contrib = np.ones_like(args, dtype=np.float32)
    bwd = best_of(lambda: backend.scatter_backward(contrib, args, table, x.shape[2]),
                  repeats)
    return fwd, comp, bwd


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = [("numpy", numpy_backend)]
    if kernels.native_available():
        backends.append(("native", kernels._native))
    else:
        print("note: compiled kernels unavailable; timing the fallback only")

    print(f"{'workload':<14} {'kernel':<10} " +
          " ".join(f"{name:>10}" for name, _ in backends) +
          ("   speedup" if len(backends) == 2 else ""))
    for name, workload in WORKLOADS.items():
        x, w, table = materialize(workload)
        rows = {bname: bench_backend(backend, x, w, table, args.repeats)
                for bname, backend in backends}
        for i, kname in enumerate(("forward", "compound", "backward")):
            cells = " ".join(f"{rows[bname][i] * 1e3:9.2f}ms" for bname, _ in backends)
            line = f"{name:<14} {kname:<10} {cells}"
            if len(backends) == 2:
                line += f"  {rows['numpy'][i] / rows['native'][i]:8.1f}x"
            print(line)


if __name__ == "__main__":
    main()
