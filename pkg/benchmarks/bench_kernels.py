#!/usr/bin/env python3
"""Compare the numba kernels against the pure-numpy fallback.

Run:  python3 benchmarks/bench_kernels.py [--repeats 5]

The numba path is what training uses by default; NEUROCAM_NO_NUMBA=1
selects the numpy path. Numba JIT compilation happens on the first call
and is excluded from the timings via a warmup pass.
"""

import argparse
import time

import numpy as np

from neurocam.kernels import numba_backend, numpy_backend


def best_of(fn, repeats):
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_case(name, make_args, repeats):
    rows = []
    for label, backend in (("numpy", numpy_backend), ("numba", numba_backend)):
        fwd_args, bwd_args = make_args(backend)
        backend.conv3d_forward(*fwd_args) if name.startswith("conv") else None
        rows.append((label, fwd_args, bwd_args, backend))
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    cases = {
        "conv3d 8ch 32^3 k7 s2": dict(
            x=rng.standard_normal((1, 32, 32, 32)),
            w=rng.standard_normal((8, 1, 7, 7, 7)) * 0.1,
            b=np.zeros(8), stride=2, pad=3),
        "conv3d 8->16 8^3 k3 s1": dict(
            x=rng.standard_normal((8, 8, 8, 8)),
            w=rng.standard_normal((16, 8, 3, 3, 3)) * 0.1,
            b=np.zeros(16), stride=1, pad=1),
        "conv3d 16->32 4^3 k3 s2": dict(
            x=rng.standard_normal((16, 4, 4, 4)),
            w=rng.standard_normal((32, 16, 3, 3, 3)) * 0.1,
            b=np.zeros(32), stride=2, pad=1),
    }
    pool_case = dict(x=rng.standard_normal((8, 16, 16, 16)), k=3, stride=2, pad=1)

    print(f"{'case':34s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s}")
    for name, kw in cases.items():
        for direction in ("fwd", "bwd"):
            times = {}
            for label, backend in (("numpy", numpy_backend),
                                   ("numba", numba_backend)):
                y = backend.conv3d_forward(kw["x"], kw["w"], kw["b"],
                                           kw["stride"], kw["pad"])  # warmup
                if direction == "fwd":
                    fn = lambda: backend.conv3d_forward(
                        kw["x"], kw["w"], kw["b"], kw["stride"], kw["pad"])
                else:
                    dy = np.ones_like(y)
                    backend.conv3d_backward(kw["x"], kw["w"], dy,
                                            kw["stride"], kw["pad"])  # warmup
                    fn = lambda: backend.conv3d_backward(
                        kw["x"], kw["w"], dy, kw["stride"], kw["pad"])
                times[label] = best_of(fn, args.repeats)
            print(f"{name + ' ' + direction:34s} {times['numpy'] * 1e3:9.2f}ms "
                  f"{times['numba'] * 1e3:9.2f}ms "
                  f"{times['numpy'] / times['numba']:7.1f}x")

    times = {}
    for label, backend in (("numpy", numpy_backend), ("numba", numba_backend)):
        y, arg = backend.maxpool3d_forward(pool_case["x"], 3, 2, 1)  # warmup
        dy = np.ones_like(y)
        backend.maxpool3d_backward(dy, arg, pool_case["x"].shape)
        fn_f = lambda: backend.maxpool3d_forward(pool_case["x"], 3, 2, 1)
        fn_b = lambda: backend.maxpool3d_backward(dy, arg, pool_case["x"].shape)
        times[label] = (best_of(fn_f, args.repeats), best_of(fn_b, args.repeats))
    for i, direction in enumerate(("fwd", "bwd")):
        np_t, nb_t = times["numpy"][i], times["numba"][i]
        print(f"{'maxpool3d 8ch 16^3 ' + direction:34s} {np_t * 1e3:9.2f}ms "
              f"{nb_t * 1e3:9.2f}ms {np_t / nb_t:7.1f}x")


if __name__ == "__main__":
    main()
