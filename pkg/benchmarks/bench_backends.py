"""Times the conv2d forward/backward cores on both compute backends.

The shapes mirror the hot layers: the strided block-sampling conv, the
full-resolution refinement convs, and a wavelet U-net conv. Run with:

    python benchmarks/bench_backends.py [--repeats N]
"""

import argparse
import time

import numpy as np

from msdcs import backend, ops


CASES = [
    ("sampling 4ch k16 s16", (1, 4, 256, 256), (102, 4, 16, 16), 16, 0),
    ("recon 1x1", (1, 102, 16, 16), (1024, 102, 1, 1), 1, 0),
    ("enhance 64ch 3x3", (8, 64, 64, 64), (64, 64, 3, 3), 1, 1),
    ("u-net 128->64 3x3", (8, 128, 32, 32), (64, 128, 3, 3), 1, 1),
]


def time_case(x, w, spec, repeats):
    b = np.zeros(spec.out_channels, dtype=np.float32) if spec.has_bias else None
    y = ops.conv2d(x, w, b, spec)
    gy = np.ones_like(y)
    ops.conv2d_backward(x, w, spec, gy)  # warm up / JIT compile
    t0 = time.perf_counter()
    for _ in range(repeats):
        ops.conv2d(x, w, b, spec)
    fwd = (time.perf_counter() - t0) / repeats
    t0 = time.perf_counter()
    for _ in range(repeats):
        ops.conv2d_backward(x, w, spec, gy)
    bwd = (time.perf_counter() - t0) / repeats
    return fwd, bwd


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    backends = ["numpy"]
    if backend.numba_available():
        backends.append("numba")
    else:
        print("numba not importable; timing numpy only")

    rng = np.random.default_rng(0)
    results = {}
    for name in backends:
        backend.set_backend(name)
        for case, xshape, wshape, stride, pad in CASES:
            x = rng.random(xshape, dtype=np.float32)
            w = rng.standard_normal(wshape).astype(np.float32) * 0.1
            spec = ops.ConvSpec.for_weight(w, stride=stride, padding=pad)
            results[(name, case)] = time_case(x, w, spec, args.repeats)
    backend.set_backend(None)

    header = f"{'case':24s} {'dir':4s} " + "".join(f"{b + ' [ms]':>12s}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>9s}"
    print(header)
    for case, *_ in CASES:
        for d, idx in (("fwd", 0), ("bwd", 1)):
            row = f"{case:24s} {d:4s}"
            times = [results[(b, case)][idx] for b in backends]
            row += "".join(f"{t * 1e3:12.3f}" for t in times)
            if len(times) == 2:
                row += f"{times[0] / times[1]:9.2f}x"
            print(row)


if __name__ == "__main__":
    main()
