"""Time the numba kernels against their numpy fallbacks.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel runs once per backend to warm up (numba compiles on first
call), then ``--repeat`` times; the best time is reported along with the
largest absolute difference between the two outputs.
"""
import argparse
import time

import numpy as np

from finer import activations as act
from finer import geometry, linalg, sdf
from finer._accel import HAVE_NUMBA, backend


def _best(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def _diff(a, b):
    if isinstance(a, tuple):
        return max(_diff(x, y) for x, y in zip(a, b))
    if isinstance(a, geometry.TriMesh):
        if a.vertices.shape != b.vertices.shape or a.triangles.shape != b.triangles.shape:
            return np.inf
        return float(np.abs(a.vertices - b.vertices).max(initial=0.0))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0))


def cases(rng):
    g = rng.uniform(-1, 1, size=(16384, 256))
    bias = rng.uniform(-1, 1, size=256)
    finer = act.finer(30.0)
    z = rng.uniform(-1, 1, size=(16384, 2))
    w = rng.uniform(-0.5, 0.5, size=(256, 2))
    a = rng.normal(size=(64, 64))
    k = a @ a.T
    sphere = sdf.sphere(0.7)
    grid = sdf.evaluate_lattice(sphere, 96)
    p = rng.normal(size=(20000, 3))
    q = rng.normal(size=(20000, 3))
    return {
        "fused finer 16384x256": lambda: act.fused(finer, g, True, bias),
        "dense finer 2->256": lambda: act.dense(z, w, bias, finer),
        "jacobi eigen 64x64": lambda: linalg.sym_eigen(k)[0],
        "marching cubes 96^3": lambda: geometry.marching_cubes(grid),
        "nearest sq dist 20k (bucket)": lambda: geometry.nearest_sq_dist(p, q, method="bucket"),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if not HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':32s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fn in cases(rng).items():
        with backend("numba"):
            t_nb = _best(fn, args.repeat)
            out_nb = fn()
        with backend("numpy"):
            t_np = _best(fn, args.repeat)
            out_np = fn()
        print(f"{name:32s} {1e3 * t_nb:10.2f} {1e3 * t_np:10.2f} {t_np / t_nb:8.2f} {_diff(out_nb, out_np):11.3g}")


if __name__ == "__main__":
    main()
