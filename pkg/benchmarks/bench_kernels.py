"""Time the persistence kernels with numba on and off.

    python3 benchmarks/bench_kernels.py [--sizes 200 500 1000] [--repeats 3]

Each size runs one full H0 + H1 diagram at the diameter threshold on a
seeded cloud sampled from a synthetic papilla segment, first through the
compiled kernels and then through the pure-numpy fallback, and checks that
both give the same bars. Compilation is excluded by a warm-up call.
"""
import argparse
import time

import numpy as np

from papillae import _accel
from papillae.mesh import subsample_indices
from papillae.persistence import DiagramConfig, diagram
from papillae.segmentation import extract_segment
from papillae.synth import gen_filiform


def cloud(n, seed=0):
    seg = extract_segment(gen_filiform(seed=seed), [0.0, 0.0, 0.0])
    v = seg.mesh.vertices
    return v[subsample_indices(v.shape[0], min(n, v.shape[0]), seed)]


def timed(points, numba_on, repeats):
    previous = _accel.set_numba(numba_on)
    try:
        cfg = DiagramConfig(n_subsample=points.shape[0])
        diagram(points[:20], cfg)  # warm-up / compile
        best, out = np.inf, None
        for _ in range(repeats):
            t = time.perf_counter()
            out = diagram(points, cfg)
            best = min(best, time.perf_counter() - t)
        return best, out
    finally:
        _accel.set_numba(previous)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[200, 500, 1000])
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'n':>6} {'numba s':>10} {'numpy s':>10} {'speedup':>8}  same bars")
    for n in args.sizes:
        pts = cloud(n)
        t_nb, d_nb = timed(pts, True, args.repeats)
        t_np, d_np = timed(pts, False, args.repeats)
        same = np.array_equal(d_nb.dim0, d_np.dim0) and np.array_equal(d_nb.dim1, d_np.dim1)
        print(f"{pts.shape[0]:>6} {t_nb:>10.3f} {t_np:>10.3f} {t_np / t_nb:>7.1f}x  {same}")


if __name__ == "__main__":
    main()
