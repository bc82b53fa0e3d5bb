"""Benchmark the compiled kernels against the pure NumPy fallback.

Run: python benchmarks/bench_kernels.py [--width 128 --height 96]

Times the two hot loops on a synthetic frame: the per-column stixel DP
and the SAD disparity scan (both directions, as block_match uses them).
"""

import argparse
import time

import numpy as np

from freespace._kernels import available_backends
from freespace.geometry import ground_expect
from freespace.synth import BoxSpec, SceneSpec, default_rig, gen_sequence, ground_plane_of


def _timeit(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--width", type=int, default=128)
    ap.add_argument("--height", type=int, default=96)
    ap.add_argument("--max-disp", type=int, default=64)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()

    rig = default_rig(args.width, args.height)
    spec = SceneSpec(
        rig=rig,
        boxes=[BoxSpec(x=-1.5, z=10.0, width=2.0, height=1.4), BoxSpec(x=3.0, z=18.0, width=2.5, height=1.8)],
        disp_noise_std=0.15,
        invalid_rate=0.04,
        frames=1,
    )
    img, disp, _ = gen_sequence(spec, seed=3)[0]
    alpha, v_h = ground_plane_of(spec)
    H, W = disp.disparity.shape
    dhat = np.maximum(0.0, alpha * (np.arange(H) - v_h))
    d64 = disp.disparity.astype(np.float64)
    valid8 = disp.valid.astype(np.uint8)

    rng = np.random.default_rng(0)
    gray_l = rng.integers(0, 256, (args.height, args.width)).astype(np.int64)
    gray_r = np.zeros_like(gray_l)
    gray_r[:, :-7] = gray_l[:, 7:]
    gray_r[:, -7:] = gray_l[:, -7:]

    backends = available_backends()
    print(f"frame {W}x{H}, max_disp {args.max_disp}, best of {args.repeats}")
    results = {}
    for name, mod in backends.items():

        def run_dp():
            for c in range(W):
                mod.stixel_dp_column(
                    np.ascontiguousarray(d64[:, c]), np.ascontiguousarray(valid8[:, c]),
                    dhat, 1.0, 4.0, 1.0, 8.0, 4.0, 2.0,
                )

        def run_sad():
            mod.sad_scan(gray_l, gray_r, 9, args.max_disp, -1, False)
            mod.sad_scan(gray_r, gray_l, 9, args.max_disp, 1, True)

        t_dp = _timeit(run_dp, args.repeats)
        t_sad = _timeit(run_sad, args.repeats)
        results[name] = (t_dp, t_sad)
        print(f"  {name:7s} stixel DP: {t_dp * 1e3:9.2f} ms/frame   SAD scan: {t_sad * 1e3:9.2f} ms/pair")

    if len(results) == 2:
        py, cy = results["python"], results["cython"]
        print(f"  speedup  stixel DP: {py[0] / cy[0]:6.1f}x         SAD scan: {py[1] / cy[1]:6.1f}x")


if __name__ == "__main__":
    main()
