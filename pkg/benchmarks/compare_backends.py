"""Timing comparison of the compiled and pure-numpy kernel backends.

Runs the same end-to-end estimation workload against both backends
(kernel parity is asserted separately in the test suite) and reports
per-call latency. Invoke directly:

    python benchmarks/compare_backends.py [--trials N]
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from sapd import ArrayConfig, draw_scene, synthesize_snapshot
from sapd.backend import impl, numpy_impl
from sapd.solver import SolverParams
import sapd.solver as solver


def time_backend(kernels, snaps, cfg, params):
    solver.impl = kernels
    import sapd.spectrum as spectrum
    spectrum.impl = kernels
    # warm up caches and JIT-ish paths
    solver.estimate(cfg, snaps[0].data, params)
    lats = []
    for snap in snaps:
        t0 = time.perf_counter()
        solver.estimate(cfg, snap.data, params)
        lats.append(time.perf_counter() - t0)
    return np.asarray(lats)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=300)
    args = ap.parse_args()
    cfg = ArrayConfig()
    params = SolverParams()
    rng = np.random.default_rng(7)
    scenarios = {
        "two-source (0, 8) deg": (0.0, 8.0),
        "five-source patch scene": (-30.0, -20.0, -10.0, 37.0, 45.0),
    }
    backends = {"numpy": numpy_impl()}
    if impl.BACKEND_NAME == "cython":
        backends["cython"] = impl
    for label, angles in scenarios.items():
        snaps = []
        for _ in range(args.trials):
            scene = draw_scene(angles, 15.0, rng)
            snaps.append(synthesize_snapshot(cfg, scene, rng))
        print(f"\n{label}, {args.trials} snapshots:")
        base = None
        for name, kernels in backends.items():
            lats = time_backend(kernels, snaps, cfg, params)
            med = np.median(lats) * 1e3
            if base is None:
                base = med
            print(f"  {name:>6}: median {med:.3f} ms  mean {lats.mean() * 1e3:.3f} ms"
                  f"  (x{base / med:.2f} vs numpy)")
    solver.impl = impl


if __name__ == "__main__":
    main()
