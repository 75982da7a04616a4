"""
Time-domain check of the verdicts
=================================

Simulate the plant on either side of the first boundary, once with the
Pade loop and once with a true sampled controller.
"""

import time

import numpy as np

from pvhosting import TABLE_I, TABLE_V_GRID, PlantGroup, compose, split_winding_leakage
from pvhosting.stability import classify, system_poles
from pvhosting.timesim import SimConfig, build_statespace, detect_stability, run_linear, run_sampled

LT = split_winding_leakage()
lin, smp = SimConfig(), SimConfig(mode="sampled_data")

for n in (10, 240, 500):
    m = compose([PlantGroup(TABLE_I.with_delay(75e-6), LT, n, "pv")], TABLE_V_GRID)
    v = classify(system_poles(m))
    t0 = time.perf_counter()
    wl = run_linear(build_statespace(m), lin)
    ws = run_sampled(m, smp)
    dt = time.perf_counter() - t0
    tail = wl.times > wl.times[-1] - 0.02
    peak = np.max(np.abs(wl.currents["pv"][tail]))
    print(
        f"count {n:3d}: engine {'stable' if v.stable else 'unstable'} (max Re {v.max_real:8.3f}), "
        f"linear {detect_stability(wl, lin)}, sampled {detect_stability(ws, smp)}, "
        f"final-cycle peak {peak:.3g} A, {dt:.1f} s"
    )
