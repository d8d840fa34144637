"""Refinement study: characteristics simulator against the closed-form wall trajectory.

A bump packet launched from x = -5 hits a single wall at the origin
(a = rho0 = S = M = K = 1). Prints the relative max error of y(t) on [0, 20]
and the observed order for h = 1/32 ... 1/512.
"""

import argparse
import time

import numpy as np

from pointacoustics.core import Grid, Medium, OscillatorArray
from pointacoustics.single_wall import InitialData, SingleWallParams, bump, wall_trajectory
from pointacoustics.timedomain import CharacteristicState, SimConfig, Simulator


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--levels", type=int, default=5)
    ap.add_argument("--t-end", type=float, default=20.0)
    args = ap.parse_args()

    m = Medium(1.0, 1.0, 1.0)
    arr = OscillatorArray.single(0.0, 1.0, 1.0)
    f = bump(-5.0, 1.0)
    data, params = InitialData(f, f), SingleWallParams(m, 1.0, 1.0)
    prev = None
    print(f"{'h':>8} {'rel error':>12} {'order':>6} {'energy drift':>13} {'time [s]':>9}")
    for k in range(args.levels):
        h = 1 / (32 * 2**k)
        t0 = time.perf_counter()
        grid = Grid.with_spacing(-6.0, 6.0, h)
        cs = CharacteristicState.from_functions(grid, arr, m, p=f, v=f)
        ts = Simulator(SimConfig(grid, args.t_end), arr, m).run(cs)
        ref, _ = wall_trajectory(data, params, ts.times)
        err = np.max(np.abs(ts.y[:, 0].real - ref)) / np.max(np.abs(ref))
        drift = np.max(np.abs(ts.e_total - ts.e_total[0])) / ts.e_total[0]
        order = f"{np.log2(prev / err):6.2f}" if prev else "     -"
        print(f"1/{int(round(1 / h)):<6} {err:12.3e} {order} {drift:13.1e} {time.perf_counter() - t0:9.2f}")
        prev = err


if __name__ == "__main__":
    main()
