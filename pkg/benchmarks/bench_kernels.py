"""Compare the compiled and numpy beam-power kernels on a reference-scenario snapshot.

    python benchmarks/bench_kernels.py [--ues 500] [--repeat 5]
"""
import argparse
import time

import numpy as np

from icansim import _kernels_py
from icansim.beams import CRSB, TMCB, build_beam_plan
from icansim.config import load_config
from icansim.engine import Scenario
from icansim.constellation import elevations, propagate_arrays
from icansim.link import _p0_watts

try:
    from icansim import _kernels_c
except ImportError:
    _kernels_c = None


def _inputs(ue_count):
    cfg = load_config().replace(ue_count=ue_count)
    scn = Scenario.build(cfg)
    snap = propagate_arrays(scn.elements, 0.0)
    elev = elevations(scn.ue_ecef, snap.positions)
    rel = np.flatnonzero((elev >= 0).any(axis=0))
    states = [snap.state(int(i)) for i in rel]
    plan = build_beam_plan(TMCB, CRSB, None, (), states, scn.layout, scn.colors)
    return (scn.ue_ecef, np.ascontiguousarray(plan.positions),
            np.ascontiguousarray(plan.beam_directions()),
            plan.colors.astype(np.int64), plan.active.astype(np.uint8),
            (elev[:, rel] >= 0).astype(np.uint8), cfg.antenna.ka, cfg.antenna.wavelength,
            _p0_watts(cfg.antenna, cfg.rf), scn.n_colors)


def _time(fn, args, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--ues", type=int, default=500)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    inputs = _inputs(args.ues)
    n_sat, n_beam = inputs[2].shape[:2]
    print(f"{args.ues} UEs x {n_sat} satellites x {n_beam} beams")
    t_py, ref = _time(_kernels_py.aggregate_beam_power, inputs, args.repeat)
    print(f"numpy   {t_py * 1e3:9.1f} ms")
    if _kernels_c is None:
        print("cython  not built")
        return
    t_c, got = _time(_kernels_c.aggregate_beam_power, inputs, args.repeat)
    err = np.max(np.abs(got[0] - ref[0]) / np.maximum(np.abs(ref[0]), 1e-300))
    print(f"cython  {t_c * 1e3:9.1f} ms   speed-up {t_py / t_c:5.2f}x   max rel diff {err:.1e}")


if __name__ == "__main__":
    main()
