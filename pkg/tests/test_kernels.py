import os
import subprocess
import sys

from icansim import kernels


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_pure_python_fallback_selected():
    env = dict(os.environ, ICANSIM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import icansim.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_fallback_gives_same_csv(small_cfg):
    code = ("import sys; from icansim.config import load_config; from icansim import engine;"
            "cfg = load_config().replace(ue_count=8, num_snapshots=2);"
            "sys.stdout.write(engine.to_csv(engine.run_scenario(cfg)))")
    runs = []
    for flag in ("1", ""):
        env = dict(os.environ, ICANSIM_PURE_PYTHON=flag)
        runs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                   text=True, check=True).stdout)
    # backends agree to ~1e-13, far below the 9 printed significant digits
    assert runs[0].splitlines()[0] == runs[1].splitlines()[0]
    a = [line.split(",") for line in runs[0].splitlines()[1:]]
    b = [line.split(",") for line in runs[1].splitlines()[1:]]
    assert len(a) == len(b) == 8 * 2 * 4
    for ra, rb in zip(a, b):
        assert ra[:4] == rb[:4] and ra[6:] == rb[6:]
        assert abs(float(ra[4]) / float(rb[4]) - 1) < 1e-7
