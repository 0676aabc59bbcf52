import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from beampower import kernels
from beampower.bench import kernel_cases, run_benchmark

NUMBA = kernels.backend_module("numba")
NUMPY = kernels.backend_module("numpy")


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, y) for x, y in zip(a, b))
    return np.asarray(a).tobytes() == np.asarray(b).tobytes()


@pytest.mark.parametrize("name", ["achieved_rate", "optimal_power", "reward", "gae"])
def test_backends_bit_identical(name):
    for seed in range(5):
        args = kernel_cases(n_beams=3 + seed, n_rows=50, seed=seed)[name]
        assert same(getattr(NUMBA, name)(*args), getattr(NUMPY, name)(*args))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.01, 10.0))
def test_reward_backends_agree(seed, ref):
    rng = np.random.default_rng(seed)
    p, r = rng.random((9, 4)), rng.random((9, 4))
    d, po = rng.random(4), rng.random(4) + 0.01
    assert same(NUMBA.reward(p, r, d, po, 100.0, ref), NUMPY.reward(p, r, d, po, 100.0, ref))


def test_keepalive_backends_agree():
    args = kernel_cases(seed=9)["optimal_power"]
    link_const, need, spread = args[1], args[2], args[3]
    assert same(NUMBA.keepalive_power(link_const, need, spread), NUMPY.keepalive_power(link_const, need, spread))


def test_backend_names():
    with pytest.raises(ValueError):
        kernels.backend_module("fortran")


@pytest.mark.parametrize("flag, expect", [("1", "numpy"), ("", "numba"), ("0", "numba")])
def test_env_flag_selects_backend(flag, expect):
    env = dict(os.environ, BEAMPOWER_DISABLE_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "from beampower import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expect


def test_benchmark_reports_identical():
    rows = run_benchmark(n_beams=4, n_rows=20, repeat=2)
    assert {r.kernel for r in rows} == {"achieved_rate", "optimal_power", "reward", "gae"}
    assert all(r.identical and r.numba_ms > 0 and r.numpy_ms > 0 for r in rows)
