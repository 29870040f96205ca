"""numba and numpy kernel paths must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gancodec import kernels
from gancodec._accel import HAVE_NUMBA

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not importable")


@needs_numba
@given(st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=200), st.integers(2, 64))
def test_nearest_level_parity(values, L):
    mids = np.linspace(-1, 1, L)[:-1] + 1.0 / (L - 1)
    v = np.array(values)
    np.testing.assert_array_equal(kernels.nearest_level_nb(v, mids), kernels.nearest_level_np(v, mids))


def test_nearest_level_ties_go_low():
    mids = np.array([0.0])
    assert kernels.nearest_level_np(np.array([0.0]), mids)[0] == 0
    if HAVE_NUMBA:
        assert kernels.nearest_level_nb(np.array([0.0]), mids)[0] == 0


@needs_numba
@given(st.integers(1, 16), st.integers(0, 300), st.integers(0, 2**31))
def test_pack_unpack_parity(bits, n, seed):
    idx = np.random.default_rng(seed).integers(0, 2**bits, n).astype(np.int64)
    a, b = kernels.pack_indices_nb(idx, bits), kernels.pack_indices_np(idx, bits)
    np.testing.assert_array_equal(a, b)
    assert a.size == (n * bits + 7) // 8
    np.testing.assert_array_equal(kernels.unpack_indices_nb(a, bits, n), idx)
    np.testing.assert_array_equal(kernels.unpack_indices_np(a, bits, n), idx)


def test_pack_msb_first():
    # 2-bit indices 3, 0, 1, 2 -> 11 00 01 10 -> 0xC6
    out = kernels.pack_indices_np(np.array([3, 0, 1, 2]), 2)
    assert out.tolist() == [0xC6]
    if HAVE_NUMBA:
        assert kernels.pack_indices_nb(np.array([3, 0, 1, 2]), 2).tolist() == [0xC6]


@needs_numba
def test_confusion_parity(rng):
    gt = rng.integers(0, 5, 4000).astype(np.int64)
    gt[rng.random(4000) < 0.1] = 255
    pred = rng.integers(0, 5, 4000).astype(np.int64)
    np.testing.assert_array_equal(kernels.confusion_nb(gt, pred, 5, 255), kernels.confusion_np(gt, pred, 5, 255))


@needs_numba
def test_filter_parity(rng):
    plane = rng.random((40, 37)) * 255
    k = rng.random(11)
    np.testing.assert_allclose(kernels.filter_valid_nb(plane, k), kernels.filter_valid_np(plane, k), rtol=1e-12)


def test_filter_oracle(rng):
    plane = rng.random((15, 14))
    k = rng.random(3)
    w2 = np.outer(k, k)
    want = np.array([[np.sum(plane[i:i + 3, j:j + 3] * w2) for j in range(12)] for i in range(13)])
    np.testing.assert_allclose(kernels.filter_valid(plane, k), want, rtol=1e-12)


def test_env_flag_selects_numpy():
    code = "from gancodec import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, GANCODEC_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
    env["GANCODEC_DISABLE_NUMBA"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == ("numba" if HAVE_NUMBA else "numpy")


def test_benchmark_script_runs(capsys):
    import importlib.util
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    spec = importlib.util.spec_from_file_location("bench_kernels", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    mod.main(["--repeat", "1"])
    out = capsys.readouterr().out
    assert "confusion" in out and "filter_valid" in out
