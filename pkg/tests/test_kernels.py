"""Parity tests between the compiled and pure-numpy GaBP stage kernels."""
import os
import subprocess
import sys

import numpy as np
import pytest

from ufft import _gabp_np
from ufft import kernels

try:
    from ufft import _gabp_cy
except ImportError:  # pragma: no cover - compiled extension unavailable
    _gabp_cy = None


def random_stage(rng, N):
    """Random stage-1 style inputs: N legs, N/2 butterflies."""
    mean_in = rng.standard_normal((N, 2))
    a = rng.standard_normal((N, 2, 2))
    cov_in = a @ np.swapaxes(a, -1, -2) + 0.3 * np.eye(2)
    mean_op = rng.standard_normal((N, 2))
    b = rng.standard_normal((N, 2, 2))
    cov_op = b @ np.swapaxes(b, -1, -2) + 0.3 * np.eye(2)
    i0 = np.arange(0, N, 2, dtype=np.intp)
    i1 = i0 + 1
    w = np.exp(-2j * np.pi * rng.random(N // 2))
    return mean_in, cov_in, mean_op, cov_op, i0, i1, w.real.copy(), w.imag.copy()


needs_cython = pytest.mark.skipif(_gabp_cy is None, reason="compiled kernel not built")


@needs_cython
class TestBackendParity:
    def test_stage_forward_parity(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            mi, ci, mo, co, i0, i1, wr, wi = random_stage(rng, 32)
            out_np = (np.zeros((32, 2)), np.zeros((32, 2, 2)))
            out_cy = (np.zeros((32, 2)), np.zeros((32, 2, 2)))
            _gabp_np.stage_forward(mi, ci, mo, co, i0, i1, wr, wi, *out_np)
            _gabp_cy.stage_forward(mi, ci, mo, co, i0, i1, wr, wi, *out_cy)
            assert np.allclose(out_np[0], out_cy[0], atol=1e-12)
            assert np.allclose(out_np[1], out_cy[1], atol=1e-12)

    def test_stage_backward_parity(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            mi, ci, mo, co, i0, i1, wr, wi = random_stage(rng, 32)
            out_np = (np.zeros((32, 2)), np.zeros((32, 2, 2)))
            out_cy = (np.zeros((32, 2)), np.zeros((32, 2, 2)))
            _gabp_np.stage_backward(mi, ci, mo, co, i0, i1, wr, wi, *out_np)
            _gabp_cy.stage_backward(mi, ci, mo, co, i0, i1, wr, wi, *out_cy)
            assert np.allclose(out_np[0], out_cy[0], atol=1e-12)
            assert np.allclose(out_np[1], out_cy[1], atol=1e-12)


def test_backend_identifiers():
    assert _gabp_np.BACKEND == "numpy"
    assert kernels.BACKEND in ("numpy", "cython")
    if _gabp_cy is not None:
        assert _gabp_cy.BACKEND == "cython"
        assert kernels.BACKEND == "cython"


def test_force_numpy_env():
    env = dict(os.environ, UFFT_FORCE_NUMPY="1")
    out = subprocess.run(
        [sys.executable, "-c", "from ufft import kernels; print(kernels.BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "numpy"
