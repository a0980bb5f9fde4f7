"""Compiled and pure-Python kernels must agree exactly."""
import os
import subprocess
import sys

import numpy as np
import pytest

from textless import kernels

IMPLS = kernels.implementations()
needs_both = pytest.mark.skipif(len(IMPLS) < 2, reason="compiled extension not built")


def test_backend_selected():
    assert kernels.BACKEND in IMPLS


def test_pure_python_env_switch():
    env = dict(os.environ, TEXTLESS_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from textless import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@pytest.mark.parametrize("name", sorted(IMPLS))
def test_kernel_examples(name):
    k = IMPLS[name]
    assert k.levenshtein(np.array([0, 1, 2]), np.array([0, 2])) == 1
    assert k.levenshtein(np.array([], dtype=np.int64), np.array([1, 2, 3])) == 3
    assert k.dtw_accumulate(np.zeros((3, 4))) == 0.0
    assert k.dtw_accumulate(np.array([[2.0]])) == 2.0


@needs_both
def test_dtw_parity():
    rng = np.random.default_rng(0)
    for _ in range(30):
        cost = rng.random((rng.integers(1, 20), rng.integers(1, 20)))
        # quantised costs create ties that exercise the tie-break order
        cost = np.round(cost * 4) / 4
        assert IMPLS["python"].dtw_accumulate(cost) == IMPLS["cython"].dtw_accumulate(cost)


@needs_both
def test_levenshtein_parity():
    rng = np.random.default_rng(1)
    for _ in range(100):
        a = rng.integers(0, 4, size=rng.integers(0, 15))
        b = rng.integers(0, 4, size=rng.integers(0, 15))
        assert IMPLS["python"].levenshtein(a, b) == IMPLS["cython"].levenshtein(a, b)


@needs_both
@pytest.mark.parametrize("temperature", [0.0, 0.8])
def test_ar_generate_parity(temperature):
    rng = np.random.default_rng(2)
    n, h, q, order = 300, 6, 16, 2
    args = (rng.normal(size=(n, h)), rng.normal(size=(order, q, h)), rng.normal(size=(h, q)),
            rng.normal(size=q), temperature, rng.random(n), q // 2)
    a = IMPLS["python"].ar_generate(*args)
    b = IMPLS["cython"].ar_generate(*args)
    np.testing.assert_array_equal(a, b)
    assert a.min() >= 0 and a.max() < q
