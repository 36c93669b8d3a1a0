"""The compiled kernels must agree with the numpy fallback."""
import math
import os

import numpy as np
import pytest

from funcar import _pykernels, kernels

ckernels = pytest.importorskip("funcar._ckernels")


def test_backend_selected():
    forced = os.environ.get("FUNCAR_PURE_PYTHON") == "1"
    assert kernels.BACKEND == ("python" if forced else "cython")


@pytest.mark.parametrize("J,T", [(1, 5), (5, 200), (30, 50)])
def test_ar_recursion_agrees(J, T):
    rng = np.random.default_rng(J * T)
    rho = rng.standard_normal((J, J)) / (2 * math.sqrt(J))
    x0 = rng.standard_normal(J)
    eps = rng.standard_normal((T, J))
    a = ckernels.ar_recursion(rho, x0, eps)
    b = _pykernels.ar_recursion(rho, x0, eps)
    assert a.shape == (T + 1, J)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)
    np.testing.assert_array_equal(a[0], x0)


def test_ar_recursion_no_steps():
    out = ckernels.ar_recursion(np.eye(2), np.array([1.0, 2.0]), np.zeros((0, 2)))
    np.testing.assert_array_equal(out, [[1.0, 2.0]])


@pytest.mark.parametrize("impl", [ckernels, _pykernels])
def test_ar_recursion_shape_check(impl):
    with pytest.raises(ValueError):
        impl.ar_recursion(np.eye(2), np.zeros(3), np.zeros((4, 2)))


@pytest.mark.parametrize("J", [1, 2, 7, 30])
def test_fourier_design_agrees(J):
    u = np.random.default_rng(J).uniform(0, 2 * math.pi, 101)
    w = (1.0 + ((np.arange(J) + 1) // 2) ** 2.0) ** 1.5
    np.testing.assert_allclose(ckernels.fourier_design(u, J, w), _pykernels.fourier_design(u, J, w),
                               rtol=1e-13, atol=1e-15)
