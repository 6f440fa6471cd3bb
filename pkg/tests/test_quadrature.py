import math

import numpy as np
import pytest

from bns_lrm.quadrature import (
    GAUSS_WEIGHTS,
    KRONROD_WEIGHTS,
    NODES,
    QuadratureError,
    gauss_kronrod,
)


@pytest.mark.parametrize("deg", range(0, 31, 3))
def test_kronrod_exact_on_polynomials(deg):
    exact = (1 - (-1) ** (deg + 1)) / (deg + 1)
    assert np.dot(KRONROD_WEIGHTS, NODES ** deg) == pytest.approx(exact, abs=1e-14)


@pytest.mark.parametrize("deg", range(0, 20, 3))
def test_gauss_exact_on_polynomials(deg):
    exact = (1 - (-1) ** (deg + 1)) / (deg + 1)
    assert np.dot(GAUSS_WEIGHTS, NODES ** deg) == pytest.approx(exact, abs=1e-14)


def test_vector_integrand():
    f = lambda x: np.stack([np.sin(x), np.exp(-x) * np.cos(5 * x)])
    res = gauss_kronrod(f, np.linspace(0, 20, 5), 1e-12, 1e-12)
    assert res.value[0] == pytest.approx(1 - math.cos(20), abs=1e-11)
    assert res.value[1] == pytest.approx(1 / 26 * (1 - math.exp(-20) * (math.cos(100) - 5 * math.sin(100))), abs=1e-11)
    assert np.all(res.error < 1e-10)


def test_deterministic():
    f = lambda x: np.stack([np.cos(30 * x) / (1 + x * x)])
    a = gauss_kronrod(f, [0, 50], 1e-11, 1e-12)
    b = gauss_kronrod(f, [0, 50], 1e-11, 1e-12)
    assert a.value.tobytes() == b.value.tobytes()


def test_nonconvergence_raises():
    f = lambda x: np.stack([1.0 / np.sqrt(np.abs(x - 0.3))])
    with pytest.raises(QuadratureError) as info:
        gauss_kronrod(f, [0, 1], 1e-14, 1e-14, max_panels=50)
    assert info.value.estimate is not None
