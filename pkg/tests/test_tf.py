import math

import numpy as np
import pytest

from zsource_wind.tf import RationalTF, bandwidth, freq_response, response_mismatch


def test_trims_and_rejects_zero_denominator():
    tf = RationalTF((1.0, 2.0, 0.0), (1.0, 1.0, 0.0))
    assert tf.num == (1.0, 2.0) and tf.den == (1.0, 1.0)
    with pytest.raises(ValueError):
        RationalTF((1.0,), (0.0, 0.0))


def test_first_order_lag():
    (m, p), = freq_response(RationalTF((1.0,), (1.0, 1.0)), [1.0])
    assert m == pytest.approx(-3.0103, abs=1e-4)
    assert p == pytest.approx(-45.0, abs=1e-12)


def test_constant_and_differentiator():
    w = np.logspace(-2, 4, 50)
    for m, p in freq_response(RationalTF.constant(3.0), w):
        assert m == pytest.approx(20 * math.log10(3.0)) and p == 0.0
    for _, p in freq_response(RationalTF((0.0, 1.0), (1.0,)), w):
        assert p == pytest.approx(90.0)


def test_pole_on_axis_is_infinite_not_error():
    tf = RationalTF((1.0,), (4.0, 0.0, 1.0))   # poles at +-2j
    resp = freq_response(tf, [1.0, 2.0, 3.0])
    assert math.isinf(resp[1][0])
    assert math.isfinite(resp[0][0]) and math.isfinite(resp[2][0])


@pytest.mark.parametrize("grid", [[1.0, 0.5], [0.0, 1.0], [-1.0, 1.0], [1.0, 1.0]])
def test_grid_validation(grid):
    with pytest.raises(ValueError):
        freq_response(RationalTF.constant(1.0), grid)


def test_algebra():
    a = RationalTF((1.0,), (1.0, 1.0))
    b = RationalTF((2.0,), (3.0, 1.0))
    s = 0.3 + 1.7j
    assert (a * b)(s) == pytest.approx(a(s) * b(s))
    assert (a + b)(s) == pytest.approx(a(s) + b(s))
    cl = (a * b).feedback()
    assert cl(s) == pytest.approx(a(s) * b(s) / (1 + a(s) * b(s)))
    assert a.dc_gain() == 1.0
    np.testing.assert_allclose(sorted(RationalTF((-2.0, 1.0), (6.0, 5.0, 1.0)).poles().real),
                               [-3.0, -2.0])
    np.testing.assert_allclose(RationalTF((-2.0, 1.0), (1.0,)).zeros(), [2.0])


def test_descending_constructor_and_normalized():
    tf = RationalTF.from_descending([2.0, 4.0], [2.0, 6.0, 8.0])
    assert tf.num == (4.0, 2.0) and tf.den == (8.0, 6.0, 2.0)
    n = tf.normalized()
    assert n.den[-1] == 1.0 and n(1j) == pytest.approx(tf(1j))


def test_mismatch_and_bandwidth():
    a = RationalTF((1.0,), (1.0, 1.0))
    assert response_mismatch(a, a, [0.1, 1, 10]) == (0.0, 0.0)
    assert bandwidth(a) == pytest.approx(1.0, rel=1e-3)
    assert bandwidth(RationalTF((100.0,), (100.0, 1.0))) == pytest.approx(100.0, rel=1e-3)
