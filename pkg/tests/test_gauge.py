import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from hauscover.gauge import (DomainError, Exponent, coarea_constant, omega, power_q, zeta,
                             zeta_q)


@pytest.mark.parametrize("s, expected", [(0, 1.0), (1, 2.0), (2, math.pi), (3, 4 * math.pi / 3),
                                         (4, math.pi ** 2 / 2), (0.5, math.pi ** 0.25 / math.gamma(1.25))])
def test_omega_closed_forms(s, expected):
    assert omega(s) == pytest.approx(expected, rel=1e-12)


@given(st.integers(min_value=2, max_value=60))
def test_omega_recurrence(n):
    assert omega(n) == pytest.approx(omega(n - 2) * 2 * math.pi / n, rel=1e-10)


def test_omega_rejects_negative():
    with pytest.raises(DomainError):
        omega(-0.5)


def test_zeta_examples():
    assert zeta(0, 7.3) == 1
    assert zeta(1, 2) == pytest.approx(2)
    assert zeta(1.5, 0) == 0
    assert zeta(2, 3, nonempty=False) == 0
    with pytest.raises(DomainError):
        zeta(1, -1)


@given(st.floats(0, 12), st.floats(0, 50), st.floats(0, 50))
def test_zeta_monotone(s, d1, d2):
    lo, hi = sorted((d1, d2))
    assert zeta(s, lo) <= zeta(s, hi) * (1 + 1e-12)


@given(st.floats(0.01, 8), st.floats(0.01, 8), st.floats(0.01, 30))
def test_zeta_product_identity(s, t, d):
    lhs = zeta(s, d) * zeta(t, d)
    rhs = omega(s) * omega(t) / omega(s + t) * zeta(s + t, d)
    assert lhs == pytest.approx(rhs, rel=1e-10)


@given(st.floats(0, 10), st.floats(0, 10))
def test_coarea_constant_symmetric(a, b):
    s = a + b
    assert coarea_constant(s, a) == pytest.approx(coarea_constant(s, b), rel=1e-10)


def test_exponent_parsing():
    s = Exponent.parse("log(2)/log(3)")
    assert s.value == pytest.approx(math.log(2) / math.log(3), rel=1e-15)
    assert Exponent.parse("1+log(2)/log(3)").value == pytest.approx(1 + s.value)
    assert (Exponent.parse("1+log(2)/log(3)") - Exponent.parse(1)).value == pytest.approx(s.value)
    with pytest.raises((ValueError, SyntaxError)):
        Exponent.parse("__import__('os')")
    with pytest.raises(DomainError):
        Exponent.parse(-1)
    with pytest.raises(DomainError):
        Exponent.parse(1) - Exponent.parse(2)


def test_zeta_q_binary_scaling_is_exact():
    # cells of the Cantor construction: 2^k cells of size 3^-k cost exactly one unit cell
    s = Exponent.parse("log(2)/log(3)")
    one = zeta_q(s, 1)
    for k in range(1, 9):
        assert 2 ** k * zeta_q(s, Fraction(1, 3 ** k)) == one
    assert float(one) == pytest.approx(zeta(s.value, 1.0), rel=1e-14)


def test_power_q_brackets():
    s = Exponent.parse("log(2)/log(3)")
    up, down = power_q(6, s, up=True), power_q(6, s, up=False)
    assert down <= up
    assert float(down) <= 6 ** s.value <= float(up) * (1 + 1e-15)
