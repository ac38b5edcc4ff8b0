"""Normalization constants and diameter gauges.

Two evaluation paths are provided.  ``omega``/``zeta`` return floats for
reporting and identity checks.  ``zeta_q`` returns an exact rational used by
every optimizer: the gauge is evaluated with 40 significant digits and rounded
to a 50-bit binary mantissa.  Binary rounding commutes with scaling by powers
of two, so mathematically tied costs (for instance the level covers of a
Cantor sample at the similarity dimension) stay tied exactly.
"""
from __future__ import annotations

import ast
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Union

import mpmath

__all__ = [
    "DomainError",
    "Exponent",
    "as_exponent",
    "omega",
    "zeta",
    "zeta_q",
    "coarea_constant",
    "power_q",
    "MAX_EXPONENT",
]

MAX_EXPONENT = 64
_DPS = 40
_MANTISSA_BITS = 50


class DomainError(ValueError):
    """Raised for exponents or diameters outside the gauge domain."""


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_FUNCS = {"log": mpmath.log, "ln": mpmath.log, "sqrt": mpmath.sqrt, "exp": mpmath.exp}


def _eval_expr(text: str) -> mpmath.mpf:
    def walk(node):
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            # decimal literals are read from their text so "0.5" is exactly 1/2
            return mpmath.mpf(repr(node.value)) if isinstance(node.value, float) else mpmath.mpf(node.value)
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](walk(node.left), walk(node.right))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = walk(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            if len(node.args) != 1 or node.keywords:
                raise DomainError(f"bad call in exponent {text!r}")
            return _FUNCS[node.func.id](walk(node.args[0]))
        if isinstance(node, ast.Name) and node.id == "pi":
            return +mpmath.pi
        raise DomainError(f"unsupported exponent expression {text!r}")

    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise DomainError(f"cannot parse exponent {text!r}") from exc
    with mpmath.workdps(_DPS):
        return +walk(tree)


@dataclass(frozen=True)
class Exponent:
    """A dimension exponent carried at 40-digit precision.

    ``Exponent.parse("log(2)/log(3)")`` keeps the Cantor dimension accurate far
    beyond double precision, which the exact gauge relies on.
    """

    mp: mpmath.mpf = field(compare=True)
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if not mpmath.isfinite(self.mp) or self.mp < 0:
            raise DomainError(f"exponent must be finite and >= 0, got {self.label or self.mp}")
        if self.mp > MAX_EXPONENT:
            raise DomainError(f"exponent {self.label or self.mp} exceeds {MAX_EXPONENT}")

    @classmethod
    def parse(cls, value: Union["Exponent", str, int, float, Fraction]) -> "Exponent":
        if isinstance(value, Exponent):
            return value
        if isinstance(value, str):
            return cls(_eval_expr(value), value.strip())
        if isinstance(value, Fraction):
            with mpmath.workdps(_DPS):
                return cls(mpmath.mpf(value.numerator) / value.denominator, str(value))
        if isinstance(value, (int, float)):
            if isinstance(value, float) and not math.isfinite(value):
                raise DomainError(f"exponent must be finite, got {value}")
            if value < 0:
                raise DomainError(f"exponent must be >= 0, got {value}")
            with mpmath.workdps(_DPS):
                return cls(mpmath.mpf(value), repr(value))
        raise TypeError(f"cannot interpret {value!r} as an exponent")

    @property
    def value(self) -> float:
        return float(self.mp)

    @property
    def is_zero(self) -> bool:
        return self.mp == 0

    def __add__(self, other) -> "Exponent":
        other = Exponent.parse(other)
        with mpmath.workdps(_DPS):
            return Exponent(self.mp + other.mp, f"({self.label})+({other.label})")

    def __sub__(self, other) -> "Exponent":
        other = Exponent.parse(other)
        with mpmath.workdps(_DPS):
            diff = self.mp - other.mp
        if diff < 0:
            # t <= s holds symbolically but the two labels may round apart
            if abs(diff) < mpmath.mpf(10) ** (-_DPS + 5):
                diff = mpmath.mpf(0)
            else:
                raise DomainError(f"negative exponent {self.label} - {other.label}")
        return Exponent(diff, f"({self.label})-({other.label})")

    def __float__(self) -> float:
        return self.value

    def __str__(self) -> str:
        return self.label or mpmath.nstr(self.mp, 17)


def as_exponent(s) -> Exponent:
    return Exponent.parse(s)


def omega(s) -> float:
    """Volume of the unit ball in dimension ``s``: pi^(s/2) / Gamma(s/2 + 1)."""
    if isinstance(s, Exponent):
        s = s.value
    if s < 0:
        raise DomainError(f"omega undefined for s={s} < 0")
    if s > MAX_EXPONENT:
        raise DomainError(f"omega domain is [0, {MAX_EXPONENT}]")
    # log-space keeps large s away from overflow in Gamma
    return math.exp(0.5 * s * math.log(math.pi) - math.lgamma(0.5 * s + 1.0))


def zeta(s, d: float, nonempty: bool = True) -> float:
    """Float gauge omega_s / 2^s * d^s, with zeta^0 = 1 on nonempty sets."""
    s = as_exponent(s)
    d = float(d)
    if d < 0:
        raise DomainError(f"negative diameter {d}")
    if not nonempty:
        return 0.0
    if s.is_zero:
        return 1.0
    if d == 0:
        return 0.0
    return omega(s) * (d / 2.0) ** s.value


def coarea_constant(s, t) -> float:
    """omega_{s-t} * omega_t / omega_s for 0 <= t <= s."""
    s, t = as_exponent(s), as_exponent(t)
    rest = s - t
    return omega(rest) * omega(t) / omega(s)


def _round_binary(v: mpmath.mpf) -> Fraction:
    if v == 0:
        return Fraction(0)
    m, e = mpmath.frexp(v)  # v = m * 2**e, 0.5 <= |m| < 1
    mant = int(mpmath.nint(m * (2 ** _MANTISSA_BITS)))
    shift = e - _MANTISSA_BITS
    if shift >= 0:
        return Fraction(mant * (1 << shift))
    return Fraction(mant, 1 << -shift)


@lru_cache(maxsize=None)
def _zeta_q_cached(s_mp: mpmath.mpf, num: int, den: int) -> Fraction:
    with mpmath.workdps(_DPS):
        om = mpmath.pi ** (s_mp / 2) / mpmath.gamma(s_mp / 2 + 1)
        d = mpmath.mpf(num) / den
        return _round_binary(om * (d / 2) ** s_mp)


def zeta_q(s, d, nonempty: bool = True) -> Fraction:
    """Exact-rational gauge value used by all optimizers (see module docs)."""
    s = as_exponent(s)
    d = Fraction(d)
    if d < 0:
        raise DomainError(f"negative diameter {d}")
    if not nonempty:
        return Fraction(0)
    if s.is_zero:
        return Fraction(1)
    if d == 0:
        return Fraction(0)
    return _zeta_q_cached(s.mp, d.numerator, d.denominator)


@lru_cache(maxsize=None)
def _power_q_cached(base_num: int, base_den: int, s_mp: mpmath.mpf, up: bool) -> Fraction:
    with mpmath.workdps(_DPS):
        v = (mpmath.mpf(base_num) / base_den) ** s_mp
        q = _round_binary(v)
        # nudge by one unit so the rational is a one-sided bound
        ulp = _round_binary(v) * Fraction(1, 1 << (_MANTISSA_BITS - 1))
        return q + ulp if up else q - ulp


def power_q(base, s, up: bool = True) -> Fraction:
    """Rational bound on base**s, rounded outward (up by default)."""
    s = as_exponent(s)
    base = Fraction(base)
    if s.is_zero:
        return Fraction(1)
    if base == 0:
        return Fraction(0)
    return _power_q_cached(base.numerator, base.denominator, s.mp, up)
