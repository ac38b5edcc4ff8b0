"""Exact rational simplex for packing LPs.

Every LP in this package has the packing form

    maximize c.y   subject to   A y <= b,  y >= 0,   with b >= 0,

whose dual ``minimize b.x  s.t.  A^T x >= c, x >= 0`` is the covering LP.  The
slack basis is feasible, so no phase one is needed, and the optimal tableau
yields both the packing ``y`` and the covering weights ``x``.  Arithmetic is
exact (``gmpy2.mpq``); entering columns follow Dantzig's rule and switch to
Bland's rule permanently after a run of degenerate pivots, so runs terminate
and are deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from gmpy2 import mpq

__all__ = ["LpFailure", "LpUnbounded", "PackingSolution", "solve_packing", "solve_packing_float",
           "rows_from_masks"]

_DEGENERATE_SWITCH = 30
_MAX_PIVOTS = 200_000


class LpFailure(RuntimeError):
    """No certified rational optimum was found."""


class LpUnbounded(LpFailure):
    """The packing LP is unbounded (the covering dual is infeasible)."""


@dataclass
class PackingSolution:
    value: Fraction
    y: list  # packing, one entry per column
    x: list  # covering weights, one entry per row
    pivots: int
    exact: bool = True


def _q(v) -> mpq:
    if isinstance(v, Fraction):
        return mpq(v.numerator, v.denominator)
    return mpq(v)


def _f(v) -> Fraction:
    return Fraction(int(v.numerator), int(v.denominator))


def rows_from_masks(masks: Sequence[int], columns: Sequence[int]) -> list:
    """0/1 constraint rows: entry j is 1 when point ``columns[j]`` lies in the mask."""
    return [[1 if m >> p & 1 else 0 for p in columns] for m in masks]


def solve_packing(A: Sequence[Sequence], b: Sequence, c: Sequence, *, verify: bool = True) -> PackingSolution:
    m = len(A)
    n = len(c)
    if len(b) != m:
        raise ValueError("b must have one entry per row")
    if any(len(row) != n for row in A):
        raise ValueError("every row of A needs one entry per column")
    rhs = [_q(v) for v in b]
    if any(v < 0 for v in rhs):
        raise ValueError("packing LP needs b >= 0")
    T = [[_q(v) for v in row] for row in A]
    obj = [-_q(v) for v in c]
    basic = list(range(n, n + m))
    nonbasic = list(range(n))
    zero = mpq(0)

    pivots = 0
    degenerate_run = 0
    bland = False
    while True:
        s = -1
        if bland:
            best_label = None
            for j, v in enumerate(obj):
                if v < 0 and (best_label is None or nonbasic[j] < best_label):
                    s, best_label = j, nonbasic[j]
        else:
            best = zero
            for j, v in enumerate(obj):
                if v < best or (v == best and v < 0 and nonbasic[j] < nonbasic[s]):
                    s, best = j, v
        if s < 0:
            break
        r = -1
        ratio = None
        for i in range(m):
            a = T[i][s]
            if a > 0:
                q = rhs[i] / a
                if ratio is None or q < ratio or (q == ratio and basic[i] < basic[r]):
                    r, ratio = i, q
        if r < 0:
            raise LpUnbounded("packing LP is unbounded")
        if ratio == 0:
            degenerate_run += 1
            if degenerate_run > _DEGENERATE_SWITCH:
                bland = True
        else:
            degenerate_run = 0
        _pivot(T, rhs, obj, r, s)
        basic[r], nonbasic[s] = nonbasic[s], basic[r]
        pivots += 1
        if pivots > _MAX_PIVOTS:
            raise LpFailure("pivot limit exceeded")

    y = [mpq(0)] * n
    for i, lab in enumerate(basic):
        if lab < n:
            y[lab] = rhs[i]
    x = [mpq(0)] * m
    for j, lab in enumerate(nonbasic):
        if lab >= n:
            x[lab - n] = obj[j]
    cq = [_q(v) for v in c]
    bq = [_q(v) for v in b]
    primal = sum((cq[j] * y[j] for j in range(n)), mpq(0))
    dual = sum((bq[i] * x[i] for i in range(m)), mpq(0))
    if verify:
        _certify(A, bq, cq, y, x, primal, dual)
    return PackingSolution(_f(primal), [_f(v) for v in y], [_f(v) for v in x], pivots)


def _pivot(T, rhs, obj, r, s):
    prow = T[r]
    p = prow[s]
    inv = 1 / p
    prow = [v * inv for v in prow]
    prow[s] = inv
    T[r] = prow
    rhs[r] = rhs[r] * inv
    pr = rhs[r]
    for i, row in enumerate(T):
        if i == r:
            continue
        f = row[s]
        if f == 0:
            continue
        new = [a - f * bb for a, bb in zip(row, prow)]
        new[s] = -f * inv
        T[i] = new
        rhs[i] -= f * pr
    f = obj[s]
    if f != 0:
        new = [a - f * bb for a, bb in zip(obj, prow)]
        new[s] = -f * inv
        obj[:] = new


def _certify(A, b, c, y, x, primal, dual):
    m, n = len(A), len(c)
    if any(v < 0 for v in y) or any(v < 0 for v in x):
        raise LpFailure("negative variable in simplex output")
    for i in range(m):
        lhs = sum((_q(A[i][j]) * y[j] for j in range(n) if A[i][j]), mpq(0))
        if lhs > b[i]:
            raise LpFailure(f"packing row {i} violated")
    for j in range(n):
        lhs = sum((_q(A[i][j]) * x[i] for i in range(m) if A[i][j]), mpq(0))
        if lhs < c[j]:
            raise LpFailure(f"covering column {j} violated")
    if primal != dual:
        raise LpFailure("strong duality gap in simplex output")


def solve_packing_float(A, b, c, tol: float = 1e-7) -> PackingSolution:
    """Floating-point fallback via HiGHS; ``exact`` is False on the result."""
    import numpy as np
    from scipy.optimize import linprog

    A = np.asarray(A, dtype=float)
    b = np.asarray([float(v) for v in b])
    c = np.asarray([float(v) for v in c])
    # covering side: minimize b.x s.t. A^T x >= c
    res = linprog(b, A_ub=-A.T, b_ub=-c, bounds=(0, None), method="highs")
    if res.status == 2:
        raise LpUnbounded("covering LP infeasible")
    if res.status != 0:
        raise LpFailure(f"HiGHS failed: {res.message}")
    x = [0.0 if abs(v) < tol else float(v) for v in res.x]
    y = [-float(v) for v in res.ineqlin.marginals]
    return PackingSolution(Fraction(res.fun), [Fraction(v) for v in y], [Fraction(v) for v in x],
                           int(getattr(res, "nit", 0)), exact=False)
