from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from hauscover.lp import LpUnbounded, solve_packing, solve_packing_float


def test_triangle_pairs():
    A = [[1, 1, 0], [0, 1, 1], [1, 0, 1]]
    sol = solve_packing(A, [1, 1, 1], [1, 1, 1])
    assert sol.value == Fraction(3, 2)
    assert sol.y == [Fraction(1, 2)] * 3 and sol.x == [Fraction(1, 2)] * 3


def test_unbounded_column():
    with pytest.raises(LpUnbounded):
        solve_packing([[1, 0]], [1], [1, 1])


@given(st.integers(0, 10 ** 6))
def test_matches_highs(seed):
    rng = np.random.default_rng(seed)
    m, n = int(rng.integers(1, 9)), int(rng.integers(1, 7))
    A = (rng.random((m, n)) < 0.5).astype(int)
    A[rng.integers(0, m), :] = 1  # keep the packing bounded
    b = [Fraction(int(v), int(d)) for v, d in zip(rng.integers(0, 20, m), rng.integers(1, 6, m))]
    c = [Fraction(int(v), 3) for v in rng.integers(-3, 7, n)]
    sol = solve_packing(A.tolist(), b, c)
    ref = linprog([-float(v) for v in c], A_ub=A, b_ub=[float(v) for v in b], method="highs")
    assert float(sol.value) == pytest.approx(-ref.fun, rel=1e-9, abs=1e-9)
    # exact certificate: primal and dual feasible with equal objectives
    assert all(v >= 0 for v in sol.y) and all(v >= 0 for v in sol.x)
    for i in range(m):
        assert sum(A[i][j] * sol.y[j] for j in range(n)) <= b[i]
    for j in range(n):
        assert sum(A[i][j] * sol.x[i] for i in range(m)) >= c[j]
    assert sum(ci * yi for ci, yi in zip(c, sol.y)) == sol.value == sum(bi * xi for bi, xi in zip(b, sol.x))


def test_float_fallback_flags_approximate():
    sol = solve_packing_float([[1, 1, 0], [0, 1, 1], [1, 0, 1]], [1, 1, 1], [1, 1, 1])
    assert not sol.exact
    assert float(sol.value) == pytest.approx(1.5)
