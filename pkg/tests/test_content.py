from fractions import Fraction
from itertools import combinations

import pytest
from hypothesis import given, strategies as st

from hauscover.content import (TooLarge, Unbounded, Uncoverable, certified_bounds,
                               enumerate_candidates, fractional_cover, hausdorff_content,
                               make_instance, min_cover, partition_dp_oracle, weighted_content,
                               weighted_integral_step)
from hauscover.gauge import Exponent, power_q, zeta_q
from hauscover.metricspace import FiniteMetricSpace, PointSubset, cantor, grid, random_points

from _instances import cell_space, random_delta

LOG = "log(2)/log(3)"


def tri():
    return FiniteMetricSpace.from_matrix([0, 1, 2], [[0, 1, 1], [1, 0, 1], [1, 1, 0]])


def keys(fam):
    return sorted(c.key for c in fam)


def unit(d, m):
    return Fraction(1)


def pairs_instance():
    return make_instance(tri(), None, 1, gauge=unit, family=[(0, 1), (1, 2), (0, 2)])


def test_enumerate_examples():
    two = grid(2, 1)
    assert keys(enumerate_candidates(two, None, 1)) == [(0,), (0, 1), (1,)]
    assert keys(enumerate_candidates(two, None, Fraction(1, 2))) == [(0,), (1,)]
    assert keys(enumerate_candidates(tri(), None, 1)) == [(0,), (0, 1, 2), (1,), (2,)]


def test_enumerate_rejects_scale_below_resolution():
    with pytest.raises(Uncoverable):
        enumerate_candidates(cantor(2), None, Fraction(1, 10))


def test_min_cover_examples():
    r = hausdorff_content(random_points(6, 2, 1), None, 1)
    assert r.value == 0
    line = grid(3, 1, eps=1)
    r = hausdorff_content(line, None, 1)
    assert r.value == 3 and r.mode == "exact"
    cover = 0
    for A in r.witness:
        cover |= PointSubset.from_indices(A, 3).mask
    assert cover == 0b111
    r = min_cover(pairs_instance())
    assert r.value == 2 and len(r.witness) == 2


def test_fractional_examples():
    r = fractional_cover(pairs_instance())
    assert r.value == Fraction(3, 2)
    assert sorted(w for w, _ in r.witness) == [Fraction(1, 2)] * 3
    assert r.dual == {0: Fraction(1, 2), 1: Fraction(1, 2), 2: Fraction(1, 2)}
    one = FiniteMetricSpace.from_matrix([0], [[0]], eps=1)
    assert weighted_content(one, None, 1).value == 1 == hausdorff_content(one, None, 1).value


def test_hausdorff_examples():
    assert hausdorff_content(cantor(2), PointSubset.empty(4), 1).value == 0
    X = random_points(7, 2, 5)
    assert hausdorff_content(X, None, 0, None).value == 1


def test_partition_dp_examples_and_cap():
    C = cantor(1)
    s = Exponent.parse(LOG)
    assert partition_dp_oracle(C, [0], s) == zeta_q(s, Fraction(1, 3))
    far = grid(4, 1, spacing=10, eps=1)
    assert partition_dp_oracle(far, None, 1, 2) == 4 * zeta_q(Exponent.parse(1), 1)
    with pytest.raises(TooLarge):
        partition_dp_oracle(grid(16, 1, eps=1), None, 1)


@pytest.mark.parametrize("k", range(1, 7))
def test_cantor_ladder(k):
    s = Exponent.parse(LOG)
    r = hausdorff_content(cantor(k), None, s)
    assert r.value == zeta_q(s, 1)
    assert r.lower == zeta_q(s, 1)


def _all_subsets_family(X, delta):
    fam = []
    for m in range(1, 1 << X.n):
        if delta is None or X.diam(m) <= delta:
            fam.append(m)
    return fam


@given(st.integers(0, 10 ** 6))
def test_clique_reduction_matches_all_subsets(seed):
    X, rng = cell_space(seed, max_points=6)
    s = Exponent.parse(["0.5", "1", LOG][seed % 3])
    d = random_delta(rng, X)
    auto = hausdorff_content(X, None, s, d)
    full = min_cover(make_instance(X, None, d, s, family=_all_subsets_family(X, d)))
    assert auto.value == full.value
    lp_auto = weighted_content(X, None, s, d).value
    lp_full = fractional_cover(make_instance(X, None, d, s, family=_all_subsets_family(X, d))).value
    assert lp_auto == lp_full


@given(st.integers(0, 10 ** 6))
def test_oracle_equivalence(seed):
    X, rng = cell_space(seed, max_points=9)
    s = ["0.5", "1", LOG][seed % 3]
    d = random_delta(rng, X)
    assert hausdorff_content(X, None, s, d).value == partition_dp_oracle(X, None, s, d)


@given(st.integers(0, 10 ** 6))
def test_duality_and_ordering(seed):
    X, rng = cell_space(seed, max_points=9)
    s = ["0.5", "1", LOG][seed % 3]
    d = random_delta(rng, X)
    inst = make_instance(X, None, d, s)
    lp = fractional_cover(inst)
    ip = min_cover(inst)
    assert lp.value <= ip.value
    assert lp.meta["strong_duality"]
    assert sum(lp.dual.values()) == lp.value
    for c in inst.family:
        assert sum(lp.dual[x] for x in c.key) <= c.cost
    cov = {x: Fraction(0) for x in range(X.n)}
    for w, A in lp.witness:
        for x in A:
            cov[x] += w
    assert all(v >= 1 for v in cov.values())


@given(st.integers(0, 10 ** 6))
def test_monotone_in_delta(seed):
    X, rng = cell_space(seed, max_points=8)
    d1, d2 = random_delta(rng, X), random_delta(rng, X)
    if d1 is None or (d2 is not None and d2 < d1):
        d1, d2 = d2, d1
    if d1 is None:
        return
    assert hausdorff_content(X, None, 1, d1).value >= hausdorff_content(X, None, 1, d2).value
    assert weighted_content(X, None, 1, d1).value >= weighted_content(X, None, 1, d2).value


@given(st.integers(0, 10 ** 6))
def test_subadditive(seed):
    X, rng = cell_space(seed, max_points=10, min_points=2)
    d = random_delta(rng, X)
    E = int(rng.integers(1, 1 << X.n))
    F = int(rng.integers(1, 1 << X.n))
    both = hausdorff_content(X, E | F, 1, d).value
    assert both <= hausdorff_content(X, E, 1, d).value + hausdorff_content(X, F, 1, d).value


def test_greedy_mode_beyond_cap():
    X = random_points(14, 2, 3, eps=Fraction(1, 20))
    r = hausdorff_content(X, None, 1, Fraction(1, 3), exact_cap=4)
    exact = hausdorff_content(X, None, 1, Fraction(1, 3))
    assert r.mode in ("greedy-upper", "exact")
    assert r.lower <= exact.value <= r.value


def test_weighted_integral():
    C = cantor(2)
    s = Exponent.parse(LOG)
    chi = weighted_integral_step(C, [1, 1, 0, 1], s)
    assert chi.value == weighted_content(C, [0, 1, 3], s).value
    two = weighted_integral_step(C, [2, 2, 0, 2], s)
    assert two.value == 2 * chi.value
    with pytest.raises(Unbounded):
        weighted_integral_step(C, [1, float("inf"), 0, 0], s)


def _solve_exact(M, rhs):
    n = len(M)
    A = [list(map(Fraction, row)) + [Fraction(r)] for row, r in zip(M, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            return None
        A[col], A[piv] = A[piv], A[col]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col] / A[col][col]
                A[r] = [a - f * b for a, b in zip(A[r], A[col])]
    return [A[i][n] / A[i][i] for i in range(n)]


def test_weighted_integral_two_levels_vertex_enumeration():
    C = cantor(2)
    s = Exponent.parse(LOG)
    f = [Fraction(2), Fraction(1, 2), Fraction(1), Fraction(3, 2)]
    inst = make_instance(C, None, None, s)
    fam = inst.family
    assert len(fam) <= 10
    # dual packing: max f.y s.t. sum_{x in A} y_x <= cost(A), y >= 0; enumerate its vertices
    rows = [[1 if x in c.key else 0 for x in range(4)] for c in fam] + \
           [[-1 if x == k else 0 for x in range(4)] for k in range(4)]
    rhs = [c.cost for c in fam] + [0] * 4
    best = None
    for idx in combinations(range(len(rows)), 4):
        y = _solve_exact([rows[i] for i in idx], [rhs[i] for i in idx])
        if y is None:
            continue
        if all(sum(r[j] * y[j] for j in range(4)) <= b for r, b in zip(rows, rhs)):
            v = sum(fi * yi for fi, yi in zip(f, y))
            best = v if best is None or v > best else best
    assert weighted_integral_step(C, f, s).value == best


def test_certified_bounds_examples():
    one = FiniteMetricSpace.from_matrix([0], [[0]], eps=1)
    ch = certified_bounds(one, None, 1, 1)
    assert ch.ok and ch.lower == ch.weighted == ch.upper
    T = tri()
    ch = certified_bounds(T.with_resolution(Fraction(1, 10)), None, 1, 2,
                          family=[(0, 1), (1, 2), (0, 2)])
    assert ch.ok
    assert ch.rounded_cost <= 8 * power_q(6, Exponent.parse(1)) * ch.weighted
    assert ch.checks["rounded_covers_E"]


@given(st.integers(0, 10 ** 6))
def test_certified_bounds_random(seed):
    X, rng = cell_space(seed, max_points=10)
    s = ["0.5", "1", LOG][seed % 3]
    ch = certified_bounds(X, None, s, random_delta(rng, X), strict=True)
    assert ch.checks["upper6<=rounded"] is True
