from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from hauscover.metricspace import (FiniteMetricSpace, LipschitzMapping, NonSymmetric, NegativeDistance,
                                   PointSubset, SizeLimit, TriangleViolation, cantor, closed_ball,
                                   diam, doubling_probe, generate, grid, lipschitz_constant,
                                   projection, random_points, sierpinski_carpet, validate)


def line(*xs, eps=0):
    return FiniteMetricSpace.from_coordinates([(Fraction(x),) for x in xs], eps=eps)


def test_validate_examples():
    assert validate(FiniteMetricSpace.from_matrix([0, 1], [[0, 1], [1, 0]])).ok
    bad = FiniteMetricSpace([0, 1, 2], ((0, 1, 5), (1, 0, 1), (5, 1, 0)))
    rep = validate(bad)
    assert not rep.ok and isinstance(rep.violation, TriangleViolation)
    assert sorted(rep.violation.indices) == [0, 1, 2]
    with pytest.raises(TriangleViolation):
        rep.raise_for_violation()
    assert validate(line(0, Fraction(2, 9), Fraction(2, 3), Fraction(8, 9))).ok


def test_validate_other_axioms():
    with pytest.raises(NonSymmetric):
        FiniteMetricSpace.from_matrix([0, 1], [[0, 1], [2, 0]])
    with pytest.raises(NegativeDistance):
        FiniteMetricSpace.from_matrix([0, 1], [[0, -1], [-1, 0]])


def test_closed_ball_examples():
    L = line(0, 1, 2)
    assert closed_ball(L, 1, 0).indices() == (1,)
    assert closed_ball(L, 1, 1).indices() == (0, 1, 2)
    assert closed_ball(L, 0, Fraction(3, 2)).indices() == (0, 1)


def test_diam_examples():
    C1 = cantor(1)
    assert diam(C1, PointSubset.empty(2)) == 0
    assert diam(C1, [0]) == Fraction(1, 3)
    assert diam(C1, [0, 1]) == 1
    assert diam(line(0, 5), [1]) == 0


def test_generators():
    C1 = cantor(1)
    assert [c[0] for c in C1.coords] == [0, Fraction(2, 3)] and C1.eps == Fraction(1, 3)
    C0 = cantor(0)
    assert C0.n == 1 and C0.eps == 1
    G = grid(2, 1)
    assert [c[0] for c in G.coords] == [0, 1] and G.eps == 0
    S = sierpinski_carpet(1)
    assert S.n == 8 and abs(float(S.eps) - 2 ** 0.5 / 3) < 1e-15
    with pytest.raises(SizeLimit):
        cantor(13)
    assert generate("random:5:2:seed=3").dist == random_points(5, 2, 3).dist


@pytest.mark.parametrize("k", range(0, 6))
def test_cantor_distances_triadic(k):
    C = cantor(k)
    assert C.n == 2 ** k
    for row in C.dist:
        for v in row:
            assert (v * 3 ** k).denominator == 1


def test_product_sup_metric_and_projection():
    P = generate("cantor:1*grid:3")
    assert P.n == 6
    assert P.dist[0][5] == max(Fraction(2, 3), Fraction(2))
    f = projection(P, 1)
    assert f.lip == 1
    assert [f(i) for i in range(6)] == [0, 1, 2, 0, 1, 2]


def test_lipschitz_examples():
    G = grid(3, 1)
    assert lipschitz_constant(G, G, (0, 1, 2)) == 1
    assert lipschitz_constant(G, G, (1, 1, 1)) == 0
    half = line(0, Fraction(1, 2), 1)
    assert LipschitzMapping(G, half, (0, 1, 2)).lip == Fraction(1, 2)


@given(st.integers(0, 10 ** 6))
def test_lipschitz_feasible_and_tight(seed):
    import numpy as np
    rng = np.random.default_rng(seed)
    X = random_points(6, 2, seed, denominator=20)
    Y = random_points(4, 1, seed + 1, denominator=20)
    salt = rng.integers(0, 4, size=4)
    f = LipschitzMapping(X, Y, tuple(int(salt[int(c[0] * 3)]) for c in X.coords))
    ratios = [Y.dist[f(i)][f(j)] / X.dist[i][j] for i in range(6) for j in range(i + 1, 6) if X.dist[i][j]]
    assert all(r <= f.lip for r in ratios)
    assert f.lip == max(ratios, default=0)


@given(st.integers(0, 10 ** 6), st.integers(0, 2 ** 12 - 1), st.integers(0, 2 ** 12 - 1))
def test_diam_monotone(seed, m1, m2):
    X = random_points(12, 2, seed, eps=Fraction(1, 7))
    A, B = m1 & m2, m1
    assert X.diam(A) <= X.diam(B)


@given(st.integers(0, 10 ** 6), st.integers(0, 9), st.fractions(0, 2), st.fractions(1, 4))
def test_ball_monotone(seed, c, r, sigma):
    X = random_points(10, 2, seed)
    small, big = X.ball_mask(c, r), X.ball_mask(c, sigma * r)
    assert small & ~big == 0
    assert X.ball_mask(c, 0) & (1 << c)


def test_euclidean_closure_keeps_triangle_exact():
    X = random_points(40, 2, 11, denominator=997)
    D = X.dist
    n = X.n
    assert all(D[i][k] <= D[i][j] + D[j][k] for i in range(n) for j in range(n) for k in range(n))


def test_json_roundtrip():
    X = generate("cantor:2")
    Y = FiniteMetricSpace.from_json(X.to_json())
    assert Y.dist == X.dist and Y.eps == X.eps


def test_doubling_probe_examples():
    assert doubling_probe(grid(1, 1)) == 1
    assert doubling_probe(grid(4, 1), radii=[3]) >= 2
    assert doubling_probe(cantor(3)) <= 4
