from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from hauscover.coarea import (davids_ratio_probe, dyadic_bruteforce, dyadic_grid,
                              eilenberg_chain, fiber, lemma16_check, lower_density_profile,
                              mapping_content_dyadic, phi_content, phi_dp_oracle,
                              phi_zero_scale_check, refine_cover, theorem30_report, tilde_content,
                              TooDeep)
from hauscover.content import hausdorff_content
from hauscover.gauge import Exponent, zeta_q
from hauscover.metricspace import (FiniteMetricSpace, LipschitzMapping, PointSubset, generate, grid,
                                   projection)

from _instances import grid_map

LOG = "log(2)/log(3)"


def constant_map(X, eps=0):
    one = FiniteMetricSpace.from_matrix([0], [[0]], eps)
    return LipschitzMapping(X, one, (0,) * X.n)


def identity(X):
    return LipschitzMapping(X, X, tuple(range(X.n)))


def square_projection(level=2):
    X, Y = dyadic_grid(level, 2), dyadic_grid(level, 1)
    side = 1 << level
    return LipschitzMapping(X, Y, tuple(i // side for i in range(X.n)))


def test_phi_examples():
    X = grid(5, 1, eps=Fraction(1, 2))
    assert phi_content(constant_map(X), None, 1, 1).value == 0
    f = identity(X)
    v, _ = phi_dp_oracle(f, None, 1, 1)
    assert phi_content(f, None, 1, 1).value == v


@given(st.integers(0, 10 ** 6))
def test_phi_engines_agree(seed):
    # joint-clique branch and bound against the partition DP
    f, rng = grid_map(seed, max_domain=14, lipschitz_shape=seed % 2 == 0)
    d = None if rng.random() < 0.3 else f.domain.diam((1 << min(3, f.domain.n)) - 1)
    exact, _ = phi_dp_oracle(f, None, 1, "0.5", d, cap=15)
    assert phi_content(f, None, 1, "0.5", d).value == exact


@given(st.integers(0, 10 ** 6))
def test_phi_subadditive_and_monotone(seed):
    f, rng = grid_map(seed, max_domain=10)
    n = f.domain.n
    E = int(rng.integers(1, 1 << n))
    F = int(rng.integers(1, 1 << n))
    v = lambda M, d=None: phi_content(f, M, 1, 1, d).value
    assert v(E | F) <= v(E) + v(F)
    assert v(E, f.domain.diam(0b11)) >= v(E)


def test_tilde_examples():
    X = grid(4, 1, eps=Fraction(1, 4))
    epsY = Fraction(1, 3)
    f = constant_map(X, epsY)
    s = Exponent.parse(1)
    t = Exponent.parse("0.5")
    r = tilde_content(f, None, s, t)
    zt = hausdorff_content(X, None, t).value
    assert r.value == zeta_q(s, epsY) * zt
    g = identity(X)
    assert tilde_content(g, None, 0, 1).value == hausdorff_content(X, None, 1).value


@given(st.integers(0, 10 ** 6))
def test_tilde_below_phi_and_refinement_equality(seed):
    f, _ = grid_map(seed, max_domain=9, lipschitz_shape=seed % 2 == 1)
    T = tilde_content(f, None, 1, 1)
    P = phi_content(f, None, 1, 1)
    assert T.value <= P.value
    rep = refine_cover(f, None, 1, 1)
    assert rep.holds and rep.bound == T.value
    assert P.value <= rep.phi_cost <= rep.bound
    assert T.value == P.value


def test_refine_identity_costs_equal():
    X = grid(4, 1, eps=Fraction(1, 4))
    f = identity(X)
    cover = [(0, 1), (2, 3)]
    inner = [[(0,), (1,)], [(2,), (3,)]]
    rep = refine_cover(f, None, 1, 1, None, cover, inner)
    assert rep.holds
    rep2 = refine_cover(f, None, 1, 1, None, cover, [[(0,), (1,), (3,)], [(2,), (3,)]])
    assert rep2.refined == rep.refined and rep2.phi_cost == rep.phi_cost


def test_fiber_examples():
    X = grid(3, 2)
    f = LipschitzMapping(X, grid(3, 1), tuple(i // 3 for i in range(9)))
    assert [fiber(f, y).indices() for y in range(3)] == [(0, 1, 2), (3, 4, 5), (6, 7, 8)]
    c = constant_map(X)
    assert fiber(c, 0).indices() == tuple(range(9))
    g = identity(grid(3, 1))
    assert [fiber(g, y).indices() for y in range(3)] == [(0,), (1,), (2,)]


@given(st.integers(0, 10 ** 6))
def test_fibers_partition(seed):
    f, _ = grid_map(seed)
    masks = [fiber(f, y).mask for y in range(f.codomain.n)]
    assert sum(bin(m).count("1") for m in masks) == f.domain.n
    assert all(a & b == 0 for i, a in enumerate(masks) for b in masks[i + 1:])


def test_gauge_domination_examples():
    X = grid(5, 1, spacing=Fraction(1, 4), eps=Fraction(1, 4))
    assert lemma16_check(identity(X), None, 1, 1)["ok"]
    assert lemma16_check(constant_map(X), None, 1, "0.5")["phi"] == 0
    half = grid(5, 1, spacing=Fraction(1, 8), eps=Fraction(1, 8))
    rep = lemma16_check(LipschitzMapping(X, half, tuple(range(5))), None, 1, 1)
    assert rep["ok"] and rep["effective_lip"] == Fraction(1, 2)


@given(st.integers(0, 10 ** 6))
def test_gauge_domination_random(seed):
    f, rng = grid_map(seed)
    s, t = ["0.5", "1", LOG][seed % 3], ["1", "0.5", LOG][(seed // 3) % 3]
    assert lemma16_check(f, None, s, t)["ok"]


def test_fiber_chain_examples():
    X = grid(4, 1, eps=Fraction(1, 4))
    rep = eilenberg_chain(constant_map(X), None, 2, 1)
    assert rep["ok"] and rep["fibers"][0].fiber == (0, 1, 2, 3)
    G = generate("grid:4:1:spacing=1/4:eps=1/4*grid:4:1:spacing=1/4:eps=1/4")
    rep = eilenberg_chain(projection(G, 1), None, 2, 1)
    assert rep["ok"] and len(rep["fibers"]) == 4 and all(fr.dominated for fr in rep["fibers"])


@given(st.integers(0, 10 ** 6))
def test_fiber_chain_random(seed):
    f, rng = grid_map(seed, max_domain=9, lipschitz_shape=False)
    d = f.domain.diam((1 << min(3, f.domain.n)) - 1) if rng.random() < 0.5 else None
    rep = eilenberg_chain(f, None, "1.5", "0.5", d)
    assert rep["ok"] and rep["fiber_partition"]


def test_density_examples():
    X = grid(9, 1, spacing=Fraction(1, 8), eps=Fraction(1, 8))
    p = lower_density_profile(constant_map(X), None, 4, [Fraction(1, 4), Fraction(1, 2)], 1)
    assert p.ratios == [0.0, 0.0]
    p = lower_density_profile(identity(X), None, 4, [Fraction(1, 2)], 1)
    assert abs(p.ratios[0] - 1) <= 2 * (1 / 8) / (1 / 2) + 1e-12
    assert p.holds


@given(st.integers(0, 10 ** 6))
def test_density_bound(seed):
    f, rng = grid_map(seed)
    x = int(rng.integers(0, f.domain.n))
    p = lower_density_profile(f, None, x, None, 1)
    assert p.holds


def test_dyadic_examples():
    f = square_projection(2)
    cell = PointSubset.from_indices([5], 16).mask
    r = mapping_content_dyadic(f, cell, 1, 1)
    X, Y = f.domain, f.codomain
    assert r.value == hausdorff_content(Y, 1 << f(5), 1).value * zeta_q(Exponent.parse(1), X.diam(cell))
    assert mapping_content_dyadic(f, None, 1, 1).value == dyadic_bruteforce(f, None, 1, 1)
    with pytest.raises(TooDeep):
        dyadic_grid(6, 2)


@given(st.integers(0, 10 ** 6))
def test_dyadic_vs_bruteforce_random(seed):
    import numpy as np
    rng = np.random.default_rng(seed)
    X, Y = dyadic_grid(2, 2), dyadic_grid(2, 1)
    f = LipschitzMapping(X, Y, tuple(int(v) for v in rng.integers(0, 4, size=16)))
    E = int(rng.integers(1, 1 << 16))
    assert mapping_content_dyadic(f, E, 1, 1).value == dyadic_bruteforce(f, E, 1, 1)


def test_ratio_probe_examples():
    X = dyadic_grid(1, 2)
    Y = dyadic_grid(1, 2)
    iso = LipschitzMapping(X, Y, tuple(range(4)))
    res = davids_ratio_probe([(iso, None, 1, 1)])
    assert res["rows"][0]["ratio"] == 1
    pt = constant_map(X)
    res = davids_ratio_probe([(pt, None, 1, 1)])
    assert res["rows"][0]["zero_case"] and res["rows"][0]["zero_case_ok"]
    assert res["ok"]


def test_density_report_runs():
    P = generate("cantor:3*grid:8:1:spacing=1/8:eps=1/8")
    rep = theorem30_report(projection(P, 1), None, "1+log(2)/log(3)", 1)
    assert rep["lhs"] > 0 and rep["rhs"] > 0 and rep["ratio"] is not None
    assert 0 < rep["ahlfors"].C_A <= rep["ahlfors"].C_B
    X = grid(6, 1, spacing=Fraction(1, 6), eps=Fraction(1, 6))
    rep = theorem30_report(constant_map(X), None, 1, "0.5")
    assert rep["lhs"] == 0 and rep["rhs"] >= 0
    rep = theorem30_report(identity(X), None, 1, 1)
    assert rep["kind"] == "estimate"


def test_zero_scale_examples():
    X = grid(5, 1)
    assert phi_zero_scale_check(constant_map(X), None, 1, 1)["zero_at_all"]
    Xc = grid(5, 1, eps=Fraction(1, 5))
    rep = phi_zero_scale_check(identity(Xc), None, 1, 1)
    assert rep["holds"] and not rep["zero_at_inf"]
    Y = grid(4, 1)
    rep = phi_zero_scale_check(LipschitzMapping(X, Y, (0, 0, 1, 2, 3)), None, 1, 1)
    assert rep["holds"]
