"""Covering selection: Saturn clusters, weighted-cover ball selection, block selection."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .lp import LpFailure, solve_packing
from .metricspace import FiniteMetricSpace, PointSubset, iter_bits, popcount, to_fraction

__all__ = [
    "InfeasibleCover",
    "EmptyFamily",
    "CandidateBall",
    "WeightedCover",
    "SelectionResult",
    "SaturnCluster",
    "saturn_select",
    "nazarov_select",
    "block_select",
    "EXACT_SELECTION_CAP",
]

EXACT_SELECTION_CAP = 200
FLOAT_TOL = 1e-7


class InfeasibleCover(ValueError):
    """The weights do not cover the target."""


class EmptyFamily(ValueError):
    pass


@dataclass(frozen=True)
class CandidateBall:
    center: int
    radius: Fraction
    mask: int
    diameter: Fraction

    @classmethod
    def make(cls, space: FiniteMetricSpace, center: int, radius) -> "CandidateBall":
        r = to_fraction(radius)
        m = space.ball_mask(center, r)
        return cls(center, r, m, space.diam(m))

    def dilate(self, space: FiniteMetricSpace, sigma=3) -> "CandidateBall":
        return CandidateBall.make(space, self.center, to_fraction(sigma) * self.radius)


@dataclass
class WeightedCover:
    """Weights a_i on balls B_i with sum a_i chi_{B_i} >= 1 on the target."""

    space: FiniteMetricSpace
    target: int
    balls: list
    a: list

    @classmethod
    def from_balls(cls, space: FiniteMetricSpace, target, balls: Sequence, a: Sequence) -> "WeightedCover":
        if isinstance(target, PointSubset):
            target = target.mask
        elif not isinstance(target, int):
            target = PointSubset.from_indices(target, space.n).mask
        bl = [x if isinstance(x, CandidateBall) else CandidateBall.make(space, x[0], x[1]) for x in balls]
        return cls(space, target, bl, [to_fraction(v) for v in a])

    def coverage(self, x: int) -> Fraction:
        return sum((w for w, B in zip(self.a, self.balls) if B.mask >> x & 1), Fraction(0))

    def check(self) -> None:
        if len(self.a) != len(self.balls):
            raise ValueError("one weight per ball is required")
        if any(w < 0 for w in self.a):
            raise ValueError("weights must be nonnegative")
        for x in iter_bits(self.target):
            if self.coverage(x) < 1:
                raise InfeasibleCover(f"point {x} has coverage {self.coverage(x)} < 1")

    def total(self, b: Sequence[Fraction]) -> Fraction:
        return sum((w * v for w, v in zip(self.a, b)), Fraction(0))


@dataclass
class SelectionResult:
    selected: list
    dilation: int
    bound: Fraction
    achieved: Fraction
    approximate: bool = False
    levels: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    certificates: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "selected": self.selected,
            "dilation": self.dilation,
            "bound": self.bound,
            "achieved": self.achieved,
            "approximate": self.approximate,
            "levels": self.levels,
            "blocks": self.blocks,
            "certificates": self.certificates,
        }


# ------------------------------------------------------------------ Saturn

@dataclass
class SaturnCluster:
    representative: int
    attached: list
    union_mask: int
    diameter: Fraction
    rep_diameter: Fraction


def _dyadic_class(d: Fraction, R: Fraction) -> int:
    # smallest j >= 1 with R / 2^j < d
    j = 1
    while R / (1 << j) >= d:
        j += 1
    return j


def saturn_select(space: FiniteMetricSpace, family: Sequence) -> tuple[list, list]:
    """Pairwise disjoint subfamily whose clusters absorb every input set.

    Sets are processed by dyadic diameter class, largest first, and within a
    class in input order; a set meeting an already selected set F' is attached
    to the first such F' (then diam F <= 2 diam F').  Zero-diameter sets come
    last.  Returns ``(selected indices, clusters)``.
    """
    if not family:
        raise EmptyFamily("saturn_select needs at least one set")
    masks = []
    for F in family:
        m = F if isinstance(F, int) else getattr(F, "mask", None)
        if m is None:
            m = PointSubset.from_indices(F, space.n).mask
        if m == 0:
            raise ValueError("sets must be nonempty")
        masks.append(m)
    diams = [space.diam(m) for m in masks]
    R = max(diams)
    order = [i for i in range(len(masks)) if diams[i] > 0]
    order.sort(key=lambda i: (_dyadic_class(diams[i], R), i))
    order += [i for i in range(len(masks)) if diams[i] == 0]
    selected: list = []
    attached: dict = {}
    for i in order:
        host = next((j for j in selected if masks[j] & masks[i]), None)
        if host is None:
            selected.append(i)
            attached[i] = []
        else:
            assert diams[i] <= 2 * diams[host]
            attached[host].append(i)
    clusters = []
    for j in selected:
        u = masks[j]
        for i in attached[j]:
            u |= masks[i]
        cl = SaturnCluster(j, attached[j], u, space.diam(u), diams[j])
        assert cl.diameter <= 5 * cl.rep_diameter or cl.rep_diameter == 0 and not cl.attached
        clusters.append(cl)
    for x, y in ((a, b) for k, a in enumerate(selected) for b in selected[k + 1:]):
        assert masks[x] & masks[y] == 0
    return selected, clusters


# ----------------------------------------------------- weighted selection

def _box_lp(balls: list, idx: list, E: int, b: list, exact: bool) -> tuple[dict, Fraction]:
    """min sum alpha_i b_i over 0 <= alpha <= 1 covering E, via its packing dual.

    Dual: max sum_x y_x - sum_i z_i  s.t.  sum_{x in B_i} y_x - z_i <= b_i.
    """
    pts = list(iter_bits(E))
    N = len(idx)
    if exact:
        A = []
        for r, i in enumerate(idx):
            row = [1 if balls[i].mask >> p & 1 else 0 for p in pts]
            row += [-1 if k == r else 0 for k in range(N)]
            A.append(row)
        c = [1] * len(pts) + [-1] * N
        sol = solve_packing(A, [b[i] for i in idx], c)
        return {i: sol.x[r] for r, i in enumerate(idx)}, sol.value
    from scipy.optimize import linprog

    M = np.array([[1.0 if balls[i].mask >> p & 1 else 0.0 for i in idx] for p in pts])
    res = linprog([float(b[i]) for i in idx], A_ub=-M, b_ub=-np.ones(len(pts)),
                  bounds=[(0, 1)] * N, method="highs")
    if res.status != 0:
        raise LpFailure(f"float LP failed: {res.message}")
    alpha = {}
    for r, i in enumerate(idx):
        v = float(res.x[r])
        alpha[i] = Fraction(0) if v <= FLOAT_TOL else Fraction(v).limit_denominator(10**9)
    return alpha, Fraction(res.fun).limit_denominator(10**12)


def nazarov_select(cover: WeightedCover, b: Sequence, *, exchange_check: bool = True,
                   exact: Optional[bool] = None) -> SelectionResult:
    """Select pairwise disjoint balls whose 3-dilates cover E with sum b <= 2 sum a_i b_i.

    Each level solves the boxed LP, drops every zero-weight ball, selects the
    largest-diameter remaining ball (lowest index on ties), removes its
    3-dilate from E and discards the balls meeting it.  The level optima psi_k
    satisfy sum_{j >= k} b_{i_j} <= 2 psi_k, which is checked exactly.
    """
    cover.check()
    b = [to_fraction(v) for v in b]
    if len(b) != len(cover.balls):
        raise ValueError("one b value per ball is required")
    if any(v < 0 for v in b):
        raise ValueError("b must be nonnegative")
    space, balls = cover.space, cover.balls
    N = len(balls)
    if exact is None:
        exact = N <= EXACT_SELECTION_CAP and popcount(cover.target) <= EXACT_SELECTION_CAP
    total = cover.total(b)
    E = cover.target
    active = list(range(N))
    selected: list = []
    levels: list = []
    exchange_ok = True
    while E:
        active = [i for i in active if balls[i].mask & E]
        if not active:
            raise LpFailure("remaining points lost their covering balls")
        alpha, psi = _box_lp(balls, active, E, b, exact)
        active = [i for i in active if alpha[i] > 0]
        if exact and exchange_check:
            for i1 in active:
                near = sum((alpha[i] * b[i] for i in active if balls[i].mask & balls[i1].mask), Fraction(0))
                if near < b[i1] / 2:
                    exchange_ok = False
        i1 = min(active, key=lambda i: (-balls[i].diameter, i))
        selected.append(i1)
        levels.append(psi)
        E &= ~space.ball_mask(balls[i1].center, 3 * balls[i1].radius)
        active = [i for i in active if balls[i].mask & balls[i1].mask == 0]
    achieved = sum((b[i] for i in selected), Fraction(0))
    union = 0
    for i in selected:
        union |= space.ball_mask(balls[i].center, 3 * balls[i].radius)
    tail = Fraction(0)
    level_ok = True
    for k in range(len(selected) - 1, -1, -1):
        tail += b[selected[k]]
        if exact and tail > 2 * levels[k]:
            level_ok = False
    certs = {
        "disjoint": all(balls[x].mask & balls[y].mask == 0
                        for k, x in enumerate(selected) for y in selected[k + 1:]),
        "covered": cover.target & ~union == 0,
        "bound": achieved <= 2 * total,
        "levels": level_ok if exact else None,
        "exchange": (exchange_ok if exchange_check else None) if exact else None,
    }
    res = SelectionResult(selected, 3, 2 * total, achieved, not exact, levels, [list(range(N))], certs)
    failed = [k for k, v in certs.items() if v is False]
    if failed:
        raise AssertionError(f"selection certificates failed: {failed}")
    return res


def _greedy_blocks(w: list, M: Fraction) -> list:
    blocks: list = []
    cur: list = []
    used = Fraction(0)
    for i, v in enumerate(w):
        while used + v > M / 4 ** len(blocks):
            if not cur:
                raise ValueError("an entry exceeds its block budget")
            blocks.append(cur)
            cur, used = [], Fraction(0)
        cur.append(i)
        used += v
    if cur:
        blocks.append(cur)
    return blocks


def block_select(cover: WeightedCover, b: Sequence, *, blocks: Optional[Sequence[Sequence[int]]] = None,
                 exact: Optional[bool] = None) -> SelectionResult:
    """Select balls by consecutive blocks with budgets 4^-k M; sum b <= 8 sum a_i b_i.

    Block k is run through :func:`nazarov_select` with weights 2^{k+1} a_i on
    E_k = {x : sum_{block k} 2^{k+1} a_i chi_{B_i}(x) >= 1}.  Without explicit
    ``blocks`` the budgets are filled greedily in index order, which for
    finite input puts everything in block 0.
    """
    cover.check()
    b = [to_fraction(v) for v in b]
    if len(b) != len(cover.balls):
        raise ValueError("one b value per ball is required")
    space = cover.space
    N = len(cover.balls)
    w = [a * v for a, v in zip(cover.a, b)]
    M = sum(w, Fraction(0))
    if blocks is None:
        blocks = _greedy_blocks(w, M) if N else []
    else:
        blocks = [list(bl) for bl in blocks]
        flat = [i for bl in blocks for i in bl]
        if flat != list(range(N)):
            raise ValueError("blocks must partition the indices into consecutive runs")
        for k, bl in enumerate(blocks):
            if sum((w[i] for i in bl), Fraction(0)) > M / 4 ** k:
                raise ValueError(f"block {k} exceeds its budget 4^-{k} M")
    selected: list = []
    info: list = []
    approximate = False
    union_ek = 0
    for k, bl in enumerate(blocks):
        scale = 2 ** (k + 1)
        ak = [scale * cover.a[i] for i in bl]
        Ek = 0
        for x in iter_bits(cover.target):
            if sum((a for a, i in zip(ak, bl) if cover.balls[i].mask >> x & 1), Fraction(0)) >= 1:
                Ek |= 1 << x
        bw = sum((w[i] for i in bl), Fraction(0))
        entry = {"block": k, "indices": bl, "budget": M / 4 ** k, "weight": bw, "selected": []}
        if Ek:
            sub = WeightedCover(space, Ek, [cover.balls[i] for i in bl], ak)
            r = nazarov_select(sub, [b[i] for i in bl], exact=exact)
            chosen = [bl[j] for j in r.selected]
            approximate |= r.approximate
            entry["selected"] = chosen
            entry["achieved"] = r.achieved
            assert r.achieved <= 2 * scale * bw
            selected.extend(chosen)
            union_ek |= Ek
        info.append(entry)
    achieved = sum((b[i] for i in selected), Fraction(0))
    union = 0
    for i in selected:
        B = cover.balls[i]
        union |= space.ball_mask(B.center, 3 * B.radius)
    certs = {
        "E_subset_union_Ek": cover.target & ~union_ek == 0,
        "covered": cover.target & ~union == 0,
        "bound": achieved <= 8 * M,
    }
    failed = [k for k, v in certs.items() if not v]
    if failed:
        raise AssertionError(f"block selection certificates failed: {failed}")
    return SelectionResult(selected, 3, 8 * M, achieved, approximate, [], info, certs)
