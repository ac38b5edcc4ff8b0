"""Minimum-cost covering engine and the Hausdorff-type contents built on it.

Integer covers (``min_cover``) give the Hausdorff content at a fixed scale,
fractional covers (``fractional_cover``) give the weighted content together
with a dual packing certificate, and ``certified_bounds`` rounds a fractional
cover back to an integer one through the block ball selection of
:mod:`hauscover.coverkit`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from . import gauge as _gauge
from .cliques import FamilyBlowup, maximal_cliques
from .lp import LpUnbounded, rows_from_masks, solve_packing, solve_packing_float
from .metricspace import FiniteMetricSpace, PointSubset, iter_bits, popcount, to_fraction

__all__ = [
    "Uncoverable",
    "Unbounded",
    "TooLarge",
    "CertificateError",
    "CandidateSet",
    "CoverInstance",
    "ContentResult",
    "BoundChain",
    "enumerate_candidates",
    "make_instance",
    "min_cover",
    "greedy_cover",
    "partition_dp_oracle",
    "subset_partition_dp",
    "fractional_cover",
    "hausdorff_content",
    "weighted_content",
    "certified_bounds",
    "weighted_integral_step",
    "DEFAULT_EXACT_CAP",
    "DEFAULT_ORACLE_CAP",
    "DEFAULT_FAMILY_CAP",
    "DEFAULT_LP_CAP",
]

DEFAULT_EXACT_CAP = 18
DEFAULT_ORACLE_CAP = 15
DEFAULT_FAMILY_CAP = 50_000
DEFAULT_LP_CAP = 200

Delta = Optional[Fraction]  # None stands for an infinite scale
Gauge = Callable[[Fraction, int], Fraction]


class Uncoverable(ValueError):
    """No admissible family covers the target at the requested scale."""


class Unbounded(Uncoverable):
    """The weighted integral has no finite value (f takes the value +inf)."""


class TooLarge(ValueError):
    """The instance exceeds the exact-solver cap."""


class CertificateError(AssertionError):
    """A mathematical certificate failed; ``report`` carries the evidence."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


def _delta(delta) -> Delta:
    if delta is None:
        return None
    if isinstance(delta, float) and math.isinf(delta):
        return None
    if isinstance(delta, str) and delta.strip().lower() in ("inf", "infinity", "oo"):
        return None
    d = to_fraction(delta)
    if d <= 0:
        raise ValueError("scale delta must be > 0")
    return d


def _within(d: Fraction, delta: Delta) -> bool:
    return delta is None or d <= delta


def _as_target(space: FiniteMetricSpace, E) -> int:
    if E is None:
        return (1 << space.n) - 1
    if isinstance(E, PointSubset):
        return E.mask
    if isinstance(E, int):
        return E
    return PointSubset.from_indices(E, space.n).mask


def zeta_gauge(s) -> Gauge:
    s = _gauge.as_exponent(s)
    return lambda d, mask: _gauge.zeta_q(s, d, mask != 0)


@dataclass(frozen=True)
class CandidateSet:
    mask: int
    diameter: Fraction
    cost: Fraction

    @property
    def key(self) -> tuple:
        return tuple(iter_bits(self.mask))

    def subset(self, n: int) -> PointSubset:
        return PointSubset(self.mask, n)


@dataclass
class CoverInstance:
    space: FiniteMetricSpace
    target: int
    delta: Delta
    family: list
    family_kind: str = "auto-cliques"

    def __post_init__(self):
        for c in self.family:
            if not _within(c.diameter, self.delta):
                raise ValueError(f"candidate {c.key} has diameter {c.diameter} > delta")


@dataclass
class ContentResult:
    """An optimum (or bound) with its witness and, for LPs, the dual packing.

    ``witness`` holds index tuples for integer covers and ``(weight, tuple)``
    pairs for fractional covers; ``dual`` maps point index to packing value.
    """

    value: Fraction
    mode: str
    witness: list = field(default_factory=list)
    dual: Optional[dict] = None
    lower: Optional[Fraction] = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {"value": self.value, "mode": self.mode, "witness": self.witness, "meta": self.meta}
        if self.dual is not None:
            out["dual"] = {str(k): v for k, v in sorted(self.dual.items())}
        if self.lower is not None:
            out["lower"] = self.lower
        return out


# ---------------------------------------------------------------- candidates

def enumerate_candidates(space: FiniteMetricSpace, E, delta=None, gauge: Optional[Gauge] = None,
                         *, s=None, cap: int = DEFAULT_FAMILY_CAP) -> list:
    """All maximal cliques of the threshold graphs G_d on E for admissible d.

    d ranges over 0 and the pairwise distances within E with d + eps <= delta.
    Any admissible set lies in a maximal clique of G_{diam} with no larger
    diameter, so optima over this family equal optima over all subsets.
    Candidates are returned in lexicographic order of their index tuples.
    """
    if gauge is None:
        gauge = zeta_gauge(s if s is not None else 1)
    delta = _delta(delta)
    target = _as_target(space, E)
    members = list(iter_bits(target))
    if not members:
        return []
    if not _within(space.eps, delta):
        raise Uncoverable(f"resolution {space.eps} exceeds delta {delta}: no admissible sets")
    D = space.idist
    scale = space._scale
    pairs = sorted((D[i][j], i, j) for a, i in enumerate(members) for j in members[a + 1:])
    adj = {i: 0 for i in members}
    found: set = set()

    def collect():
        for c in maximal_cliques(adj, target):
            found.add(c)
            if len(found) > cap:
                raise FamilyBlowup(f"more than {cap} candidate sets")

    # threshold 0 first: coincident points only
    k = 0
    while k < len(pairs) and pairs[k][0] == 0:
        _, i, j = pairs[k]
        adj[i] |= 1 << j
        adj[j] |= 1 << i
        k += 1
    collect()
    while k < len(pairs):
        cut = pairs[k][0]
        if not _within(Fraction(cut, scale) + space.eps, delta):
            break
        while k < len(pairs) and pairs[k][0] == cut:
            _, i, j = pairs[k]
            adj[i] |= 1 << j
            adj[j] |= 1 << i
            k += 1
        collect()
    out = []
    for m in found:
        d = space.diam(m)
        out.append(CandidateSet(m, d, Fraction(gauge(d, m))))
    out.sort(key=lambda c: c.key)
    return out


def make_instance(space: FiniteMetricSpace, E, delta=None, s=None, *, gauge: Optional[Gauge] = None,
                  family: Optional[Sequence] = None, cap: int = DEFAULT_FAMILY_CAP) -> CoverInstance:
    """Build a cover instance; ``family`` (index iterables) switches to a user family."""
    delta = _delta(delta)
    if gauge is None:
        gauge = zeta_gauge(s if s is not None else 1)
    target = _as_target(space, E)
    if family is None:
        fam = enumerate_candidates(space, target, delta, gauge, cap=cap)
        return CoverInstance(space, target, delta, fam, "auto-cliques")
    fam = []
    seen = set()
    for item in family:
        if isinstance(item, CandidateSet):
            c = item
        else:
            m = PointSubset.from_indices(item, space.n).mask if not isinstance(item, int) else item
            d = space.diam(m)
            c = CandidateSet(m, d, Fraction(gauge(d, m)))
        if c.mask and c.mask not in seen and _within(c.diameter, delta):
            seen.add(c.mask)
            fam.append(c)
    fam.sort(key=lambda c: c.key)
    return CoverInstance(space, target, delta, fam, "user")


def _check_coverable(inst: CoverInstance):
    union = 0
    for c in inst.family:
        union |= c.mask
    missing = inst.target & ~union
    if missing:
        raise Uncoverable(f"points {list(iter_bits(missing))} lie in no admissible candidate")


# ------------------------------------------------------------- integer cover

def _int_costs(costs: Sequence[Fraction], extra: int = 1) -> tuple[list, int]:
    den = 1
    for c in costs:
        den = math.lcm(den, c.denominator)
    den *= extra
    return [c.numerator * (den // c.denominator) for c in costs], den


def greedy_cover(inst: CoverInstance) -> tuple[Fraction, list]:
    """Cheapest-per-new-point greedy; ties go to the lexicographically first set."""
    _check_coverable(inst)
    fam = inst.family
    icost, den = _int_costs([c.cost for c in fam])
    U = inst.target
    chosen = []
    total = 0
    while U:
        best, bk, bc = -1, 0, 0
        for idx, c in enumerate(fam):
            k = popcount(c.mask & U)
            if k == 0:
                continue
            # icost[idx]/k < bc/bk
            if best < 0 or icost[idx] * bk < bc * k:
                best, bk, bc = idx, k, icost[idx]
        chosen.append(best)
        total += icost[best]
        U &= ~fam[best].mask
    return Fraction(total, den), chosen


def min_cover(inst: CoverInstance, *, exact_cap: int = DEFAULT_EXACT_CAP,
              lp_bound: bool = True) -> ContentResult:
    """Minimum-cost cover of the target by candidates.

    Exact branch and bound for ``|E| <= exact_cap``: the greedy cover seeds the
    incumbent, the fractional LP optimum certifies early termination, and each
    node is bounded by the dual packing ``sum_x min_A cost(A)/|A & U|``.  Ties
    keep the first optimum met in the fixed branching order, so witnesses are
    deterministic.  Larger targets return the greedy cover as ``greedy-upper``.
    """
    size = popcount(inst.target)
    if size == 0:
        return ContentResult(Fraction(0), "exact", [], meta={"family_size": len(inst.family)})
    upper, chosen = greedy_cover(inst)
    fam = inst.family
    meta = {"family_size": len(fam), "family_kind": inst.family_kind, "greedy": upper}
    lower = None
    lp = None
    if lp_bound and size <= DEFAULT_LP_CAP and len(fam) * size <= 400_000:
        lp = fractional_cover(inst)
        lower = lp.value
    if lower is not None and lower == upper:
        # greedy meets the fractional optimum: certified without search
        meta["nodes"] = 0
        return ContentResult(upper, "exact", sorted(fam[i].key for i in chosen), lower=lower,
                             meta=meta)
    if size > exact_cap:
        if lower is None:
            lower = _packing_bound(inst)
        return ContentResult(upper, "greedy-upper", sorted(fam[i].key for i in chosen), lower=lower,
                             dual=lp.dual if lp else None, meta=meta)

    L = math.lcm(*range(1, size + 1))
    icost, den = _int_costs([c.cost for c in fam], L)
    by_point = {}
    for x in iter_bits(inst.target):
        ids = [i for i, c in enumerate(fam) if c.mask >> x & 1]
        ids.sort(key=lambda i: (Fraction(icost[i], popcount(fam[i].mask & inst.target)), fam[i].key))
        by_point[x] = ids
    best_cost = sum(icost[i] for i in chosen)
    best_sets = list(chosen)
    stop_at = None if lower is None else lower * den
    nodes = 0

    def bound(U: int) -> int:
        tot = 0
        for x in iter_bits(U):
            m = None
            for i in by_point[x]:
                v = icost[i] // popcount(fam[i].mask & U)
                if m is None or v < m:
                    m = v
            tot += m
        return tot

    def search(U: int, acc: int, path: list) -> bool:
        nonlocal best_cost, best_sets, nodes
        nodes += 1
        if U == 0:
            if acc < best_cost:
                best_cost, best_sets = acc, list(path)
                return stop_at is not None and best_cost == stop_at
            return False
        if acc + bound(U) >= best_cost:
            return False
        x = min(iter_bits(U), key=lambda p: (len(by_point[p]), p))
        for i in by_point[x]:
            path.append(i)
            done = search(U & ~fam[i].mask, acc + icost[i], path)
            path.pop()
            if done:
                return True
        return False

    search(inst.target, 0, [])
    meta["nodes"] = nodes
    return ContentResult(Fraction(best_cost, den), "exact", sorted(fam[i].key for i in best_sets),
                         lower=lower, meta=meta)


def _packing_bound(inst: CoverInstance) -> Fraction:
    tot = Fraction(0)
    T = inst.target
    for x in iter_bits(T):
        tot += min(c.cost / popcount(c.mask & T) for c in inst.family if c.mask >> x & 1)
    return tot


# ---------------------------------------------------------- partition oracle

def subset_partition_dp(m: int, cost: Sequence[Optional[int]]) -> tuple[list, list]:
    """Min-cost partitions of every subset of an m-element ground set.

    ``cost[S]`` is an integer (or None when S is inadmissible) for each local
    bitmask S.  Returns ``(best, choice)`` where ``choice[S]`` is the block
    containing S's lowest element in an optimal partition.
    """
    full = 1 << m
    INF = None
    best = [INF] * full
    choice = [0] * full
    best[0] = 0
    for S in range(1, full):
        low = S & -S
        rest = S ^ low
        b = INF
        ch = 0
        sub = rest
        while True:
            T = sub | low
            cT = cost[T]
            if cT is not None:
                r = best[S ^ T]
                if r is not None:
                    v = cT + r
                    if b is None or v < b:
                        b, ch = v, T
            if sub == 0:
                break
            sub = (sub - 1) & rest
        best[S] = b
        choice[S] = ch
    return best, choice


def _local_point_diams(space: FiniteMetricSpace, pts: Sequence[int]) -> list:
    m = len(pts)
    D = space.idist
    pd = [0] * (1 << m)
    for S in range(1, 1 << m):
        h = S.bit_length() - 1
        rest = S ^ (1 << h)
        v = pd[rest]
        row = D[pts[h]]
        r = rest
        while r:
            lb = r & -r
            dv = row[pts[lb.bit_length() - 1]]
            if dv > v:
                v = dv
            r ^= lb
        pd[S] = v
    return pd


def partition_dp_oracle(space: FiniteMetricSpace, E, s, delta=None, *,
                        cap: int = DEFAULT_ORACLE_CAP) -> Fraction:
    """Exact content by subset DP over partitions of E (independent oracle).

    Valid because the gauge is monotone under inclusion: any cover induces a
    partition of E into pieces of no larger cost.
    """
    delta = _delta(delta)
    pts = list(iter_bits(_as_target(space, E)))
    m = len(pts)
    if m > cap:
        raise TooLarge(f"|E| = {m} exceeds the oracle cap {cap}")
    if m == 0:
        return Fraction(0)
    s = _gauge.as_exponent(s)
    pd = _local_point_diams(space, pts)
    scale = space._scale
    values = {}
    for v in set(pd[1:]):
        d = Fraction(v, scale) + space.eps
        values[v] = _gauge.zeta_q(s, d) if _within(d, delta) else None
    finite = [q for q in values.values() if q is not None]
    if not finite:
        raise Uncoverable("no admissible singleton")
    icost_map = dict(zip([k for k, q in values.items() if q is not None],
                         _int_costs(finite)[0]))
    den = _int_costs(finite)[1]
    cost = [None] * (1 << m)
    cost[0] = 0
    for S in range(1, 1 << m):
        cost[S] = icost_map.get(pd[S])
    best, _ = subset_partition_dp(m, cost)
    if best[-1] is None:
        raise Uncoverable("target cannot be partitioned into admissible sets")
    return Fraction(best[-1], den)


# ---------------------------------------------------------- fractional cover

def fractional_cover(inst: CoverInstance, demand: Optional[dict] = None, *,
                     lp_cap: int = DEFAULT_LP_CAP) -> ContentResult:
    """LP optimum of min sum a_A cost(A) s.t. sum_{A ni x} a_A >= demand(x), a >= 0.

    Solved exactly through its packing dual; the result carries both the
    cover weights (``witness``) and the packing (``dual``), whose totals agree.
    """
    pts = list(iter_bits(inst.target))
    if not pts:
        return ContentResult(Fraction(0), "lp", [], dual={}, lower=Fraction(0))
    _check_coverable(inst)
    fam = [c for c in inst.family if c.mask & inst.target]
    A = rows_from_masks([c.mask for c in fam], pts)
    b = [c.cost for c in fam]
    cvec = [Fraction(1) if demand is None else Fraction(demand[p]) for p in pts]
    exact = len(pts) <= lp_cap and len(fam) <= 50 * lp_cap
    try:
        sol = solve_packing(A, b, cvec) if exact else solve_packing_float(A, b, cvec)
    except LpUnbounded as exc:
        raise Uncoverable(str(exc)) from exc
    witness = [(w, c.key) for w, c in zip(sol.x, fam) if w > 0]
    dual = {p: v for p, v in zip(pts, sol.y)}
    mode = "lp" if sol.exact else "lp-approx"
    primal_val = sum((w * c.cost for w, c in zip(sol.x, fam)), Fraction(0))
    dual_val = sum((dual[p] * cv for p, cv in zip(pts, cvec)), Fraction(0))
    meta = {"family_size": len(fam), "pivots": sol.pivots,
            "strong_duality": primal_val == dual_val if sol.exact else None}
    return ContentResult(sol.value, mode, witness, dual=dual, lower=dual_val, meta=meta)


# ------------------------------------------------------------------ contents

def hausdorff_content(space: FiniteMetricSpace, E, s, delta=None, *,
                      exact_cap: int = DEFAULT_EXACT_CAP, family_cap: int = DEFAULT_FAMILY_CAP,
                      lp_bound: bool = True) -> ContentResult:
    """Hausdorff content at scale delta: minimum of sum zeta^s(A_i) over delta-covers."""
    target = _as_target(space, E)
    if target == 0:
        return ContentResult(Fraction(0), "exact", [])
    inst = make_instance(space, target, delta, s, cap=family_cap)
    return min_cover(inst, exact_cap=exact_cap, lp_bound=lp_bound)


def weighted_content(space: FiniteMetricSpace, E, s, delta=None, *,
                     family_cap: int = DEFAULT_FAMILY_CAP) -> ContentResult:
    """Weighted (fractional) Hausdorff content at scale delta, with dual certificate."""
    target = _as_target(space, E)
    if target == 0:
        return ContentResult(Fraction(0), "lp", [], dual={}, lower=Fraction(0))
    inst = make_instance(space, target, delta, s, cap=family_cap)
    return fractional_cover(inst)


def weighted_integral_step(space: FiniteMetricSpace, f: Sequence, s, delta=None, *,
                           family_cap: int = DEFAULT_FAMILY_CAP) -> ContentResult:
    """Weighted integral of a nonnegative function at scale delta.

    min sum a_A zeta^s(A) subject to sum_{A ni x} a_A >= f(x).  Any point with
    ``f = inf`` has no finite weighted cover and raises :class:`Unbounded`.
    """
    if len(f) != space.n:
        raise ValueError("f needs one value per point")
    vals = []
    for v in f:
        if isinstance(v, float) and math.isinf(v) or v == "inf":
            raise Unbounded("f takes the value +inf; the weighted integral is infinite")
        q = to_fraction(v)
        if q < 0:
            raise ValueError("f must be nonnegative")
        vals.append(q)
    support = 0
    for i, q in enumerate(vals):
        if q > 0:
            support |= 1 << i
    if support == 0:
        return ContentResult(Fraction(0), "lp", [], dual={}, lower=Fraction(0))
    inst = make_instance(space, support, delta, s, cap=family_cap)
    return fractional_cover(inst, demand={i: vals[i] for i in iter_bits(support)})


# ------------------------------------------------------------ bound chain

@dataclass
class BoundChain:
    """lower <= weighted <= content at delta, and the rounding at scale 6 delta."""

    delta: Delta
    s: str
    lower: Fraction
    weighted: Fraction
    upper: Fraction
    upper_mode: str
    upper_6delta: Fraction
    upper_6delta_mode: str
    rounded_cost: Fraction
    factor: Fraction
    selection: dict
    checks: dict

    @property
    def ok(self) -> bool:
        return all(v for v in self.checks.values() if v is not None)

    def to_json(self) -> dict:
        return {
            "delta": "inf" if self.delta is None else self.delta,
            "s": self.s,
            "lower": self.lower,
            "weighted": self.weighted,
            "upper": self.upper,
            "upper_mode": self.upper_mode,
            "upper_6delta": self.upper_6delta,
            "upper_6delta_mode": self.upper_6delta_mode,
            "rounded_cost": self.rounded_cost,
            "factor": self.factor,
            "selection": self.selection,
            "checks": self.checks,
            "ok": self.ok,
        }


def certified_bounds(space: FiniteMetricSpace, E, s, delta=None, *, family=None,
                     exact_cap: int = DEFAULT_EXACT_CAP, strict: bool = False) -> BoundChain:
    """Compute and certify the fixed-scale chain between weighted and plain content.

    The fractional cover is rounded by wrapping each support set A in the ball
    B(x_A, diam A) about its lowest-index point and running the block
    selection with b = zeta^s(A); the 3-dilates of the selected balls are an
    integer cover at scale 6 delta.  With ``strict`` a failed check raises
    :class:`CertificateError`.
    """
    from .coverkit import WeightedCover, block_select

    sexp = _gauge.as_exponent(s)
    delta = _delta(delta)
    target = _as_target(space, E)
    inst = make_instance(space, target, delta, sexp, family=family)
    lp = fractional_cover(inst)
    integer = min_cover(inst, exact_cap=exact_cap)
    lam = lp.value
    lower = lp.lower

    fam_by_key = {c.key: c for c in inst.family}
    support = [(w, fam_by_key[k]) for w, k in lp.witness]
    balls = [(c.key[0], space.point_diam(c.mask)) for _, c in support]
    a = [w for w, _ in support]
    b = [c.cost for _, c in support]
    checks: dict = {}
    if target:
        sel = block_select(WeightedCover.from_balls(space, target, balls, a), b)
    else:
        sel = None
    dil_masks = []
    if sel is not None:
        for i in sel.selected:
            cx, r = balls[i]
            dil_masks.append(space.ball_mask(cx, 3 * r))
    rounded = sum((_gauge.zeta_q(sexp, space.diam(m)) for m in dil_masks), Fraction(0))
    delta6 = None if delta is None else 6 * delta
    inst6 = make_instance(space, target, delta6, sexp)
    content6 = min_cover(inst6, exact_cap=exact_cap)
    factor = 8 * _gauge.power_q(6, sexp, up=True)

    union = 0
    for m in dil_masks:
        union |= m
    checks["lower<=weighted"] = lower <= lam
    checks["weighted<=upper"] = lam <= integer.value
    checks["strong_duality"] = lp.meta.get("strong_duality")
    checks["rounded_covers_E"] = target & ~union == 0
    checks["rounded_scale<=6delta"] = all(_within(space.diam(m), delta6) for m in dil_masks)
    checks["upper6<=rounded"] = (content6.value <= rounded) if content6.mode == "exact" else None
    checks["rounded<=factor*weighted"] = rounded <= factor * lam
    if sel is not None:
        checks["selection_bound"] = sel.achieved <= sel.bound
    chain = BoundChain(delta, str(sexp), lower, lam, integer.value, integer.mode, content6.value,
                       content6.mode, rounded, factor,
                       {"balls": [{"center": c, "radius": r} for c, r in balls],
                        "weights": a, "selected": [] if sel is None else sel.selected,
                        "achieved": Fraction(0) if sel is None else sel.achieved,
                        "bound": Fraction(0) if sel is None else sel.bound},
                       checks)
    if strict and not chain.ok:
        failed = [k for k, v in checks.items() if v is False]
        raise CertificateError(f"bound chain failed: {failed}", chain)
    return chain
