"""Mapping contents, fibers and the fixed-scale coarea checks.

Contents of a map f: X -> Y on E use costs that mix image and domain sizes:
``phi_content`` charges zeta^s(f(A)) zeta^t(A), ``tilde_content`` charges
H^s_inf(f(A)) zeta^t(A), and ``mapping_content_dyadic`` restricts covers to
dyadic cubes.  All optima are exact rationals on capped instances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from itertools import product as _iproduct
from typing import Optional, Sequence

import numpy as np

from . import gauge as _gauge
from .cliques import maximal_cliques
from .content import (DEFAULT_EXACT_CAP, ContentResult, CoverInstance, CandidateSet, TooLarge,
                      Uncoverable, _delta, _int_costs, _local_point_diams, _within,
                      hausdorff_content, min_cover, subset_partition_dp, weighted_integral_step)
from .metricspace import (FiniteMetricSpace, LipschitzMapping, PointSubset, iter_bits, popcount,
                          to_fraction)

__all__ = [
    "WitnessInvalid",
    "TooDeep",
    "MappingContentQuery",
    "FiberReport",
    "DensityProfile",
    "DyadicCube",
    "AhlforsEstimate",
    "fiber",
    "phi_content",
    "phi_dp_oracle",
    "tilde_content",
    "refine_cover",
    "lemma16_check",
    "eilenberg_chain",
    "lower_density_profile",
    "dyadic_grid",
    "dyadic_cubes",
    "mapping_content_dyadic",
    "dyadic_bruteforce",
    "davids_ratio_probe",
    "theorem30_report",
    "phi_zero_scale_check",
]

DP_CAP = 12
MAX_DYADIC_LEVEL = 5
GAUGE_RTOL = 1e-10


class WitnessInvalid(ValueError):
    pass


class TooDeep(ValueError):
    pass


@dataclass(frozen=True)
class MappingContentQuery:
    f: LipschitzMapping
    E: int
    s: _gauge.Exponent
    t: _gauge.Exponent
    delta: Optional[Fraction]

    @classmethod
    def make(cls, f: LipschitzMapping, E=None, s=1, t=1, delta=None) -> "MappingContentQuery":
        X = f.domain
        if E is None:
            mask = (1 << X.n) - 1
        elif isinstance(E, PointSubset):
            mask = E.mask
        elif isinstance(E, int):
            mask = E
        else:
            mask = PointSubset.from_indices(E, X.n).mask
        return cls(f, mask, _gauge.as_exponent(s), _gauge.as_exponent(t), _delta(delta))


def _q(f, E, s, t, delta) -> MappingContentQuery:
    if isinstance(f, MappingContentQuery):
        return f
    return MappingContentQuery.make(f, E, s, t, delta)


def fiber(f: LipschitzMapping, y: int, E=None) -> PointSubset:
    """f^{-1}(y), intersected with E when given."""
    if not 0 <= y < f.codomain.n:
        raise IndexError(f"codomain index {y} out of range")
    m = f.preimage_mask(y)
    if E is not None:
        m &= E.mask if isinstance(E, PointSubset) else (E if isinstance(E, int)
                                                          else PointSubset.from_indices(E, f.domain.n).mask)
    return PointSubset(m, f.domain.n)


# ------------------------------------------------------------- phi content

def _phi_cost(q: MappingContentQuery, mask: int) -> Fraction:
    X, Y = q.f.domain, q.f.codomain
    return _gauge.zeta_q(q.s, Y.diam(q.f.image_mask(mask))) * _gauge.zeta_q(q.t, X.diam(mask))


def _joint_cliques(q: MappingContentQuery, by_image_subset: bool = False) -> list:
    """Maximal sets for every pair (domain threshold, image constraint).

    With ``by_image_subset`` the image constraint is f(A) within a fixed subset
    S of f(E) (for costs monotone in f(A)); otherwise it is an image distance
    threshold (for costs depending on diam f(A)).  Either way every admissible
    A lies in a family member of no larger cost.
    """
    X, Y, f = q.f.domain, q.f.codomain, q.f
    pts = list(iter_bits(q.E))
    DX, DY = X.idist, Y.idist
    dx_vals = sorted({0} | {DX[i][j] for a, i in enumerate(pts) for j in pts[a + 1:]})
    dx_vals = [d for d in dx_vals if _within(Fraction(d, X._scale) + X.eps, q.delta)]
    found: set = set()
    if by_image_subset:
        img = list(iter_bits(f.image_mask(q.E)))
        constraints = []
        for r in range(1, 1 << len(img)):
            S = 0
            for k, y in enumerate(img):
                if r >> k & 1:
                    S |= 1 << y
            constraints.append(S)
    else:
        ipts = sorted({f(i) for i in pts})
        constraints = sorted({0} | {DY[a][b] for a in ipts for b in ipts})
    for c in constraints:
        if by_image_subset:
            allowed = [i for i in pts if c >> f(i) & 1]
        else:
            allowed = pts
        vmask = 0
        for i in allowed:
            vmask |= 1 << i
        for dx in dx_vals:
            adj = {}
            for i in allowed:
                row = DX[i]
                yr = DY[f(i)]
                m = 0
                for j in allowed:
                    if j != i and row[j] <= dx and (by_image_subset or yr[f(j)] <= c):
                        m |= 1 << j
                adj[i] = m
            found.update(maximal_cliques(adj, vmask))
    return sorted(found, key=lambda m: tuple(iter_bits(m)))


def _mapping_instance(q: MappingContentQuery, cost_fn, by_image_subset: bool) -> CoverInstance:
    X = q.f.domain
    fam = [CandidateSet(m, X.diam(m), cost_fn(m)) for m in _joint_cliques(q, by_image_subset)]
    return CoverInstance(X, q.E, q.delta, fam, "user")


def phi_dp_oracle(f, E=None, s=1, t=1, delta=None, *, cap: int = 15):
    """Partition DP for Phi; returns (value, blocks as index tuples)."""
    q = _q(f, E, s, t, delta)
    return _partition_opt(q, lambda m: _phi_cost(q, m), cap)


def _partition_opt(q: MappingContentQuery, cost_fn, cap: int):
    X = q.f.domain
    pts = list(iter_bits(q.E))
    m = len(pts)
    if m > cap:
        raise TooLarge(f"|E| = {m} exceeds the partition cap {cap}")
    if m == 0:
        return Fraction(0), []
    pd = _local_point_diams(X, pts)
    costs: list = [None] * (1 << m)
    for S in range(1, 1 << m):
        if _within(Fraction(pd[S], X._scale) + X.eps, q.delta):
            g = 0
            r = S
            while r:
                lb = r & -r
                g |= 1 << pts[lb.bit_length() - 1]
                r ^= lb
            costs[S] = cost_fn(g)
    finite = [c for c in costs if c is not None]
    if not finite:
        raise Uncoverable("no admissible singleton")
    ints, den = _int_costs(finite)
    it = iter(ints)
    icost = [next(it) if c is not None else None for c in costs]
    icost[0] = 0
    best, choice = subset_partition_dp(m, icost)
    if best[-1] is None:
        raise Uncoverable("E cannot be partitioned into admissible sets")
    blocks = []
    S = (1 << m) - 1
    while S:
        T = choice[S]
        blocks.append(tuple(pts[k] for k in range(m) if T >> k & 1))
        S ^= T
    return Fraction(best[-1], den), sorted(blocks)


def _mapping_optimum(q: MappingContentQuery, cost_fn, by_image_subset: bool, exact_cap: int) -> ContentResult:
    size = popcount(q.E)
    if size == 0:
        return ContentResult(Fraction(0), "exact", [])
    if size <= DP_CAP:
        v, w = _partition_opt(q, cost_fn, DP_CAP)
        return ContentResult(v, "exact", w, meta={"engine": "partition-dp"})
    inst = _mapping_instance(q, cost_fn, by_image_subset)
    r = min_cover(inst, exact_cap=exact_cap)
    r.meta["engine"] = "joint-cliques"
    return r


def phi_content(f, E=None, s=1, t=1, delta=None, *, exact_cap: int = DEFAULT_EXACT_CAP) -> ContentResult:
    """min sum zeta^s(f(A_i)) zeta^t(A_i) over delta-covers of E.

    Partition DP for small E; above that a branch and bound over the maximal
    cliques of the joint domain/image threshold graphs, exact up to
    ``exact_cap`` points and greedy beyond.
    """
    q = _q(f, E, s, t, delta)
    return _mapping_optimum(q, lambda m: _phi_cost(q, m), False, exact_cap)


# ----------------------------------------------------------- tilde content

class _ImageContents:
    """H^s_inf of every subset of the image f(E), from one partition DP."""

    def __init__(self, Y: FiniteMetricSpace, image_mask: int, s: _gauge.Exponent):
        self.Y, self.s = Y, s
        self.pts = list(iter_bits(image_mask))
        self.local = {p: k for k, p in enumerate(self.pts)}
        self.cache: dict = {}
        self.table = None
        m = len(self.pts)
        if m <= 15:
            pd = _local_point_diams(Y, self.pts)
            vals = {v: _gauge.zeta_q(s, Fraction(v, Y._scale) + Y.eps) for v in set(pd[1:])}
            ints, den = _int_costs(list(vals.values()) or [Fraction(0)])
            imap = dict(zip(vals.keys(), ints))
            cost = [0] + [imap[pd[S]] for S in range(1, 1 << m)]
            best, _ = subset_partition_dp(m, cost)
            self.table, self.den = best, den

    def __call__(self, ymask: int) -> Fraction:
        hit = self.cache.get(ymask)
        if hit is not None:
            return hit
        if self.table is not None:
            loc = 0
            for y in iter_bits(ymask):
                loc |= 1 << self.local[y]
            v = Fraction(self.table[loc], self.den)
        else:
            r = hausdorff_content(self.Y, ymask, self.s, None)
            if r.mode != "exact":
                raise TooLarge("inner content beyond the exact cap")
            v = r.value
        self.cache[ymask] = v
        return v


def tilde_content(f, E=None, s=1, t=1, delta=None, *, exact_cap: int = DEFAULT_EXACT_CAP) -> ContentResult:
    """min sum H^s_inf(f(A_i)) zeta^t(A_i) over delta-covers of E; checked against Phi."""
    q = _q(f, E, s, t, delta)
    inner = _ImageContents(q.f.codomain, q.f.image_mask(q.E), q.s)
    X = q.f.domain

    def cost(m):
        return inner(q.f.image_mask(m)) * _gauge.zeta_q(q.t, X.diam(m))

    r = _mapping_optimum(q, cost, True, exact_cap)
    phi = phi_content(q, exact_cap=exact_cap)
    r.meta["phi"] = phi.value
    r.meta["codomain_cell_mode"] = q.f.codomain.cell_mode
    if r.mode == "exact" and phi.mode == "exact":
        r.meta["tilde<=phi"] = r.value <= phi.value
        if not r.value <= phi.value:
            raise AssertionError("tilde content exceeds phi content")
    return r


# -------------------------------------------------------------- refinement

@dataclass
class RefinementReport:
    refined: list
    phi_cost: Fraction
    bound: Fraction
    holds: bool

    def to_json(self) -> dict:
        return {"refined": self.refined, "phi_cost": self.phi_cost, "bound": self.bound,
                "holds": self.holds}


def _inner_partition(Y: FiniteMetricSpace, ymask: int, s) -> list:
    pts = list(iter_bits(ymask))
    m = len(pts)
    if m > 15:
        raise TooLarge("image too large for an inner witness")
    pd = _local_point_diams(Y, pts)
    vals = {v: _gauge.zeta_q(s, Fraction(v, Y._scale) + Y.eps) for v in set(pd[1:])}
    ints, _ = _int_costs(list(vals.values()))
    imap = dict(zip(vals.keys(), ints))
    best, choice = subset_partition_dp(m, [0] + [imap[pd[S]] for S in range(1, 1 << m)])
    out, S = [], (1 << m) - 1
    while S:
        T = choice[S]
        out.append(tuple(pts[k] for k in range(m) if T >> k & 1))
        S ^= T
    return out


def refine_cover(f, E=None, s=1, t=1, delta=None, cover: Optional[Sequence] = None,
                 inner: Optional[Sequence] = None) -> RefinementReport:
    """Split each A_i along an inner cover {C_ij} of f(A_i): A_ij = A_i & f^{-1}(C_ij).

    Checks sum zeta^s(f(A_ij)) zeta^t(A_ij) <= sum_i zeta^t(A_i) sum_j zeta^s(C_ij).
    Without witnesses, the optimal tilde cover and optimal inner covers are used,
    so the left side bounds Phi and the right side equals the tilde content.
    """
    q = _q(f, E, s, t, delta)
    X, Y, fm = q.f.domain, q.f.codomain, q.f
    if cover is None:
        cover = tilde_content(q).witness
    cover_masks = [PointSubset.from_indices(A, X.n).mask for A in cover]
    union = 0
    for A in cover_masks:
        if not _within(X.diam(A), q.delta):
            raise WitnessInvalid(f"cover set {tuple(iter_bits(A))} exceeds delta")
        union |= A
    if q.E & ~union:
        raise WitnessInvalid("cover does not contain E")
    if inner is None:
        inner = [_inner_partition(Y, fm.image_mask(A & q.E), q.s) for A in cover_masks]
    if len(inner) != len(cover_masks):
        raise WitnessInvalid("one inner cover per cover set is required")
    refined = []
    lhs = Fraction(0)
    rhs = Fraction(0)
    for A, Cs in zip(cover_masks, inner):
        cmasks = [PointSubset.from_indices(C, Y.n).mask for C in Cs]
        cu = 0
        for C in cmasks:
            cu |= C
        if fm.image_mask(A & q.E) & ~cu:
            raise WitnessInvalid(f"inner cover misses part of f({tuple(iter_bits(A))})")
        rhs += _gauge.zeta_q(q.t, X.diam(A)) * sum((_gauge.zeta_q(q.s, Y.diam(C)) for C in cmasks),
                                                   Fraction(0))
        for C in cmasks:
            Aij = 0
            for i in iter_bits(A & q.E):
                if C >> fm(i) & 1:
                    Aij |= 1 << i
            if Aij:
                refined.append(tuple(iter_bits(Aij)))
                lhs += _phi_cost(q, Aij)
    return RefinementReport(refined, lhs, rhs, lhs <= rhs)


# ------------------------------------------------------- gauge domination

def effective_lip(f: LipschitzMapping) -> Fraction:
    """Least L with diam f(A) <= L diam A for every A under the cell conventions."""
    L = f.lip
    ex, ey = f.domain.eps, f.codomain.eps
    if ey > 0:
        if ex == 0:
            return L  # singletons have zero domain gauge; pairs obey Lip with slack ey
        L = max(L, ey / ex)
    return L


def lemma16_check(f, E=None, s=1, t=1, delta=None, *, exact_cap: int = DEFAULT_EXACT_CAP) -> dict:
    """Per-set and optimum-level check of Phi^{s,t} <= L^s C(s,t) H^{s+t}.

    C(s,t) = omega_s omega_t / omega_{s+t}.  Per-set checks run over every
    admissible subset of E (up to 2^12 of them) or over the candidate family.
    """
    q = _q(f, E, s, t, delta)
    X, Y, fm = q.f.domain, q.f.codomain, q.f
    L = effective_lip(fm)
    st = q.s + q.t
    C = _gauge.omega(q.s) * _gauge.omega(q.t) / _gauge.omega(st)
    Ls = float(L) ** q.s.value if not q.s.is_zero else 1.0
    pts = list(iter_bits(q.E))
    if len(pts) <= DP_CAP:
        sets = []
        for r in range(1, 1 << len(pts)):
            m = 0
            for k, p in enumerate(pts):
                if r >> k & 1:
                    m |= 1 << p
            sets.append(m)
    else:
        sets = [c.mask for c in _mapping_instance(q, lambda m: Fraction(0), False).family]
    worst = 0.0
    per_set_ok = True
    checked = 0
    for m in sets:
        dX = X.diam(m)
        if not _within(dX, q.delta):
            continue
        dY = Y.diam(fm.image_mask(m))
        if not (dY <= L * dX or (X.eps == 0 and dX == 0 and not q.t.is_zero)):
            per_set_ok = False
        lhs = _gauge.zeta(q.s, float(dY)) * _gauge.zeta(q.t, float(dX))
        rhs = Ls * C * _gauge.zeta(st, float(dX))
        checked += 1
        if rhs > 0:
            worst = max(worst, lhs / rhs)
        if lhs > rhs * (1 + GAUGE_RTOL) + 1e-300:
            per_set_ok = False
    phi = phi_content(q, exact_cap=exact_cap)
    H = hausdorff_content(X, q.E, st, q.delta, exact_cap=exact_cap)
    bound = Ls * C * float(H.value)
    opt_ok = float(phi.value) <= bound * (1 + GAUGE_RTOL) if phi.mode == "exact" and H.mode == "exact" else None
    return {
        "lip": fm.lip,
        "effective_lip": L,
        "constant": C,
        "sets_checked": checked,
        "per_set_ok": per_set_ok,
        "max_ratio": worst,
        "phi": phi.value,
        "phi_mode": phi.mode,
        "content": H.value,
        "content_mode": H.mode,
        "bound": bound,
        "optimum_ok": opt_ok,
        "ok": per_set_ok and opt_ok is not False,
    }


# -------------------------------------------------------------- Eilenberg

@dataclass
class FiberReport:
    y: int
    fiber: tuple
    content: Fraction
    mode: str
    cover_weight: Fraction
    dominated: Optional[bool]

    def to_json(self) -> dict:
        return {"y": self.y, "fiber": list(self.fiber), "content": self.content, "mode": self.mode,
                "cover_weight": self.cover_weight, "dominated": self.dominated}


def eilenberg_chain(f, E=None, s=1, t=1, delta=None, delta0=None, *, cover: Optional[Sequence] = None,
                    exact_cap: int = DEFAULT_EXACT_CAP) -> dict:
    """Fiber domination by the weighted image cover {(zeta^{s-t}(A_i), f(A_i))}.

    For every codomain point y: H^{s-t}_{delta0}(f^{-1}(y) & E) <= sum_{y in f(A_i)}
    zeta^{s-t}(A_i), valid whenever delta <= delta0.  The cover defaults to the
    optimal (or greedy) witness of Phi^{t,s-t}_delta, whose cost equals
    sum a_i zeta^t(F_i).  The weighted integral of the fiber-content function
    at the scale of the F_i is also bounded by that sum.
    """
    base = _q(f, E, s, t, delta)
    s_, t_ = base.s, base.t
    u = s_ - t_
    fm, X, Y = base.f, base.f.domain, base.f.codomain
    d0 = base.delta if delta0 is None else _delta(delta0)
    if d0 is not None and (base.delta is None or base.delta > d0):
        raise ValueError("delta0 must be >= delta")
    q = MappingContentQuery(fm, base.E, t_, u, base.delta)
    phi = None
    if cover is None:
        phi = phi_content(q, exact_cap=exact_cap)
        cover = phi.witness
    masks = [PointSubset.from_indices(A, X.n).mask & base.E for A in cover]
    masks = [m for m in masks if m]
    union = 0
    for m in masks:
        if not _within(X.diam(m), base.delta):
            raise WitnessInvalid("cover set exceeds delta")
        union |= m
    if base.E & ~union:
        raise WitnessInvalid("cover does not contain E")
    a = [_gauge.zeta_q(u, X.diam(m)) for m in masks]
    F = [fm.image_mask(m) for m in masks]
    weight_sum = sum((ai * _gauge.zeta_q(t_, Y.diam(Fi)) for ai, Fi in zip(a, F)), Fraction(0))
    fibers = []
    g = []
    ok = True
    for y in range(Y.n):
        fmask = fm.preimage_mask(y) & base.E
        w = sum((ai for ai, Fi in zip(a, F) if Fi >> y & 1), Fraction(0))
        if fmask:
            r = hausdorff_content(X, fmask, u, d0, exact_cap=exact_cap)
            val, mode = r.value, r.mode
        else:
            val, mode = Fraction(0), "exact"
        dom = val <= w if mode == "exact" else None
        if dom is False:
            ok = False
        fibers.append(FiberReport(y, tuple(iter_bits(fmask)), val, mode, w, dom))
        g.append(val)
    scale_Y = max((Y.diam(Fi) for Fi in F), default=Fraction(0))
    integral = None
    integral_ok = None
    if any(v > 0 for v in g) and scale_Y > 0:
        integral = weighted_integral_step(Y, g, t_, scale_Y).value
        integral_ok = integral <= weight_sum
        ok &= integral_ok
    return {
        "s": str(s_), "t": str(t_),
        "delta": "inf" if base.delta is None else base.delta,
        "delta0": "inf" if d0 is None else d0,
        "cover": [tuple(iter_bits(m)) for m in masks],
        "weights": a,
        "fibers": fibers,
        "fiber_partition": sum(len(fr.fiber) for fr in fibers) == popcount(base.E),
        "cover_cost": weight_sum,
        "phi": None if phi is None else phi.value,
        "phi_mode": None if phi is None else phi.mode,
        "weighted_integral": integral,
        "weighted_integral_ok": integral_ok,
        "coarea_constant": _gauge.coarea_constant(s_, t_) if t_.value <= s_.value else None,
        "ok": ok,
    }


# ----------------------------------------------------------------- density

@dataclass
class DensityProfile:
    x: int
    radii: list
    contents: list
    modes: list
    ratios: list
    bounds: list
    reported_min: float
    lip: Fraction
    holds: bool

    def to_json(self) -> dict:
        return {"x": self.x, "radii": self.radii, "contents": self.contents, "modes": self.modes,
                "ratios": self.ratios, "bounds": self.bounds, "reported_min": self.reported_min,
                "lip": self.lip, "holds": self.holds, "kind": "profile"}


def default_radii(space: FiniteMetricSpace, x: int, E: int) -> list:
    """Realized distances from x inside the window [2 eps, diam / 4]."""
    D = space.dist[x]
    lo = 2 * space.eps
    hi = space.diam(E) / 4
    vals = sorted({D[j] for j in iter_bits(E) if lo <= D[j] <= hi and D[j] > 0})
    if not vals:
        r = max(lo, hi)
        vals = [r] if r > 0 else []
    return vals


def lower_density_profile(f: LipschitzMapping, E=None, x: int = 0, radii: Optional[Sequence] = None,
                          t=1, *, _cache: Optional[dict] = None) -> DensityProfile:
    """Ratios H^t_inf(f(B(x, r) & E)) / (omega_t r^t) over a radius window.

    Each ratio is bounded by (L + eps_Y / (2r))^t with L = Lip f, the slack
    coming from the cell inflation of the image diameter.
    """
    q = MappingContentQuery.make(f, E, 1, t, None)
    X, Y = f.domain, f.codomain
    if not q.E >> x & 1:
        raise ValueError("x must lie in E")
    rs = [to_fraction(r) for r in (radii if radii is not None else default_radii(X, x, q.E))]
    if any(r <= 0 for r in rs):
        raise ValueError("radii must be > 0")
    rs = sorted(set(rs))
    cache = {} if _cache is None else _cache
    tq = q.t
    wt = _gauge.omega(tq)
    contents, modes, ratios, bounds = [], [], [], []
    holds = True
    for r in rs:
        img = f.image_mask(X.ball_mask(x, r) & q.E)
        key = (img, tq.mp)
        if key not in cache:
            res = hausdorff_content(Y, img, tq, None)
            whole = _gauge.zeta_q(tq, Y.diam(img))
            cache[key] = (min(res.value, whole), res.mode)
        val, mode = cache[key]
        rf = float(r)
        ratio = float(val) / (wt * rf ** tq.value) if not tq.is_zero else float(val) / wt
        bound = (float(f.lip) + float(Y.eps) / (2 * rf)) ** tq.value
        contents.append(val)
        modes.append(mode)
        ratios.append(ratio)
        bounds.append(bound)
        if ratio > bound * (1 + 1e-9):
            holds = False
    rmin = min(ratios) if ratios else float("nan")
    return DensityProfile(x, rs, contents, modes, ratios, bounds, rmin, f.lip, holds)


# ------------------------------------------------------------------ dyadic

@dataclass(frozen=True)
class DyadicCube:
    level: int
    corner: tuple
    mask: int


def dyadic_grid(level: int, dims: int) -> FiniteMetricSpace:
    """Centers of the level-k dyadic cells of [0,1]^dims, Euclidean, eps = cell diameter.

    In cell mode each dyadic cube's diameter equals the diameter of the points
    it contains, and cubes of one level partition the points.
    """
    if dims < 1 or level < 0:
        raise ValueError("need dims >= 1 and level >= 0")
    if level > MAX_DYADIC_LEVEL or (1 << level) ** dims > 4096:
        raise TooDeep(f"level {level} in dimension {dims} is beyond the cap")
    h = Fraction(1, 1 << level)
    pts = [tuple(h * c + h / 2 for c in idx) for idx in _iproduct(range(1 << level), repeat=dims)]
    eps = Fraction(math.sqrt(dims) * float(h)) if dims > 1 else h
    sp = FiniteMetricSpace.from_coordinates(pts, metric="euclidean", eps=eps,
                                            name=f"dyadic:{level}:{dims}")
    return sp


def _grid_level(X: FiniteMetricSpace) -> tuple[int, int]:
    if X.coords is None:
        raise ValueError("dyadic content needs a dyadic_grid domain")
    dims = len(X.coords[0])
    K = (round(X.n ** (1 / dims))).bit_length() - 1
    if (1 << K) ** dims != X.n:
        raise ValueError("domain is not a full dyadic grid")
    h = Fraction(1, 1 << K)
    for c in X.coords:
        if any((v - h / 2) / h != int((v - h / 2) / h) for v in c):
            raise ValueError("domain points are not dyadic cell centers")
    return K, dims


def dyadic_cubes(X: FiniteMetricSpace) -> list:
    """All dyadic cubes of [0,1]^dims down to the grid level, as DyadicCube objects."""
    K, dims = _grid_level(X)
    h = Fraction(1, 1 << K)
    idx = [tuple(int((v - h / 2) / h) for v in c) for c in X.coords]
    cubes = []
    for k in range(K + 1):
        by = {}
        for p, ix in enumerate(idx):
            key = tuple(v >> (K - k) for v in ix)
            by[key] = by.get(key, 0) | 1 << p
        for key in sorted(by):
            cubes.append(DyadicCube(k, tuple(Fraction(v, 1 << k) for v in key), by[key]))
    return cubes


def mapping_content_dyadic(f: LipschitzMapping, E=None, n=1, m=1) -> ContentResult:
    """(n,m)-mapping content: min sum H^n_inf(f(Q_i)) zeta^m(Q_i) over dyadic covers of E.

    Tree DP on the dyadic hierarchy: a cube meeting E is either used whole or
    replaced by its children; leaf cells must be used whole.
    """
    q = MappingContentQuery.make(f, E, n, m, None)
    X, Y = f.domain, f.codomain
    K, dims = _grid_level(X)
    cubes = dyadic_cubes(X)
    inner = _ImageContents(Y, f.image_mask((1 << X.n) - 1), q.s)
    children: dict = {}
    by_level: dict = {}
    for c in cubes:
        by_level.setdefault(c.level, []).append(c)
    for c in cubes:
        if c.level < K:
            children[c] = [d for d in by_level[c.level + 1] if d.mask & c.mask == d.mask]
    best: dict = {}
    for k in range(K, -1, -1):
        for c in by_level[k]:
            if c.mask & q.E == 0:
                best[c] = (Fraction(0), [])
                continue
            here = inner(f.image_mask(c.mask)) * _gauge.zeta_q(q.t, X.diam(c.mask))
            opt = (here, [c])
            if k < K:
                tot = Fraction(0)
                parts: list = []
                for d in children[c]:
                    v, w = best[d]
                    tot += v
                    parts += w
                if tot < here:
                    opt = (tot, parts)
            best[c] = opt
    root = by_level[0][0]
    val, chosen = best[root]
    witness = [{"level": c.level, "corner": c.corner, "members": tuple(iter_bits(c.mask))} for c in chosen]
    return ContentResult(val, "exact", witness, meta={"level": K, "dims": dims, "cubes": len(cubes)})


def dyadic_bruteforce(f: LipschitzMapping, E=None, n=1, m=1, *, max_cubes: int = 22) -> Fraction:
    """Exhaustive minimum over all sets of dyadic cubes covering E (test oracle)."""
    q = MappingContentQuery.make(f, E, n, m, None)
    X, Y = f.domain, f.codomain
    cubes = [c for c in dyadic_cubes(X) if c.mask & q.E]
    if len(cubes) > max_cubes:
        raise TooLarge("too many cubes for exhaustive search")
    inner = _ImageContents(Y, f.image_mask((1 << X.n) - 1), q.s)
    costs = [inner(f.image_mask(c.mask)) * _gauge.zeta_q(q.t, X.diam(c.mask)) for c in cubes]
    N = len(cubes)
    union = np.zeros(1, dtype=np.int64)
    total = np.zeros(1, dtype=np.float64)
    for c, v in zip(cubes, costs):
        union = np.concatenate([union, union | (c.mask & q.E)])
        total = np.concatenate([total, total + float(v)])
    ok = np.nonzero(union == q.E)[0]
    # exact re-evaluation over the near-optimal float candidates
    fmin = total[ok].min()
    near = ok[total[ok] <= fmin * (1 + 1e-9) + 1e-300]
    best = None
    for S in near:
        v = sum((costs[i] for i in range(N) if int(S) >> i & 1), Fraction(0))
        if best is None or v < best:
            best = v
    return best


def davids_ratio_probe(instances: Sequence) -> dict:
    """Tabulate H^{n,m}_inf / tilde H^{n,m}_inf over (f, E, n, m) instances."""
    rows = []
    for k, inst in enumerate(instances):
        f, E, n, m = inst
        q = MappingContentQuery.make(f, E, n, m, None)
        H = mapping_content_dyadic(f, q.E, n, m)
        T = tilde_content(q)
        P = T.meta["phi"]
        row = {"instance": k, "phi": P, "tilde": T.value, "dyadic": H.value,
               "order_ok": P <= T.value <= H.value}
        if T.value > 0:
            row["ratio"] = H.value / T.value
        elif H.value == 0:
            Y = f.codomain
            tot = Fraction(0)
            for y in range(Y.n):
                fb = f.preimage_mask(y) & q.E
                if fb:
                    c = hausdorff_content(f.domain, fb, q.t, None).value
                    tot += c * hausdorff_content(Y, 1 << y, q.s, None).value
            row["ratio"] = None
            row["zero_case"] = True
            row["weighted_fiber_sum"] = tot
            row["zero_case_ok"] = tot == 0
        else:
            row["ratio"] = float("inf")
        rows.append(row)
    finite = [r["ratio"] for r in rows if r.get("ratio") is not None]
    return {"rows": rows, "max_ratio": max(finite) if finite else None,
            "ok": all(r["order_ok"] and r.get("zero_case_ok", True) and
                      (r["ratio"] is None or r["ratio"] >= 1) for r in rows)}


# ------------------------------------------------------- density report

@dataclass
class AhlforsEstimate:
    C_A: float
    C_B: float
    radii: list
    percentile: float

    def to_json(self) -> dict:
        return {"C_A": self.C_A, "C_B": self.C_B, "radii": self.radii, "percentile": self.percentile}


def ahlfors_estimate(X: FiniteMetricSpace, E: int, s, radii: Sequence, percentile: float = 5.0) -> AhlforsEstimate:
    """Cell-mass ball ratios mu(B(x,r)) / r^s with mu = zeta^s(eps) per point."""
    s = _gauge.as_exponent(s)
    mass = _gauge.zeta(s, float(X.eps))
    vals = []
    for x in iter_bits(E):
        for r in radii:
            cnt = popcount(X.ball_mask(x, r) & E)
            vals.append(cnt * mass / float(r) ** s.value)
    if not vals:
        raise ValueError("empty radius window")
    return AhlforsEstimate(float(np.percentile(vals, percentile)), float(max(vals)),
                           [Fraction(r) for r in radii], percentile)


def theorem30_report(f: LipschitzMapping, E=None, s=1, t=1, *, radii: Optional[Sequence] = None,
                     delta0=None, percentile: float = 5.0) -> dict:
    """Both sides of the Ahlfors-regular coarea estimate at the grid scale.

    LHS = sum_y H^{s-t}_{delta0}(fiber y) zeta^t(eps_Y); RHS = sum_x profile-min(x)
    zeta^s(eps_X) omega_{s-t} omega_t / C_A.  A numerical experiment: nothing is
    asserted about the two sides.
    """
    q = MappingContentQuery.make(f, E, s, t, None)
    X, Y = f.domain, f.codomain
    u = q.s - q.t
    d0 = X.eps if delta0 is None else _delta(delta0)
    if d0 is not None and d0 == 0:
        d0 = None
    pts = list(iter_bits(q.E))
    if radii is None:
        lo = 2 * X.eps if X.eps > 0 else min((X.dist[i][j] for i in pts for j in pts if i != j),
                                             default=Fraction(1))
        hi = X.diam(q.E) / 4
        radii = sorted({X.dist[i][j] for i in pts for j in pts if lo <= X.dist[i][j] <= hi})
        if not radii:
            radii = [max(lo, hi)]
    radii = [to_fraction(r) for r in radii]
    est = ahlfors_estimate(X, q.E, q.s, radii, percentile)
    cache: dict = {}
    mass_X = _gauge.zeta(q.s, float(X.eps))
    cst = _gauge.omega(u) * _gauge.omega(q.t)
    rhs = 0.0
    for x in pts:
        prof = lower_density_profile(f, q.E, x, radii, q.t, _cache=cache)
        rhs += prof.reported_min * mass_X
    rhs = rhs * cst / est.C_A if est.C_A > 0 else float("inf")
    mass_Y = _gauge.zeta(q.t, float(Y.eps))
    lhs = 0.0
    fibers = []
    for y in range(Y.n):
        fb = f.preimage_mask(y) & q.E
        if not fb:
            continue
        r = hausdorff_content(X, fb, u, d0)
        fibers.append({"y": y, "content": r.value, "mode": r.mode})
        lhs += float(r.value) * mass_Y
    return {
        "kind": "estimate",
        "ahlfors": est,
        "lhs": lhs,
        "rhs": rhs,
        "ratio": lhs / rhs if rhs > 0 else None,
        "fibers": fibers,
        "delta0": "inf" if d0 is None else d0,
        "cell_mass_X": mass_X,
        "cell_mass_Y": mass_Y,
    }


def phi_zero_scale_check(f: LipschitzMapping, E=None, s=1, t=1, *, exact_cap: int = DEFAULT_EXACT_CAP) -> dict:
    """Phi_inf = 0 exactly when Phi_delta = 0 at every realized scale."""
    q = MappingContentQuery.make(f, E, s, t, None)
    X = f.domain
    pts = list(iter_bits(q.E))
    grid = sorted({X.diam((1 << i) | (1 << j)) for i in pts for j in pts} - {Fraction(0)})
    values = {}
    at_inf = phi_content(q, exact_cap=exact_cap)
    exact = at_inf.mode == "exact"
    for d in grid:
        r = phi_content(MappingContentQuery(f, q.E, q.s, q.t, d), exact_cap=exact_cap)
        values[d] = r.value
        exact &= r.mode == "exact"
    zero_inf = at_inf.value == 0
    zero_all = all(v == 0 for v in values.values())
    holds = zero_inf == zero_all
    if exact and not holds:
        raise AssertionError("zero-scale equivalence failed on an exact instance")
    return {"phi_inf": at_inf.value, "scales": values, "zero_at_inf": zero_inf,
            "zero_at_all": zero_all, "holds": holds, "exact": exact}
