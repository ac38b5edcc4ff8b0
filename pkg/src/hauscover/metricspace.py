"""Finite metric spaces, point subsets, balls, diameters and Lipschitz maps.

Distances are held as exact rationals.  Generators that produce rational
coordinates (Cantor samples, grids, sup-metric products) stay exact; Euclidean
distances with irrational values are converted from their double value and
then closed under shortest paths so the triangle inequality holds exactly on
the stored numbers.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import product as _iproduct
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

__all__ = [
    "MetricAxiomError",
    "NonSymmetric",
    "NegativeDistance",
    "NonzeroDiagonal",
    "TriangleViolation",
    "SizeLimit",
    "PointSubset",
    "FiniteMetricSpace",
    "ValidationReport",
    "LipschitzMapping",
    "validate",
    "closed_ball",
    "diam",
    "generate",
    "parse_space_spec",
    "cantor",
    "sierpinski_carpet",
    "grid",
    "random_points",
    "product",
    "projection",
    "lipschitz_constant",
    "doubling_probe",
    "to_fraction",
    "DEFAULT_SIZE_CAP",
]

DEFAULT_SIZE_CAP = 4096
TRIANGLE_RTOL = 1e-9
_CLOSURE_CAP = 1024


class MetricAxiomError(ValueError):
    """A distance matrix violates a metric axiom; ``indices`` is the witness."""

    def __init__(self, message: str, indices: tuple):
        super().__init__(message)
        self.indices = tuple(indices)


class NonSymmetric(MetricAxiomError):
    pass


class NegativeDistance(MetricAxiomError):
    pass


class NonzeroDiagonal(MetricAxiomError):
    pass


class TriangleViolation(MetricAxiomError):
    pass


class SizeLimit(ValueError):
    """The requested space would exceed the configured point cap."""


def to_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not lengths")
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite length {x}")
        return Fraction(float(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, dict) and "num" in x:
        return Fraction(int(x["num"]), int(x["den"]))
    return Fraction(x)


@dataclass(frozen=True)
class PointSubset:
    """A subset of a space's points stored as an integer bitmask."""

    mask: int
    n: int

    def __post_init__(self):
        if self.mask < 0 or self.mask >> self.n:
            raise ValueError(f"mask has bits outside [0, {self.n})")

    @classmethod
    def from_indices(cls, indices: Iterable[int], n: int) -> "PointSubset":
        m = 0
        for i in indices:
            i = int(i)
            if not 0 <= i < n:
                raise IndexError(f"point index {i} out of range for {n} points")
            m |= 1 << i
        return cls(m, n)

    @classmethod
    def full(cls, n: int) -> "PointSubset":
        return cls((1 << n) - 1, n)

    @classmethod
    def empty(cls, n: int) -> "PointSubset":
        return cls(0, n)

    def indices(self) -> tuple[int, ...]:
        return tuple(iter_bits(self.mask))

    def __iter__(self) -> Iterator[int]:
        return iter_bits(self.mask)

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __bool__(self) -> bool:
        return self.mask != 0

    def __contains__(self, i: int) -> bool:
        return bool(self.mask >> i & 1)

    def _check(self, other: "PointSubset"):
        if other.n != self.n:
            raise ValueError("subsets of different spaces")

    def __or__(self, other: "PointSubset") -> "PointSubset":
        self._check(other)
        return PointSubset(self.mask | other.mask, self.n)

    def __and__(self, other: "PointSubset") -> "PointSubset":
        self._check(other)
        return PointSubset(self.mask & other.mask, self.n)

    def __sub__(self, other: "PointSubset") -> "PointSubset":
        self._check(other)
        return PointSubset(self.mask & ~other.mask, self.n)

    def issubset(self, other: "PointSubset") -> bool:
        return self.mask & ~other.mask == 0

    def isdisjoint(self, other: "PointSubset") -> bool:
        return self.mask & other.mask == 0

    def __repr__(self) -> str:
        return f"PointSubset({list(self.indices())})"


def iter_bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def _as_mask(subset, n: int) -> int:
    if isinstance(subset, PointSubset):
        if subset.n != n:
            raise ValueError("subset belongs to a space of different size")
        return subset.mask
    if isinstance(subset, int):
        return subset
    return PointSubset.from_indices(subset, n).mask


@dataclass(frozen=True, eq=False)
class FiniteMetricSpace:
    """Points with an exact symmetric distance matrix and a cell resolution.

    ``eps > 0`` selects cell mode: every sample point stands for a cell of
    diameter ``eps`` and nonempty diameters are inflated by ``eps``.
    """

    points: tuple
    dist: tuple  # tuple of tuples of Fraction
    eps: Fraction = Fraction(0)
    coords: Optional[tuple] = None
    factors: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        n = len(self.points)
        if len(self.dist) != n or any(len(row) != n for row in self.dist):
            raise ValueError("distance matrix must be square and match the point count")
        object.__setattr__(self, "eps", to_fraction(self.eps))
        if self.eps < 0:
            raise ValueError("resolution eps must be >= 0")

    @classmethod
    def from_matrix(cls, points: Sequence, dist, eps=0, *, check: bool = True, name: str = "",
                    coords=None, factors=None) -> "FiniteMetricSpace":
        rows = tuple(tuple(to_fraction(v) for v in row) for row in dist)
        space = cls(tuple(points), rows, to_fraction(eps), coords, factors, name)
        if check:
            validate(space).raise_for_violation()
        return space

    @classmethod
    def from_coordinates(cls, coords, *, metric: str = "euclidean", eps=0, points=None,
                         name: str = "", check: bool = False) -> "FiniteMetricSpace":
        cs = tuple(tuple(to_fraction(c) for c in row) for row in coords)
        n = len(cs)
        inexact = False
        rows = [[Fraction(0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                d, exact = _coord_distance(cs[i], cs[j], metric)
                inexact |= not exact
                rows[i][j] = rows[j][i] = d
        if inexact and n <= _CLOSURE_CAP:
            rows = _metric_closure(rows)
        labels = tuple(points) if points is not None else tuple(
            _coord_label(c) for c in cs)
        space = cls(labels, tuple(tuple(r) for r in rows), to_fraction(eps), cs, None, name)
        if check:
            validate(space).raise_for_violation()
        return space

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def cell_mode(self) -> bool:
        return self.eps > 0

    @cached_property
    def _scale(self) -> int:
        den = 1
        for row in self.dist:
            for v in row:
                den = math.lcm(den, v.denominator)
        return den

    @cached_property
    def idist(self) -> tuple:
        """Distances scaled to a common denominator, as Python ints."""
        s = self._scale
        return tuple(tuple(v.numerator * (s // v.denominator) for v in row) for row in self.dist)

    @cached_property
    def fdist(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.dist], dtype=float)

    def full(self) -> PointSubset:
        return PointSubset.full(self.n)

    def subset(self, indices: Iterable[int]) -> PointSubset:
        return PointSubset.from_indices(indices, self.n)

    def point_diam(self, subset) -> Fraction:
        """Max pairwise distance, ignoring the cell convention."""
        return Fraction(self._point_diam_int(_as_mask(subset, self.n)), self._scale)

    def _point_diam_int(self, mask: int) -> int:
        cache = self.__dict__.setdefault("_pdiam_cache", {})
        hit = cache.get(mask)
        if hit is not None:
            return hit
        idx = list(iter_bits(mask))
        best = 0
        D = self.idist
        for a in range(len(idx)):
            row = D[idx[a]]
            for b in idx[a + 1:]:
                if row[b] > best:
                    best = row[b]
        if len(cache) < 1 << 20:
            cache[mask] = best
        return best

    def diam(self, subset) -> Fraction:
        mask = _as_mask(subset, self.n)
        if mask == 0:
            return Fraction(0)
        return self.point_diam(mask) + self.eps

    def ball_mask(self, center: int, r) -> int:
        r = to_fraction(r)
        if r < 0:
            raise ValueError("radius must be >= 0")
        if not 0 <= center < self.n:
            raise IndexError(f"center {center} out of range")
        row = self.idist[center]
        s = self._scale
        num, den = r.numerator, r.denominator
        m = 0
        for j, d in enumerate(row):
            if d * den <= num * s:
                m |= 1 << j
        return m

    def with_resolution(self, eps) -> "FiniteMetricSpace":
        return FiniteMetricSpace(self.points, self.dist, to_fraction(eps), self.coords,
                                 self.factors, self.name)

    def to_json(self) -> dict:
        from .serialize import frac_to_json  # local: serialize imports this module
        return {
            "points": [str(p) for p in self.points],
            "dist": [[frac_to_json(v) for v in row] for row in self.dist],
            "eps": frac_to_json(self.eps),
        }

    @classmethod
    def from_json(cls, data: dict, *, check: bool = True) -> "FiniteMetricSpace":
        try:
            points = data["points"]
            dist = data["dist"]
        except (KeyError, TypeError) as exc:
            raise ValueError("space JSON needs 'points' and 'dist'") from exc
        return cls.from_matrix(points, dist, data.get("eps", 0), check=check,
                               name=data.get("name", ""))

    def __repr__(self) -> str:
        tag = self.name or "space"
        return f"FiniteMetricSpace({tag}, n={self.n}, eps={self.eps})"


def _coord_label(c) -> str:
    return "(" + ",".join(str(x) for x in c) + ")" if len(c) > 1 else str(c[0])


def _coord_distance(a, b, metric: str) -> tuple[Fraction, bool]:
    diffs = [abs(x - y) for x, y in zip(a, b)]
    if metric == "sup":
        return max(diffs, default=Fraction(0)), True
    if metric in ("l1", "manhattan"):
        return sum(diffs, Fraction(0)), True
    if metric != "euclidean":
        raise ValueError(f"unknown metric {metric!r}")
    sq = sum((x * x for x in diffs), Fraction(0))
    rn, rd = math.isqrt(sq.numerator), math.isqrt(sq.denominator)
    if rn * rn == sq.numerator and rd * rd == sq.denominator:
        return Fraction(rn, rd), True
    return Fraction(math.sqrt(float(sq))), False


def _metric_closure(rows: list) -> list:
    """Shortest-path closure; moves rounded distances by at most an ulp."""
    n = len(rows)
    den = 1
    for row in rows:
        for v in row:
            den = math.lcm(den, v.denominator)
    D = np.array([[v.numerator * (den // v.denominator) for v in row] for row in rows], dtype=object)
    for k in range(n):
        via = D[:, k:k + 1] + D[k:k + 1, :]
        D = np.where(via < D, via, D)
    return [[Fraction(int(D[i, j]), den) for j in range(n)] for i in range(n)]


@dataclass
class ValidationReport:
    ok: bool
    violation: Optional[MetricAxiomError] = None

    def raise_for_violation(self) -> None:
        if self.violation is not None:
            raise self.violation

    def to_json(self) -> dict:
        if self.ok:
            return {"ok": True}
        return {"ok": False, "error": type(self.violation).__name__,
                "indices": list(self.violation.indices), "message": str(self.violation)}


def validate(space: FiniteMetricSpace) -> ValidationReport:
    """Check the metric axioms; report the first violation with its witness."""
    n = space.n
    D = space.dist
    for i in range(n):
        if D[i][i] != 0:
            return ValidationReport(False, NonzeroDiagonal(f"d({i},{i}) = {D[i][i]} != 0", (i,)))
    for i in range(n):
        for j in range(n):
            if D[i][j] < 0:
                return ValidationReport(False, NegativeDistance(f"d({i},{j}) < 0", (i, j)))
            if D[i][j] != D[j][i]:
                return ValidationReport(False, NonSymmetric(f"d({i},{j}) != d({j},{i})", (i, j)))
    F = space.fdist
    for j in range(n):
        # d(i,k) <= d(i,j) + d(j,k), relative tolerance
        via = F[:, j:j + 1] + F[j:j + 1, :]
        bad = F > via * (1 + TRIANGLE_RTOL) + 0.0
        if bad.any():
            i, k = map(int, np.argwhere(bad)[0])
            return ValidationReport(False, TriangleViolation(
                f"d({i},{k}) > d({i},{j}) + d({j},{k})", (i, j, k)))
    return ValidationReport(True)


def closed_ball(space: FiniteMetricSpace, center: int, r) -> PointSubset:
    return PointSubset(space.ball_mask(center, r), space.n)


def diam(space: FiniteMetricSpace, subset) -> Fraction:
    return space.diam(subset)


# ---------------------------------------------------------------- generators

def _cap(n: int, cap: int):
    if n > cap:
        raise SizeLimit(f"{n} points exceeds the cap of {cap}")


def cantor(k: int, *, size_cap: int = DEFAULT_SIZE_CAP) -> FiniteMetricSpace:
    """Left endpoints of the 2^k level-k middle-thirds intervals, eps = 3^-k."""
    if k < 0:
        raise ValueError("level must be >= 0")
    _cap(2 ** k, size_cap)
    pts = [Fraction(0)]
    for level in range(1, k + 1):
        step = Fraction(2, 3 ** level)
        pts = [p for x in pts for p in (x, x + step)]
    pts.sort()
    return FiniteMetricSpace.from_coordinates([(p,) for p in pts], metric="euclidean",
                                              eps=Fraction(1, 3 ** k), name=f"cantor:{k}")


def sierpinski_carpet(k: int, *, size_cap: int = DEFAULT_SIZE_CAP) -> FiniteMetricSpace:
    """Lower-left corners of the 8^k retained level-k squares, eps = sqrt(2) 3^-k."""
    if k < 0:
        raise ValueError("level must be >= 0")
    _cap(8 ** k, size_cap)
    corners = [(Fraction(0), Fraction(0))]
    for level in range(1, k + 1):
        h = Fraction(1, 3 ** level)
        corners = [(x + a * h, y + b * h) for (x, y) in corners
                   for a in range(3) for b in range(3) if (a, b) != (1, 1)]
    corners.sort()
    eps = Fraction(math.sqrt(2) / 3 ** k)
    return FiniteMetricSpace.from_coordinates(corners, metric="euclidean", eps=eps,
                                              name=f"carpet:{k}")


def grid(n: int, dims: int = 1, *, spacing=1, eps=0, metric: str = "euclidean",
         size_cap: int = DEFAULT_SIZE_CAP) -> FiniteMetricSpace:
    """The lattice {0, h, ..., (n-1)h}^dims."""
    if n < 1 or dims < 1:
        raise ValueError("grid needs n >= 1 and dims >= 1")
    _cap(n ** dims, size_cap)
    h = to_fraction(spacing)
    pts = [tuple(h * c for c in idx) for idx in _iproduct(range(n), repeat=dims)]
    return FiniteMetricSpace.from_coordinates(pts, metric=metric, eps=eps,
                                              name=f"grid:{n}:{dims}")


def random_points(n: int, dims: int, seed: int, *, denominator: int = 1000,
                  metric: str = "euclidean", eps=0,
                  size_cap: int = DEFAULT_SIZE_CAP) -> FiniteMetricSpace:
    """Uniform points of [0,1]^dims on the lattice (1/denominator) Z^dims."""
    if n < 1 or dims < 1:
        raise ValueError("random_points needs n >= 1 and dims >= 1")
    _cap(n, size_cap)
    rng = np.random.default_rng(seed)
    raw = rng.integers(0, denominator + 1, size=(n, dims))
    pts = [tuple(Fraction(int(v), denominator) for v in row) for row in raw]
    return FiniteMetricSpace.from_coordinates(pts, metric=metric, eps=eps,
                                              name=f"random:{n}:{dims}:seed={seed}")


def product(X: FiniteMetricSpace, Y: FiniteMetricSpace, *,
            size_cap: int = DEFAULT_SIZE_CAP) -> FiniteMetricSpace:
    """Sup-metric product; point (a, b) has index a * |Y| + b."""
    _cap(X.n * Y.n, size_cap)
    nx, ny = X.n, Y.n
    pts = tuple((X.points[a], Y.points[b]) for a in range(nx) for b in range(ny))
    rows = []
    for a in range(nx):
        for b in range(ny):
            rows.append(tuple(max(X.dist[a][c], Y.dist[b][d])
                              for c in range(nx) for d in range(ny)))
    coords = None
    if X.coords is not None and Y.coords is not None:
        coords = tuple(X.coords[a] + Y.coords[b] for a in range(nx) for b in range(ny))
    return FiniteMetricSpace(pts, tuple(rows), max(X.eps, Y.eps), coords, (X, Y),
                             f"{X.name}*{Y.name}")


_KW = re.compile(r"^(\w+)=(.+)$")


def parse_space_spec(spec: str, *, size_cap: int = DEFAULT_SIZE_CAP) -> FiniteMetricSpace:
    """Build a space from a spec string such as ``cantor:3`` or ``cantor:2*grid:4``.

    Forms: ``cantor:k``, ``carpet:k``, ``grid:n[:dims]``, ``random:n:dims:seed=S``;
    trailing ``key=value`` fields set ``spacing``, ``eps``, ``metric``, ``seed``
    or ``denominator``.  ``*`` joins factors of a sup-metric product.
    """
    parts = [p.strip() for p in spec.split("*")]
    spaces = [_parse_single(p, size_cap) for p in parts]
    out = spaces[0]
    for other in spaces[1:]:
        out = product(out, other, size_cap=size_cap)
    return out


def _parse_single(spec: str, size_cap: int) -> FiniteMetricSpace:
    fields = [f for f in spec.split(":") if f]
    if not fields:
        raise ValueError("empty space spec")
    kind = fields[0].lower()
    pos, kw = [], {}
    for f in fields[1:]:
        m = _KW.match(f)
        if m:
            kw[m.group(1)] = m.group(2)
        else:
            pos.append(f)
    try:
        if kind == "cantor":
            return cantor(int(pos[0]), size_cap=size_cap)
        if kind in ("carpet", "sierpinski", "sierpinski_carpet"):
            return sierpinski_carpet(int(pos[0]), size_cap=size_cap)
        if kind == "grid":
            dims = int(pos[1]) if len(pos) > 1 else int(kw.get("dims", 1))
            return grid(int(pos[0]), dims, spacing=Fraction(kw.get("spacing", "1")),
                        eps=Fraction(kw.get("eps", "0")), metric=kw.get("metric", "euclidean"),
                        size_cap=size_cap)
        if kind in ("random", "random_points"):
            seed = kw.get("seed", pos[2] if len(pos) > 2 else None)
            if seed is None:
                raise ValueError("random spaces need a seed")
            return random_points(int(pos[0]), int(pos[1]) if len(pos) > 1 else 2, int(seed),
                                 denominator=int(kw.get("denominator", 1000)),
                                 metric=kw.get("metric", "euclidean"),
                                 eps=Fraction(kw.get("eps", "0")), size_cap=size_cap)
    except IndexError as exc:
        raise ValueError(f"space spec {spec!r} is missing a parameter") from exc
    raise ValueError(f"unknown space kind {kind!r}")


def generate(spec, **kwargs) -> FiniteMetricSpace:
    """Generator entry point accepting a spec string or a ``(kind, *args)`` tuple."""
    if isinstance(spec, str):
        return parse_space_spec(spec, **kwargs)
    kind, *args = spec
    table = {"cantor": cantor, "sierpinski_carpet": sierpinski_carpet, "carpet": sierpinski_carpet,
             "grid": grid, "random_points": random_points, "product": product}
    if kind not in table:
        raise ValueError(f"unknown generator {kind!r}")
    return table[kind](*args, **kwargs)


# ------------------------------------------------------------- Lipschitz maps

@dataclass(frozen=True, eq=False)
class LipschitzMapping:
    """A point-to-point map between finite spaces with its exact Lipschitz constant."""

    domain: FiniteMetricSpace
    codomain: FiniteMetricSpace
    image: tuple
    lip: Fraction = field(init=False)

    def __post_init__(self):
        img = tuple(int(i) for i in self.image)
        if len(img) != self.domain.n:
            raise ValueError("image must list one codomain index per domain point")
        if any(not 0 <= i < self.codomain.n for i in img):
            raise IndexError("image index outside the codomain")
        object.__setattr__(self, "image", img)
        object.__setattr__(self, "lip", lipschitz_constant(self.domain, self.codomain, img))

    def __call__(self, i: int) -> int:
        return self.image[i]

    def image_mask(self, subset) -> int:
        mask = _as_mask(subset, self.domain.n)
        cache = self.__dict__.setdefault("_img_cache", {})
        hit = cache.get(mask)
        if hit is None:
            hit = 0
            for i in iter_bits(mask):
                hit |= 1 << self.image[i]
            cache[mask] = hit
        return hit

    def image_of(self, subset) -> PointSubset:
        return PointSubset(self.image_mask(subset), self.codomain.n)

    def preimage_mask(self, y: int) -> int:
        m = 0
        for i, v in enumerate(self.image):
            if v == y:
                m |= 1 << i
        return m

    def to_json(self) -> dict:
        return {"domain": self.domain.name, "codomain": self.codomain.name,
                "image": list(self.image)}


def lipschitz_constant(domain: FiniteMetricSpace, codomain: FiniteMetricSpace,
                       image: Sequence[int]) -> Fraction:
    """Exact max of d_Y(f(i), f(j)) / d_X(i, j) over pairs; 0 below two points."""
    best = Fraction(0)
    n = domain.n
    DX, DY = domain.dist, codomain.dist
    for i in range(n):
        for j in range(i + 1, n):
            dy = DY[image[i]][image[j]]
            if dy == 0:
                continue
            dx = DX[i][j]
            if dx == 0:
                raise ValueError(f"points {i},{j} coincide but their images differ: not Lipschitz")
            r = dy / dx
            if r > best:
                best = r
    return best


def projection(space: FiniteMetricSpace, axis: int) -> LipschitzMapping:
    """Coordinate projection of a product space onto one of its two factors."""
    if space.factors is None:
        raise ValueError("projection needs a product space")
    X, Y = space.factors
    ny = Y.n
    image = [i // ny if axis == 0 else i % ny for i in range(space.n)]
    return LipschitzMapping(space, space.factors[axis], tuple(image))


def doubling_probe(space: FiniteMetricSpace, radii: Optional[Sequence] = None,
                   max_radii: int = 32) -> int:
    """Greedy upper estimate of the metric-doubling constant.

    For each center and radius, the ball is covered greedily by balls of half
    the radius centred at its lowest uncovered point; the largest count seen
    is returned.  This bounds the true constant from neither side exactly.
    """
    n = space.n
    if n == 1:
        return 1
    if radii is None:
        vals = sorted({v for row in space.dist for v in row if v > 0})
        if len(vals) > max_radii:
            step = (len(vals) - 1) / (max_radii - 1)
            vals = [vals[round(i * step)] for i in range(max_radii)]
        radii = vals
    best = 1
    for r in radii:
        r = to_fraction(r)
        half = r / 2
        halves = [space.ball_mask(c, half) for c in range(n)]
        for x in range(n):
            left = space.ball_mask(x, r)
            count = 0
            while left:
                p = (left & -left).bit_length() - 1
                left &= ~halves[p]
                count += 1
            best = max(best, count)
    return best
