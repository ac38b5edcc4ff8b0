"""Maximal cliques of threshold graphs (Bron-Kerbosch with pivoting on bitmasks)."""
from __future__ import annotations

from typing import Iterator, Sequence

from .metricspace import iter_bits, popcount

__all__ = ["FamilyBlowup", "maximal_cliques", "threshold_adjacency"]


class FamilyBlowup(RuntimeError):
    """Clique enumeration produced more candidates than the configured cap."""


def threshold_adjacency(idist: Sequence[Sequence[int]], members: Sequence[int], cut: int) -> dict:
    """Adjacency bitmasks of G_d on ``members``: i ~ j iff d(i, j) <= cut (scaled ints)."""
    adj = {}
    for i in members:
        row = idist[i]
        m = 0
        for j in members:
            if j != i and row[j] <= cut:
                m |= 1 << j
        adj[i] = m
    return adj


def maximal_cliques(adj: dict, vertices: int) -> Iterator[int]:
    """Yield every maximal clique inside the vertex mask ``vertices``."""
    stack = [(0, vertices, 0)]
    while stack:
        R, P, X = stack.pop()
        if P == 0:
            if X == 0:
                yield R
            continue
        # pivot maximising |P & N(u)| keeps the branching small
        u = max(iter_bits(P | X), key=lambda w: popcount(P & adj[w]))
        for v in iter_bits(P & ~adj[u]):
            bit = 1 << v
            stack.append((R | bit, P & adj[v], X & adj[v]))
            P &= ~bit
            X |= bit
