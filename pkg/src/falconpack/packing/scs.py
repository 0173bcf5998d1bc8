"""Greedy shortest-common-superstring arrangement of zero-padded filters.

A padded depthwise filter ``i`` out of ``C`` is the slot pattern
``0^(C-1-i) W_i 0^i``.  Patterns are tuples whose entries are ``0`` for a
zero channel slot and ``i + 1`` for the slot holding ``W_i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

Pattern = tuple[int, ...]


def depthwise_patterns(c: int) -> list[Pattern]:
    if c < 1:
        raise ValueError("need at least one filter")
    return [(0,) * (c - 1 - i) + (i + 1,) + (0,) * i for i in range(c)]


def overlap(a: Sequence[int], b: Sequence[int]) -> int:
    """Longest proper suffix of ``a`` that is also a prefix of ``b``."""
    for k in range(min(len(a), len(b)) - 1, 0, -1):
        if tuple(a[-k:]) == tuple(b[:k]):
            return k
    return 0


@dataclass(frozen=True)
class FilterArrangement:
    order: tuple[int, ...]        # filters by increasing start slot
    start_slot: tuple[int, ...]   # per filter, where its pattern starts
    total_slots: int              # superstring length, untrimmed
    superstring: Pattern

    @property
    def leading_zeros(self) -> int:
        return next((i for i, v in enumerate(self.superstring) if v), len(self.superstring))

    def weight_slot(self, i: int, c: int | None = None) -> int:
        """Slot of the nonzero entry of filter ``i`` (patterns of width ``c``)."""
        c = len(self.start_slot) if c is None else c
        return self.start_slot[i] + c - 1 - i


def _leading_zeros(s: Pattern) -> int:
    return next((i for i, v in enumerate(s) if v), len(s))


def greedy_scs_arrange(filters: Sequence[Sequence[int]]) -> FilterArrangement:
    """Merge along the heaviest overlap edge until no positive edge remains.

    Ties go to the lexicographically smallest (source, dest) pair of current
    node positions; the merged node takes the source's position.  Leftover
    nodes are concatenated with the fewest leading zeros first.
    """
    if not filters:
        raise ValueError("empty filter list")
    # node = (string, {filter: start offset within string})
    nodes: list[tuple[Pattern, dict[int, int]]] = [
        (tuple(f), {i: 0}) for i, f in enumerate(filters)]
    while len(nodes) > 1:
        best, pick = 0, None
        for i, (si, _) in enumerate(nodes):
            for j, (sj, _) in enumerate(nodes):
                if i != j:
                    w = overlap(si, sj)
                    if w > best:
                        best, pick = w, (i, j)
        if pick is None:
            break
        i, j = pick
        (si, mi), (sj, mj) = nodes[i], nodes[j]
        shift = len(si) - best
        merged = {**mi, **{f: shift + off for f, off in mj.items()}}
        nodes[i] = (si + sj[best:], merged)
        del nodes[j]
    nodes.sort(key=lambda node: _leading_zeros(node[0]))
    string: Pattern = ()
    starts: dict[int, int] = {}
    for s, members in nodes:
        for f, off in members.items():
            starts[f] = len(string) + off
        string += s
    start = tuple(starts[i] for i in range(len(filters)))
    order = tuple(sorted(range(len(filters)), key=lambda f: start[f]))
    return FilterArrangement(order=order, start_slot=start, total_slots=len(string),
                             superstring=string)


def embeds(arr: FilterArrangement, filters: Sequence[Sequence[int]]) -> bool:
    """Every pattern occurs at its start slot."""
    s = arr.superstring
    return all(tuple(s[p:p + len(f)]) == tuple(f) for p, f in zip(arr.start_slot, filters))
