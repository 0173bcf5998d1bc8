"""Channel-slot layouts for zero-aware packing of depthwise and group filters.

A weight polynomial is a sequence of channel slots, each ``unit * HW``
coefficients wide (``unit = G**2``; 1 for depthwise).  Filter number ``c'``
of a piece sits at ``slot`` and serves input unit ``channel`` of the block;
its outputs are read at slot ``slot + channel``.  Correctness needs the
window ``[slot - (C_x - 1 - channel), slot + channel]`` to hold no other
filter's weights.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

from ..exceptions import CapacityError, GeometryError, InfeasibleError
from ..tensor import ConvDims

SCHEMES = ("falcon_dw", "falcon_group")


def offset(c_prime: int, c_x: int, c_w: int) -> int:
    """Channel-slot of filter ``c_prime`` in the canonical paired arrangement.

    Filters ``c'`` and ``C_w - 1 - c'`` are merged so that their padding
    zeros overlap; the first half lands after the second half's pattern.
    """
    if c_w < 1 or (c_w > 1 and c_w % 2):
        raise GeometryError(f"C_w must be 1 or even, got {c_w}")
    if c_x < c_w or c_x % c_w:
        raise GeometryError(f"C_x={c_x} is not a positive multiple of C_w={c_w}")
    if not 0 <= c_prime < c_w:
        raise GeometryError(f"filter index {c_prime} outside [0, {c_w})")
    if 2 * c_prime >= c_w:
        return (c_x + 2) * (c_w - 1 - c_prime)
    return c_x + c_prime * (c_x + 1)


def superstring_length(c_x: int, c_w: int) -> int:
    """Slots spanned by one weight polynomial of the canonical arrangement."""
    if c_w == 1:
        return c_x
    return c_x + 1 + (c_w // 2 - 1) * (c_x + 2)


@dataclass(frozen=True)
class FilterSlot:
    filter: int   # local index c' inside the weight polynomial
    channel: int  # input unit inside the block this filter convolves
    slot: int     # channel-slot of the filter's weights


@dataclass(frozen=True)
class PackingLayout:
    """Planned tiling plus the slot table of every weight polynomial piece.

    ``c_x`` and ``c_w`` count packing units: channels for depthwise, whole
    groups (``G`` kernels over ``G**2`` channel slots) for group convolution.
    """

    scheme: str
    dims: ConvDims
    n: int
    c_x: int
    c_w: int
    pieces: tuple[tuple[FilterSlot, ...], ...]

    @property
    def k(self) -> int:
        return self.c_x // self.c_w

    @property
    def unit(self) -> int:
        """Channel slots per packing unit."""
        return self.dims.G ** 2

    @property
    def units(self) -> int:
        return self.dims.groups

    @property
    def unit_coeffs(self) -> int:
        return self.unit * self.dims.hw

    @property
    def n_x(self) -> int:
        return math.ceil(self.units / self.c_x)

    @property
    def n_w(self) -> int:
        return math.ceil(self.units / self.c_w)

    @property
    def slot_count(self) -> int:
        return max(max(f.slot + f.channel for f in piece) + 1 for piece in self.pieces)

    def block_units(self, block: int) -> int:
        """Real (non-padding) units in input block ``block``."""
        return min(self.c_x, self.units - block * self.c_x)

    def products(self) -> list[tuple[int, int]]:
        """(block, piece) pairs that touch at least one real unit."""
        out = []
        for b in range(self.n_x):
            real = self.block_units(b)
            for p, piece in enumerate(self.pieces):
                if any(f.channel < real for f in piece):
                    out.append((b, p))
        return out

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme, "dims": self.dims.to_dict(), "N": self.n,
            "C_x": self.c_x, "C_w": self.c_w, "k": self.k, "n_x": self.n_x, "n_w": self.n_w,
            "slots": [[{"filter": f.filter, "channel": f.channel, "slot": f.slot} for f in piece]
                      for piece in self.pieces],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "PackingLayout":
        pieces = tuple(tuple(FilterSlot(**f) for f in piece) for piece in obj["slots"])
        layout = cls(scheme=obj["scheme"], dims=ConvDims(**obj["dims"]), n=obj["N"],
                     c_x=obj["C_x"], c_w=obj["C_w"], pieces=pieces)
        check_layout(layout)
        return layout


def canonical_pieces(c_x: int, c_w: int) -> tuple[tuple[FilterSlot, ...], ...]:
    """Slot tables for the ``k = C_x / C_w`` weight polynomials.

    The arrangement for all ``C_x`` filters is cut into ``k`` runs of
    ``C_w / 2`` merged pairs; each run is shifted down to start at slot 0.
    Piece 0 coincides with ``offset``.
    """
    offset(0, c_x, c_w)  # validates the pair
    k = c_x // c_w
    if c_w == 1:
        return tuple((FilterSlot(0, p, 0),) for p in range(k))
    half = c_w // 2
    pieces = []
    for p in range(k):
        slots = []
        for cp in range(c_w):
            if cp < half:
                pair = p * half + cp
                slots.append(FilterSlot(cp, pair, (c_x + 2) * cp + c_x - pair))
            else:
                local = c_w - 1 - cp
                pair = p * half + local
                slots.append(FilterSlot(cp, c_x - 1 - pair, (c_x + 2) * local))
        pieces.append(tuple(slots))
    return tuple(pieces)


def check_layout(layout: PackingLayout) -> None:
    """Raise unless every piece is collision-free and fits in N coefficients."""
    hw_unit = layout.unit_coeffs
    if layout.dims.hw > layout.n:
        raise CapacityError(f"HW={layout.dims.hw} exceeds N={layout.n}; spatial tiling unsupported")
    if layout.c_x * hw_unit > layout.n:
        raise CapacityError(
            f"input block needs {layout.c_x * hw_unit} coefficients, N={layout.n}")
    for piece in layout.pieces:
        channels = [f.channel for f in piece]
        if len(set(channels)) != len(channels) or not all(0 <= c < layout.c_x for c in channels):
            raise GeometryError("piece assigns a channel twice or out of range")
        for f in piece:
            lo, hi = f.slot - (layout.c_x - 1 - f.channel), f.slot + f.channel
            for other in piece:
                if other is not f and lo <= other.slot <= hi:
                    raise GeometryError(
                        f"filter {other.filter} at slot {other.slot} collides with the "
                        f"window [{lo}, {hi}] of filter {f.filter}")
    if layout.slot_count * hw_unit > layout.n:
        raise CapacityError(
            f"weight polynomial spans {layout.slot_count} slots of {hw_unit} coefficients, "
            f"N={layout.n}")
    covered = sorted(f.channel for piece in layout.pieces for f in piece)
    if covered != list(range(layout.c_x)):
        raise GeometryError("pieces do not cover every channel of the block exactly once")


def tile_is_feasible(hw_unit: int, n: int, c_x: int, c_w: int) -> bool:
    """Capacity test for a tile, in exact integer arithmetic.

    For even ``C_w`` this is ``(C_x + 2) C_w <= 2N / HW + 2``; ``C_w = 1``
    additionally needs the input block itself to fit.
    """
    if c_x < 1 or c_w < 1 or c_x % c_w or (c_w > 1 and c_w % 2):
        return False
    if c_x * hw_unit > n:
        return False
    return (c_x + 2) * c_w * hw_unit <= 2 * n + 2 * hw_unit


def plan_layout(dims: ConvDims, n: int, c_x: int, c_w: int, scheme: str | None = None) -> PackingLayout:
    """Build and validate the canonical layout for a ``(C_x, C_w)`` tile."""
    if dims.K != dims.C:
        raise GeometryError("zero-aware packing needs K == C")
    if scheme is None:
        scheme = "falcon_dw" if dims.G == 1 else "falcon_group"
    if scheme not in SCHEMES:
        raise GeometryError(f"unknown packing scheme {scheme!r}")
    if scheme == "falcon_dw" and not dims.is_depthwise:
        raise GeometryError("falcon_dw needs a depthwise geometry; use falcon_group")
    if dims.hw > n:
        raise CapacityError(f"HW={dims.hw} exceeds N={n}; spatial tiling unsupported")
    layout = PackingLayout(scheme=scheme, dims=dims, n=n, c_x=c_x, c_w=c_w,
                           pieces=canonical_pieces(c_x, c_w))
    try:
        check_layout(layout)
    except CapacityError as exc:
        raise InfeasibleError(str(exc)) from exc
    return layout
