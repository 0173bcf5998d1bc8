"""Executable packing plans shared by verification, the protocol and the cost model.

A plan fixes how inputs and weights become polynomials and, for every
polynomial product, which (input, weight) pairs are summed and which
coefficients hold which outputs.  Everything downstream works off this
description, so one oracle test covers all three uses.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..exceptions import CapacityError, GeometryError
from ..ring import RingPoly, poly_add, poly_mul_negacyclic
from ..tensor import ConvDims, HeParams, Tensor, bit_mask, check_conv_operands, im2col
from .depthwise import kernel_offsets, kernel_span, pack_input_dw, read_offsets, split_weight_poly
from .group import group_span, pack_input_group, split_weight_group
from .layout import PackingLayout, plan_layout


@dataclass(frozen=True)
class Product:
    terms: tuple[tuple[int, int], ...]  # (input poly, weight poly) pairs summed
    read: np.ndarray                    # coefficient indices carrying outputs
    dest: np.ndarray                    # flat positions of those outputs in Y


class ConvPlan:
    scheme = "abstract"

    def __init__(self, dims: ConvDims, params: HeParams):
        if dims.hw > params.n:
            raise CapacityError(f"HW={dims.hw} exceeds N={params.n}; spatial tiling unsupported")
        self.dims = dims
        self.params = params
        self.products: list[Product] = []
        self.n_inputs = 0
        self.n_weights = 0

    # subclasses fill these in
    def pack_inputs(self, X: Tensor) -> list[RingPoly]:
        raise NotImplementedError

    def pack_weights(self, Wt: Tensor) -> list[RingPoly]:
        raise NotImplementedError

    @property
    def out_size(self) -> int:
        return self.dims.K * self.dims.out_h * self.dims.out_w

    @property
    def poly_mult_count(self) -> int:
        return sum(len(p.terms) for p in self.products)

    @property
    def output_coeff_count(self) -> int:
        return sum(p.read.size for p in self.products)

    def input_bits(self) -> int:
        return self.n_inputs * self.params.n * self.params.q_bits

    def output_bits(self) -> int:
        return sum((self.params.n + p.read.size) * self.params.q_bits for p in self.products)

    def multiply(self, xs: list[RingPoly], ws: list[RingPoly], product: Product) -> RingPoly:
        acc = None
        for i, j in product.terms:
            term = poly_mul_negacyclic(xs[i], ws[j])
            acc = term if acc is None else poly_add(acc, term)
        return acc

    def evaluate(self, X: Tensor, Wt: Tensor) -> Tensor:
        """Plaintext pack -> multiply -> extract."""
        check_conv_operands(X, Wt, self.dims)
        xs, ws = self.pack_inputs(X), self.pack_weights(Wt)
        out = np.zeros(self.out_size, dtype=np.uint64)
        for prod in self.products:
            y = self.multiply(xs, ws, prod)
            out[prod.dest] = y.coeffs[prod.read]
        out &= bit_mask(X.bits)
        return Tensor(out.reshape(self.dims.K, self.dims.out_h, self.dims.out_w), X.bits)

    def describe(self) -> dict:
        return {"scheme": self.scheme, "dims": self.dims.to_dict(), "N": self.params.n,
                "input_polys": self.n_inputs, "weight_polys": self.n_weights,
                "output_polys": len(self.products), "poly_mults": self.poly_mult_count,
                "output_coeffs": self.output_coeff_count}


class FalconPlan(ConvPlan):
    """Zero-aware packing over a planned ``(C_x, C_w)`` tile."""

    def __init__(self, dims: ConvDims, params: HeParams, c_x: int, c_w: int,
                 layout: PackingLayout | None = None):
        super().__init__(dims, params)
        self.layout = layout or plan_layout(dims, params.n, c_x, c_w)
        self.scheme = self.layout.scheme
        lay = self.layout
        G, ohw = dims.G, dims.out_h * dims.out_w
        self.n_inputs = lay.n_x
        self.n_weights = lay.n_x * lay.k
        if self.scheme == "falcon_dw":
            base = kernel_span(dims) + read_offsets(dims).ravel()
            unit_hw, fan = dims.hw, 1
        else:
            base = (group_span(dims) - np.arange(G)[:, None] * dims.hw * G
                    + read_offsets(dims).ravel()[None]).ravel()
            unit_hw, fan = G * G * dims.hw, G
        for b, p in lay.products():
            real = lay.block_units(b)
            reads, dests = [], []
            for f in lay.pieces[p]:
                if f.channel >= real:
                    continue
                reads.append((f.slot + f.channel) * unit_hw + base)
                first = (b * lay.c_x + f.channel) * fan * ohw
                dests.append(first + np.arange(fan * ohw))
            self.products.append(Product(((b, b * lay.k + p),), np.concatenate(reads),
                                         np.concatenate(dests)))

    def _block(self, b: int) -> slice:
        G = self.dims.G
        lo = b * self.layout.c_x * G
        return slice(lo, min(lo + self.layout.c_x * G, self.dims.C))

    def pack_inputs(self, X: Tensor) -> list[RingPoly]:
        if self.scheme == "falcon_dw":
            return [pack_input_dw(Tensor(X.data[self._block(b)], X.bits), self.params)
                    for b in range(self.layout.n_x)]
        return [pack_input_group(Tensor(X.data[self._block(b)], X.bits), self.dims, self.params)
                for b in range(self.layout.n_x)]

    def pack_weights(self, Wt: Tensor) -> list[RingPoly]:
        out = []
        for b in range(self.layout.n_x):
            block = Tensor(Wt.data[self._block(b)], Wt.bits)
            if self.scheme == "falcon_dw":
                out.extend(split_weight_poly(block, self.layout, self.params))
            else:
                out.extend(split_weight_group(block, self.layout, self.params))
        return out


class CheetahPlan(ConvPlan):
    """Dense channel packing of the zero-padded standard convolution.

    ``C_n`` input channels per polynomial, ``M`` filters per weight
    polynomial; all-zero weight polynomials are skipped.
    """

    scheme = "cheetah"

    def __init__(self, dims: ConvDims, params: HeParams):
        super().__init__(dims, params)
        hw = dims.hw
        self.c_n = min(dims.C, params.n // hw)
        self.blocks = math.ceil(dims.C / self.c_n)
        self.m = max(1, params.n // (self.c_n * hw))
        self.filter_groups = math.ceil(dims.K / self.m)
        self.n_inputs = self.blocks
        ohw = dims.out_h * dims.out_w
        base = kernel_span(dims) + read_offsets(dims).ravel()
        fpg = dims.filters_per_group
        for fg in range(self.filter_groups):
            filters = range(fg * self.m, min((fg + 1) * self.m, dims.K))
            terms = []
            for b in range(self.blocks):
                lo, hi = b * self.c_n, min((b + 1) * self.c_n, dims.C)
                # does any filter of this group see a channel of this block?
                if any((f // fpg) * dims.G < hi and (f // fpg + 1) * dims.G > lo for f in filters):
                    terms.append((b, fg * self.blocks + b))
            if not terms:
                continue
            reads = [((f - fg * self.m) * self.c_n + self.c_n - 1) * hw + base for f in filters]
            dests = [f * ohw + np.arange(ohw) for f in filters]
            self.products.append(Product(tuple(terms), np.concatenate(reads),
                                         np.concatenate(dests)))
        self.used = sorted({j for prod in self.products for _, j in prod.terms})
        self.n_weights = len(self.used)

    @property
    def zero_slot_fraction(self) -> float:
        """Share of weight channel slots that hold zero filters."""
        std = self.dims.C * self.dims.K
        real = self.dims.K * self.dims.G
        return (std - real) / std

    def pack_inputs(self, X: Tensor) -> list[RingPoly]:
        return [pack_input_dw(Tensor(X.data[b * self.c_n:(b + 1) * self.c_n], X.bits), self.params)
                for b in range(self.blocks)]

    def pack_weights(self, Wt: Tensor) -> list[RingPoly | None]:
        """Weight polynomial per (filter group, input block); all-zero ones stay None."""
        dims, hw, n = self.dims, self.dims.hw, self.params.n
        lag = kernel_span(dims) - kernel_offsets(dims)
        fpg = dims.filters_per_group
        out: list[RingPoly | None] = [None] * (self.filter_groups * self.blocks)
        for idx in self.used:
            fg, b = divmod(idx, self.blocks)
            coeffs = np.zeros(n, dtype=np.uint64)
            for f in range(fg * self.m, min((fg + 1) * self.m, dims.K)):
                m = f - fg * self.m
                for g in range(dims.G):
                    c = (f // fpg) * dims.G + g - b * self.c_n  # channel within the block
                    if 0 <= c < self.c_n:
                        coeffs[(m * self.c_n + self.c_n - 1 - c) * hw + lag] = Wt.data[f, g]
            out[idx] = RingPoly(coeffs, self.params.q_bits)
        return out


class IronPlan(ConvPlan):
    """Per-group im2col matrix products: rows of ``G R^2`` columns per polynomial."""

    scheme = "iron"

    def __init__(self, dims: ConvDims, params: HeParams):
        super().__init__(dims, params)
        self.cols = dims.G * dims.R * dims.R
        if self.cols > params.n:
            raise CapacityError(f"receptive field of {self.cols} entries exceeds N={params.n}")
        ohw = dims.out_h * dims.out_w
        self.rows = min(ohw, params.n // self.cols)
        self.row_blocks = math.ceil(ohw / self.rows)
        self.n_inputs = dims.groups * self.row_blocks
        self.n_weights = dims.K
        fpg = dims.filters_per_group
        for f in range(dims.K):
            u = f // fpg
            for r in range(self.row_blocks):
                rows = np.arange(r * self.rows, min((r + 1) * self.rows, ohw))
                local = rows - r * self.rows
                self.products.append(Product(((u * self.row_blocks + r, f),),
                                             local * self.cols + self.cols - 1,
                                             f * ohw + rows))

    def pack_inputs(self, X: Tensor) -> list[RingPoly]:
        dims, n = self.dims, self.params.n
        sub = ConvDims(H=dims.H, W=dims.W, C=dims.G, R=dims.R, K=dims.G, G=dims.G,
                       stride=dims.stride)
        out = []
        for u in range(dims.groups):
            mat = im2col(Tensor(X.data[u * dims.G:(u + 1) * dims.G], X.bits), sub).data
            for r in range(self.row_blocks):
                chunk = mat[r * self.rows:(r + 1) * self.rows].ravel()
                coeffs = np.zeros(n, dtype=np.uint64)
                coeffs[:chunk.size] = chunk
                out.append(RingPoly(coeffs, self.params.q_bits))
        return out

    def pack_weights(self, Wt: Tensor) -> list[RingPoly]:
        out = []
        for f in range(self.dims.K):
            coeffs = np.zeros(self.params.n, dtype=np.uint64)
            coeffs[:self.cols] = Wt.data[f].ravel()[::-1]
            out.append(RingPoly(coeffs, self.params.q_bits))
        return out


def make_plan(scheme: str, dims: ConvDims, params: HeParams,
              tile: tuple[int, int] | None = None) -> ConvPlan:
    """Plan for ``scheme`` in {iron, cheetah, falcon, falcon_tiled, falcon_dw, falcon_group}."""
    if scheme == "iron":
        return IronPlan(dims, params)
    if scheme == "cheetah":
        return CheetahPlan(dims, params)
    if scheme in ("falcon", "falcon_tiled", "falcon_dw", "falcon_group"):
        from ..tiling import gp_tile, solve_tiling
        if dims.K != dims.C:
            raise GeometryError("zero-aware packing needs K == C")
        if tile is None:
            choice = gp_tile(dims, params) if scheme == "falcon" else solve_tiling(dims, params)
            tile = (choice.c_x, choice.c_w)
        return FalconPlan(dims, params, *tile)
    raise GeometryError(f"unknown scheme {scheme!r}")
