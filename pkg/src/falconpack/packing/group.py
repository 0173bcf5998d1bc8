"""Group-convolution mappings: a whole group (G kernels over G input channels)
is one packing unit of ``G**2`` channel slots.

Input channel ``g2`` of block-local group ``u`` sits at channel slot
``u G^2 + g2``.  Weight ``W[u G + g1, g2, l, l']`` of the filter at unit
slot ``s`` goes to ``s HW G^2 + O - g1 HW G - g2 HW - l W - l'`` with
``O = HW (G^2 - 1) + W (R - 1) + R - 1``; the sum over ``g2`` then lands
at ``(s + u) HW G^2 + O - g1 HW G + i's W + j's``.
"""
from __future__ import annotations

import numpy as np

from ..exceptions import CapacityError, DimensionError
from ..ring import RingPoly
from ..tensor import ConvDims, HeParams, Tensor, bit_mask
from .depthwise import kernel_offsets, kernel_span, read_offsets
from .layout import PackingLayout


def group_span(dims: ConvDims) -> int:
    return dims.hw * (dims.G ** 2 - 1) + kernel_span(dims)


def pack_input_group(Xblock: Tensor, dims: ConvDims, params: HeParams) -> RingPoly:
    """Spread a block of ``u * G`` channels into ``u`` units of ``G**2`` slots."""
    G, hw = dims.G, dims.hw
    data = Xblock.data
    if data.ndim != 3 or data.shape[1:] != (dims.H, dims.W) or data.shape[0] % G:
        raise DimensionError(f"input block {Xblock.shape} is not (u*G) x H x W")
    units = data.shape[0] // G
    if units * G * G * hw > params.n:
        raise CapacityError(f"{units} group units need {units * G * G * hw} coefficients, "
                            f"N={params.n}")
    coeffs = np.zeros(params.n, dtype=np.uint64)
    view = coeffs[:units * G * G * hw].reshape(units, G * G, hw)
    view[:, :G] = data.reshape(units, G, hw)
    return RingPoly(coeffs, params.q_bits)


def _unit_filters(Wblock: Tensor, dims: ConvDims) -> np.ndarray:
    G, R = dims.G, dims.R
    data = Wblock.data
    if data.ndim == 4 and data.shape[1:] == (G, R, R) and data.shape[0] % G == 0:
        data = data.reshape(-1, G, G, R, R)
    if data.ndim != 5 or data.shape[1:] != (G, G, R, R):
        raise DimensionError(f"weight block {Wblock.shape} is not u x G x G x R x R")
    return data


def pack_weight_group(Wblock: Tensor, layout: PackingLayout, params: HeParams,
                      piece: int = 0) -> RingPoly:
    """Weight polynomial for one piece; ``Wblock`` is indexed by local filter unit."""
    dims = layout.dims
    G, hw = dims.G, dims.hw
    w = _unit_filters(Wblock, dims)
    if w.shape[0] > layout.c_w:
        raise DimensionError(f"{w.shape[0]} units for a C_w={layout.c_w} polynomial")
    g = np.arange(G)
    # (g1, g2, l, l') -> coefficient lag below the unit base
    lag = (g[:, None, None, None] * hw * G + g[None, :, None, None] * hw
           + kernel_offsets(dims)[None, None])
    base = group_span(dims) - lag
    unit = G * G * hw
    coeffs = np.zeros(params.n, dtype=np.uint64)
    for f in layout.pieces[piece]:
        if f.filter >= w.shape[0]:
            continue
        idx = f.slot * unit + base
        if idx.min() < 0 or idx.max() >= params.n:
            raise CapacityError(f"unit {f.filter} writes outside [0, {params.n})")
        coeffs[idx] = w[f.filter]
    return RingPoly(coeffs, params.q_bits)


def output_indices_group(layout: PackingLayout, piece: int = 0) -> np.ndarray:
    """Coefficient index of every output, shape C_w x G x H' x W'."""
    dims = layout.dims
    G, hw = dims.G, dims.hw
    slots = np.array([f.slot + f.channel for f in layout.pieces[piece]])
    idx = (slots[:, None, None, None] * G * G * hw + group_span(dims)
           - np.arange(G)[None, :, None, None] * hw * G + read_offsets(dims)[None, None])
    if idx.max() >= layout.n:
        raise CapacityError(f"output index {int(idx.max())} outside [0, {layout.n})")
    return idx


def extract_output_group(y: RingPoly, layout: PackingLayout, dims: ConvDims | None = None,
                         piece: int = 0, bits: int = 32) -> Tensor:
    """Outputs of the piece's units, C_w x G x H' x W', reduced mod 2**bits."""
    if dims is not None and dims != layout.dims:
        raise DimensionError("dims differ from the layout's geometry")
    return Tensor(y.coeffs[output_indices_group(layout, piece)] & bit_mask(bits), bits)


def split_weight_group(W: Tensor, layout: PackingLayout, params: HeParams) -> list[RingPoly]:
    """Per-piece weight polynomials for a block indexed by block-local unit."""
    dims = layout.dims
    w = _unit_filters(W, dims)
    if w.shape[0] > layout.c_x:
        raise DimensionError(f"{w.shape[0]} units for a C_x={layout.c_x} block")
    polys = []
    for p in range(layout.k):
        block = np.zeros((layout.c_w,) + w.shape[1:], dtype=np.uint64)
        for f in layout.pieces[p]:
            if f.channel < w.shape[0]:
                block[f.filter] = w[f.channel]
        polys.append(pack_weight_group(Tensor(block, W.bits), layout, params, piece=p))
    return polys
