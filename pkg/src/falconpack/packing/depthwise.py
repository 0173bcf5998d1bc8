"""Zero-aware coefficient mappings for depthwise convolution.

Input channel ``c`` of a block occupies coefficients ``[cHW, (c+1)HW)``;
filter ``c'`` is written reversed so that the product coefficient at
``(slot + channel) HW + O + i's W + j's`` is the output ``Y[c', i', j']``.
"""
from __future__ import annotations

import numpy as np

from ..exceptions import CapacityError, DimensionError
from ..ring import RingPoly
from ..tensor import ConvDims, HeParams, Tensor, bit_mask
from .layout import PackingLayout


def kernel_span(dims: ConvDims) -> int:
    """O = W(R-1) + R-1, the coefficient lag of the kernel's last tap."""
    return dims.W * (dims.R - 1) + dims.R - 1


def kernel_offsets(dims: ConvDims) -> np.ndarray:
    """``l W + l'`` for every kernel tap, shape R x R."""
    r = np.arange(dims.R)
    return r[:, None] * dims.W + r[None, :]


def read_offsets(dims: ConvDims) -> np.ndarray:
    """``i' s W + j' s`` for every output position, shape H' x W'."""
    s = dims.stride
    return (np.arange(dims.out_h)[:, None] * s * dims.W
            + np.arange(dims.out_w)[None, :] * s)


def _filters(Wblock: Tensor, dims: ConvDims) -> np.ndarray:
    data = Wblock.data
    if data.ndim == 4 and data.shape[1] == 1:
        data = data[:, 0]
    if data.ndim != 3 or data.shape[1:] != (dims.R, dims.R):
        raise DimensionError(f"weight block shape {Wblock.shape} is not c x R x R")
    return data


def pack_input_dw(Xblock: Tensor, params: HeParams) -> RingPoly:
    """x[cHW + iW + j] = X[c, i, j]; residues embed into Z_q unchanged."""
    if Xblock.data.ndim != 3:
        raise DimensionError(f"input block must be C x H x W, got {Xblock.shape}")
    flat = Xblock.data.ravel()
    if flat.size > params.n:
        raise CapacityError(f"input block has {flat.size} entries, N={params.n}")
    coeffs = np.zeros(params.n, dtype=np.uint64)
    coeffs[:flat.size] = flat
    return RingPoly(coeffs, params.q_bits)


def unpack_input_dw(poly: RingPoly, shape: tuple[int, int, int], bits: int = 32) -> Tensor:
    size = shape[0] * shape[1] * shape[2]
    if size > poly.n:
        raise CapacityError(f"shape {shape} does not fit N={poly.n}")
    return Tensor((poly.coeffs[:size] & bit_mask(bits)).reshape(shape), bits)


def pack_weight_dw(Wblock: Tensor, layout: PackingLayout, params: HeParams,
                   piece: int = 0) -> RingPoly:
    """Place filter ``c'`` of ``piece`` reversed at its channel slot.

    ``Wblock`` holds up to ``C_w`` filters indexed by local filter number;
    missing trailing filters are zero (odd channel counts).
    """
    dims = layout.dims
    w = _filters(Wblock, dims)
    if w.shape[0] > layout.c_w:
        raise DimensionError(f"{w.shape[0]} filters for a C_w={layout.c_w} polynomial")
    if params.n != layout.n:
        raise CapacityError(f"layout planned for N={layout.n}, params have N={params.n}")
    coeffs = np.zeros(params.n, dtype=np.uint64)
    base = kernel_span(dims) - kernel_offsets(dims)
    for f in layout.pieces[piece]:
        if f.filter >= w.shape[0]:
            continue
        idx = f.slot * dims.hw + base
        if idx.min() < 0 or idx.max() >= params.n:
            raise CapacityError(f"filter {f.filter} writes outside [0, {params.n})")
        coeffs[idx] = w[f.filter]
    return RingPoly(coeffs, params.q_bits)


def output_indices_dw(layout: PackingLayout, piece: int = 0) -> np.ndarray:
    """Coefficient indices of every output, shape C_w x H' x W' by local filter."""
    dims = layout.dims
    slots = np.array([f.slot + f.channel for f in layout.pieces[piece]])
    idx = slots[:, None, None] * dims.hw + kernel_span(dims) + read_offsets(dims)[None]
    if idx.max() >= layout.n:
        raise CapacityError(f"output index {int(idx.max())} outside [0, {layout.n})")
    return idx


def extract_output_dw(y: RingPoly, layout: PackingLayout, dims: ConvDims | None = None,
                      piece: int = 0, bits: int = 32) -> Tensor:
    """Outputs of the piece's filters, C_w x H' x W', reduced mod 2**bits."""
    if dims is not None and dims != layout.dims:
        raise DimensionError("dims differ from the layout's geometry")
    idx = output_indices_dw(layout, piece)
    return Tensor(y.coeffs[idx] & bit_mask(bits), bits)


def piece_channels(layout: PackingLayout, piece: int) -> list[int]:
    """Block-local channel served by each local filter of ``piece``."""
    return [f.channel for f in layout.pieces[piece]]


def split_weight_poly(W: Tensor, layout: PackingLayout, params: HeParams) -> list[RingPoly]:
    """One weight polynomial per piece for a block of up to ``C_x`` filters.

    ``W`` is indexed by block channel; each piece gathers the channels of its
    merged pairs and is packed with its leading zeros already removed.
    """
    w = _filters(W, layout.dims)
    if w.shape[0] > layout.c_x:
        raise DimensionError(f"{w.shape[0]} filters for a C_x={layout.c_x} block")
    polys = []
    for p in range(layout.k):
        block = np.zeros((layout.c_w, layout.dims.R, layout.dims.R), dtype=np.uint64)
        for f in layout.pieces[p]:
            if f.channel < w.shape[0]:
                block[f.filter] = w[f.channel]
        polys.append(pack_weight_dw(Tensor(block, W.bits), layout, params, piece=p))
    return polys


def assemble_block(outputs: list[Tensor], layout: PackingLayout, channels: int) -> Tensor:
    """Scatter per-piece outputs back to block channel order (first ``channels``)."""
    dims = layout.dims
    bits = outputs[0].bits
    out = np.zeros((layout.c_x, dims.out_h, dims.out_w), dtype=np.uint64)
    for p, y in enumerate(outputs):
        for f, val in zip(layout.pieces[p], y.data):
            out[f.channel] = val
    return Tensor(out[:channels], bits)
