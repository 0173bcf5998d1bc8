"""Integer tensors over Z_{2^l} and plaintext reference convolutions.

Everything here is the correctness oracle for the packed and encrypted
paths: cross-correlation with valid padding, all arithmetic wrapping
modulo ``2**bits``.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, GeometryError

SUPPORTED_N = (2048, 4096, 8192, 16384, 32768)


def bit_mask(bits: int) -> np.uint64:
    return np.uint64((1 << bits) - 1)


@dataclass(frozen=True)
class ConvDims:
    """Geometry of one (grouped) convolution.

    ``G`` is the number of input channels each filter sees, so ``G == 1``
    with ``K == C`` is a depthwise convolution and ``G == C`` a standard one.
    """

    H: int
    W: int
    C: int
    R: int
    K: int | None = None
    G: int = 1
    stride: int = 1

    def __post_init__(self):
        if self.K is None:
            object.__setattr__(self, "K", self.C)
        for name in ("H", "W", "C", "R", "K", "G", "stride"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise GeometryError(f"{name} must be a positive integer, got {value!r}")
        if self.H < self.R or self.W < self.R:
            raise GeometryError(f"kernel {self.R} larger than input {self.H}x{self.W}")
        if self.C % self.G:
            raise GeometryError(f"group size {self.G} does not divide C={self.C}")
        if self.K % self.groups:
            raise GeometryError(f"K={self.K} is not a multiple of the group count {self.groups}")

    @classmethod
    def square(cls, size: int, channels: int, kernel: int, *, group: int = 1,
               stride: int = 1, padding: str = "same") -> "ConvDims":
        """Build dims from an ``(H, C, R)`` tuple as used in benchmark tables.

        With ``padding="same"`` the size is the activation resolution and the
        input is the explicitly zero-padded tensor of side ``size + R - 1``.
        """
        if padding == "same":
            side = size + 2 * ((kernel - 1) // 2)
        elif padding == "valid":
            side = size
        else:
            raise GeometryError(f"unknown padding {padding!r}")
        return cls(H=side, W=side, C=channels, R=kernel, G=group, stride=stride)

    @property
    def out_h(self) -> int:
        return (self.H - self.R) // self.stride + 1

    @property
    def out_w(self) -> int:
        return (self.W - self.R) // self.stride + 1

    @property
    def hw(self) -> int:
        return self.H * self.W

    @property
    def groups(self) -> int:
        return self.C // self.G

    @property
    def filters_per_group(self) -> int:
        return self.K // self.groups

    @property
    def is_depthwise(self) -> bool:
        return self.G == 1 and self.K == self.C

    def with_channels(self, channels: int) -> "ConvDims":
        """Same spatial geometry restricted to ``channels`` input channels."""
        k = channels * self.K // self.C
        return ConvDims(H=self.H, W=self.W, C=channels, R=self.R, K=k, G=self.G,
                        stride=self.stride)

    def to_dict(self) -> dict:
        return {"H": self.H, "W": self.W, "C": self.C, "R": self.R, "K": self.K,
                "G": self.G, "stride": self.stride}


@dataclass(frozen=True)
class HeParams:
    """Ring and plaintext parameters.

    ``q_bits`` is log2 of the power-of-two ciphertext modulus and ``bits`` the
    share width l, so the plaintext modulus is ``2**bits``. ``security`` is
    recorded for reports only; nothing here claims that level.
    """

    n: int = 4096
    q_bits: int = 59
    bits: int = 32
    security: int = 128

    def __post_init__(self):
        if self.n not in SUPPORTED_N:
            raise GeometryError(f"N must be one of {SUPPORTED_N}, got {self.n}")
        if not 1 <= self.bits < self.q_bits <= 64:
            raise GeometryError(
                f"need 1 <= l < log2(q) <= 64, got l={self.bits}, log2(q)={self.q_bits}")

    @property
    def p(self) -> int:
        return 1 << self.bits

    @property
    def q(self) -> int:
        return 1 << self.q_bits


@dataclass(frozen=True, eq=False)
class Tensor:
    """Dense row-major tensor of residues modulo ``2**bits``."""

    data: np.ndarray
    bits: int = 32

    def __post_init__(self):
        if not 1 <= self.bits <= 64:
            raise DimensionError(f"bit width must lie in [1, 64], got {self.bits}")
        arr = np.asarray(self.data)
        if arr.dtype.kind == "i":
            # Signed input: reduce into [0, 2**bits) via two's complement.
            arr = arr.astype(np.int64).view(np.uint64)
        elif arr.dtype.kind == "O":
            arr = np.array([int(v) % (1 << self.bits) for v in arr.ravel()],
                           dtype=np.uint64).reshape(arr.shape)
        arr = np.ascontiguousarray(arr, dtype=np.uint64) & bit_mask(self.bits)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    def __eq__(self, other):
        if not isinstance(other, Tensor):
            return NotImplemented
        return (self.bits == other.bits and self.shape == other.shape
                and bool(np.array_equal(self.data, other.data)))

    __hash__ = None

    def __add__(self, other: "Tensor") -> "Tensor":
        _check_same(self, other)
        return Tensor(self.data + other.data, self.bits)

    def __sub__(self, other: "Tensor") -> "Tensor":
        _check_same(self, other)
        return Tensor(self.data - other.data, self.bits)

    def __neg__(self) -> "Tensor":
        return Tensor(np.uint64(0) - self.data, self.bits)

    def reshape(self, *shape) -> "Tensor":
        return Tensor(self.data.reshape(*shape), self.bits)

    def centered(self) -> np.ndarray:
        """Signed representatives in ``[-2**(bits-1), 2**(bits-1))``."""
        half = np.uint64(1 << (self.bits - 1))
        out = self.data.astype(object)
        return np.where(self.data >= half, out - (1 << self.bits), out)

    @classmethod
    def zeros(cls, shape, bits: int = 32) -> "Tensor":
        return cls(np.zeros(shape, dtype=np.uint64), bits)

    @classmethod
    def random(cls, shape, rng: np.random.Generator, bits: int = 32) -> "Tensor":
        high = np.iinfo(np.uint64).max if bits == 64 else (1 << bits) - 1
        return cls(rng.integers(0, high, size=shape, dtype=np.uint64, endpoint=True), bits)

    @classmethod
    def small(cls, shape, rng: np.random.Generator, bound: int, bits: int = 32) -> "Tensor":
        """Uniform signed values in ``[-bound, bound]`` stored as residues."""
        return cls(rng.integers(-bound, bound, size=shape, endpoint=True), bits)

    # serialization -----------------------------------------------------

    def to_bytes(self) -> bytes:
        header = struct.pack(f"<{len(self.shape) + 2}Q", len(self.shape), *self.shape, self.bits)
        return header + self.data.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Tensor":
        (rank,) = struct.unpack_from("<Q", blob, 0)
        fields = struct.unpack_from(f"<{rank + 1}Q", blob, 8)
        shape, bits = fields[:rank], fields[rank]
        offset = 8 * (rank + 2)
        count = int(np.prod(shape, dtype=np.int64))
        if len(blob) != offset + 8 * count:
            raise DimensionError(
                f"tensor payload holds {len(blob) - offset} bytes, expected {8 * count}")
        data = np.frombuffer(blob, dtype="<u8", count=count, offset=offset)
        if data.size and int(data.max()) >> bits:
            raise DimensionError(f"residue exceeds declared {bits}-bit width")
        return cls(data.reshape(shape).astype(np.uint64), int(bits))

    def to_json(self) -> str:
        return json.dumps({"shape": list(self.shape), "bits": self.bits,
                           "data": [int(v) for v in self.data.ravel()]})

    @classmethod
    def from_json(cls, text: str) -> "Tensor":
        obj = json.loads(text)
        data = np.array(obj["data"], dtype=np.uint64)
        if data.size != int(np.prod(obj["shape"], dtype=np.int64)):
            raise DimensionError("data length does not match shape")
        return cls(data.reshape(obj["shape"]), int(obj["bits"]))


def _check_same(a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape or a.bits != b.bits:
        raise DimensionError(f"operands differ: {a.shape}/{a.bits} vs {b.shape}/{b.bits}")


def check_conv_operands(X: Tensor, Wt: Tensor, dims: ConvDims) -> None:
    if X.shape != (dims.C, dims.H, dims.W):
        raise DimensionError(f"input shape {X.shape} != {(dims.C, dims.H, dims.W)}")
    if Wt.shape != (dims.K, dims.G, dims.R, dims.R):
        raise DimensionError(f"weight shape {Wt.shape} != {(dims.K, dims.G, dims.R, dims.R)}")
    if X.bits != Wt.bits:
        raise DimensionError(f"input is {X.bits}-bit but weights are {Wt.bits}-bit")


def conv2d_reference(X: Tensor, Wt: Tensor, dims: ConvDims) -> Tensor:
    """Grouped cross-correlation, valid padding, wrapping mod ``2**bits``.

    ``Y[k, i, j] = sum_{g, l, m} X[grp(k)*G + g, i*s + l, j*s + m] * W[k, g, l, m]``
    """
    check_conv_operands(X, Wt, dims)
    G, R, s = dims.G, dims.R, dims.stride
    oh, ow = dims.out_h, dims.out_w
    x = X.data.reshape(dims.groups, G, dims.H, dims.W)
    w = Wt.data.reshape(dims.groups, dims.filters_per_group, G, R, R)
    y = np.zeros((dims.groups, dims.filters_per_group, oh, ow), dtype=np.uint64)
    for l in range(R):
        for m in range(R):
            patch = x[:, :, l:l + s * (oh - 1) + 1:s, m:m + s * (ow - 1) + 1:s]
            # uint64 products and sums wrap mod 2**64, a multiple of 2**bits.
            y += np.einsum("nfg,ngij->nfij", w[:, :, :, l, m], patch)
    return Tensor(y.reshape(dims.K, oh, ow), X.bits)


def pad_depthwise_to_standard(Wt: Tensor, dims: ConvDims) -> Tensor:
    """Embed C depthwise filters into a C x C x R x R standard weight."""
    if not dims.is_depthwise:
        raise GeometryError("padding to standard form needs a depthwise geometry")
    if Wt.shape != (dims.C, 1, dims.R, dims.R):
        raise DimensionError(f"weight shape {Wt.shape} != {(dims.C, 1, dims.R, dims.R)}")
    out = np.zeros((dims.C, dims.C, dims.R, dims.R), dtype=np.uint64)
    idx = np.arange(dims.C)
    out[idx, idx] = Wt.data[:, 0]
    return Tensor(out, Wt.bits)


def standard_dims(dims: ConvDims) -> ConvDims:
    """The standard-convolution geometry a grouped conv expands into."""
    return ConvDims(H=dims.H, W=dims.W, C=dims.C, R=dims.R, K=dims.K, G=dims.C,
                    stride=dims.stride)


def pad_group_to_standard(Wt: Tensor, dims: ConvDims) -> Tensor:
    """Expand a K x G x R x R grouped weight to K x C x R x R with zero channels."""
    if Wt.shape != (dims.K, dims.G, dims.R, dims.R):
        raise DimensionError(f"weight shape {Wt.shape} != {(dims.K, dims.G, dims.R, dims.R)}")
    out = np.zeros((dims.K, dims.C, dims.R, dims.R), dtype=np.uint64)
    fpg = dims.filters_per_group
    for k in range(dims.K):
        start = (k // fpg) * dims.G
        out[k, start:start + dims.G] = Wt.data[k]
    return Tensor(out, Wt.bits)


def im2col(X: Tensor, dims: ConvDims) -> Tensor:
    """Receptive fields of one group slice as an ``H'W' x G R^2`` matrix.

    ``X`` holds the ``G`` input channels of a single group.
    """
    if X.shape != (dims.G, dims.H, dims.W):
        raise DimensionError(f"group slice shape {X.shape} != {(dims.G, dims.H, dims.W)}")
    R, s = dims.R, dims.stride
    win = np.lib.stride_tricks.sliding_window_view(X.data, (R, R), axis=(1, 2))
    win = win[:, ::s, ::s][:, :dims.out_h, :dims.out_w]
    # (G, H', W', R, R) -> (H', W', G, R, R)
    cols = win.transpose(1, 2, 0, 3, 4).reshape(dims.out_h * dims.out_w, dims.G * R * R)
    return Tensor(cols.copy(), X.bits)
