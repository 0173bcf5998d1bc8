"""Arithmetic in the negacyclic ring Z_q[X]/(X^N + 1) with q = 2**modulus_bits.

Coefficients are held as ``uint64``; because q divides 2**64, numpy's
wrapping integer arithmetic followed by a mask is exact reduction mod q.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .exceptions import DimensionError, ParameterMismatchError

# Below this length np.convolve beats another Karatsuba level.
_KARATSUBA_CUTOFF = 256
# Use the shift-and-add product when one side has at most N / this many nonzeros.
_SPARSE_RATIO = 24


@dataclass(frozen=True, eq=False)
class RingPoly:
    coeffs: np.ndarray
    modulus_bits: int = 59

    def __post_init__(self):
        if not 1 <= self.modulus_bits <= 64:
            raise DimensionError(f"modulus_bits must lie in [1, 64], got {self.modulus_bits}")
        arr = np.asarray(self.coeffs)
        if arr.ndim != 1:
            raise DimensionError("coefficients must be a flat array")
        n = arr.shape[0]
        if n < 1 or n & (n - 1):
            raise DimensionError(f"degree must be a power of two, got {n}")
        if arr.dtype.kind == "i":
            arr = arr.astype(np.int64).view(np.uint64)
        elif arr.dtype.kind == "O":
            arr = np.array([int(v) % (1 << self.modulus_bits) for v in arr], dtype=np.uint64)
        arr = np.ascontiguousarray(arr, dtype=np.uint64) & _mask(self.modulus_bits)
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def modulus(self) -> int:
        return 1 << self.modulus_bits

    def __eq__(self, other):
        if not isinstance(other, RingPoly):
            return NotImplemented
        return (self.modulus_bits == other.modulus_bits
                and bool(np.array_equal(self.coeffs, other.coeffs)))

    __hash__ = None

    def __add__(self, other):
        return poly_add(self, other)

    def __sub__(self, other):
        return poly_sub(self, other)

    def __neg__(self):
        return poly_neg(self)

    def __mul__(self, other):
        return poly_mul_negacyclic(self, other)

    def __repr__(self):
        nnz = int(np.count_nonzero(self.coeffs))
        return f"RingPoly(n={self.n}, modulus_bits={self.modulus_bits}, nnz={nnz})"

    def nonzero(self) -> int:
        return int(np.count_nonzero(self.coeffs))

    @classmethod
    def zero(cls, n: int, modulus_bits: int = 59) -> "RingPoly":
        return cls(np.zeros(n, dtype=np.uint64), modulus_bits)

    @classmethod
    def monomial(cls, n: int, degree: int, coeff: int = 1, modulus_bits: int = 59) -> "RingPoly":
        """``coeff * X**degree`` reduced with ``X**N = -1``."""
        wraps, idx = divmod(degree, n)
        value = coeff if wraps % 2 == 0 else -coeff
        c = np.zeros(n, dtype=np.uint64)
        c[idx] = value % (1 << modulus_bits)
        return cls(c, modulus_bits)

    def centered(self) -> list[int]:
        """Signed representatives in ``(-q/2, q/2]`` as Python ints."""
        q = self.modulus
        return [v - q if v > q // 2 else v for v in map(int, self.coeffs)]

    def to_bytes(self) -> bytes:
        return struct.pack("<QQ", self.n, self.modulus_bits) + self.coeffs.astype("<u8").tobytes()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "RingPoly":
        n, bits = struct.unpack_from("<QQ", blob, 0)
        if len(blob) != 16 + 8 * n:
            raise DimensionError(f"polynomial payload is {len(blob) - 16} bytes, expected {8 * n}")
        coeffs = np.frombuffer(blob, dtype="<u8", count=n, offset=16).astype(np.uint64)
        if bits < 64 and coeffs.size and int(coeffs.max()) >> bits:
            raise DimensionError(f"coefficient exceeds declared {bits}-bit modulus")
        return cls(coeffs, int(bits))


def _mask(bits: int) -> np.uint64:
    return np.uint64((1 << bits) - 1)


def _check_pair(a: RingPoly, b: RingPoly) -> None:
    if a.n != b.n or a.modulus_bits != b.modulus_bits:
        raise ParameterMismatchError(
            f"ring mismatch: (N={a.n}, q=2^{a.modulus_bits}) vs (N={b.n}, q=2^{b.modulus_bits})")


def poly_add(a: RingPoly, b: RingPoly) -> RingPoly:
    _check_pair(a, b)
    return RingPoly(a.coeffs + b.coeffs, a.modulus_bits)


def poly_sub(a: RingPoly, b: RingPoly) -> RingPoly:
    _check_pair(a, b)
    return RingPoly(a.coeffs - b.coeffs, a.modulus_bits)


def poly_neg(a: RingPoly) -> RingPoly:
    return RingPoly(np.uint64(0) - a.coeffs, a.modulus_bits)


def poly_scale(a: RingPoly, factor: int) -> RingPoly:
    return RingPoly(a.coeffs * np.uint64(factor % (1 << 64)), a.modulus_bits)


def negacyclic_shift(coeffs: np.ndarray, k: int) -> np.ndarray:
    """Coefficients of ``X**k * a`` for ``0 <= k < N`` (uint64, unreduced)."""
    if k == 0:
        return coeffs.copy()
    n = coeffs.shape[0]
    return np.concatenate((np.uint64(0) - coeffs[n - k:], coeffs[:n - k]))


def _karatsuba(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Linear convolution of equal-length uint64 vectors, wrapping mod 2**64."""
    n = a.shape[0]
    if n <= _KARATSUBA_CUTOFF:
        return np.convolve(a, b)
    m = n // 2
    a0, a1, b0, b1 = a[:m], a[m:], b[:m], b[m:]
    if a1.shape[0] != m:
        return np.convolve(a, b)
    z0 = _karatsuba(a0, b0)
    z2 = _karatsuba(a1, b1)
    z1 = _karatsuba(a0 + a1, b0 + b1) - z0 - z2
    out = np.zeros(2 * n - 1, dtype=np.uint64)
    out[:2 * m - 1] += z0
    out[2 * m:] += z2
    out[m:m + 2 * m - 1] += z1
    return out


def _sparse_product(dense: np.ndarray, sparse: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(dense)
    for k in np.flatnonzero(sparse):
        acc += sparse[k] * negacyclic_shift(dense, int(k))
    return acc


def poly_mul_negacyclic(a: RingPoly, b: RingPoly) -> RingPoly:
    """Product in Z_q[X]/(X^N+1): Karatsuba, or shift-and-add for sparse operands."""
    _check_pair(a, b)
    n = a.n
    nnz_a, nnz_b = a.nonzero(), b.nonzero()
    if min(nnz_a, nnz_b) * _SPARSE_RATIO <= n:
        if nnz_a <= nnz_b:
            coeffs = _sparse_product(b.coeffs, a.coeffs)
        else:
            coeffs = _sparse_product(a.coeffs, b.coeffs)
        return RingPoly(coeffs, a.modulus_bits)
    lin = _karatsuba(a.coeffs, b.coeffs)
    coeffs = lin[:n].copy()
    coeffs[:n - 1] -= lin[n:]
    return RingPoly(coeffs, a.modulus_bits)


def poly_mul_schoolbook(a: RingPoly, b: RingPoly) -> RingPoly:
    """Quadratic reference product with exact Python-integer accumulation."""
    _check_pair(a, b)
    n, q = a.n, a.modulus
    x = [int(v) for v in a.coeffs]
    y = [int(v) for v in b.coeffs]
    out = [0] * n
    for i, xi in enumerate(x):
        if not xi:
            continue
        for j, yj in enumerate(y):
            k = i + j
            if k < n:
                out[k] += xi * yj
            else:
                out[k - n] -= xi * yj
    return RingPoly(np.array([v % q for v in out], dtype=np.uint64), a.modulus_bits)
