"""Input checks shared by the estimator facade and the CLI."""
from __future__ import annotations

import numpy as np

from .exceptions import DimensionError, GeometryError
from .tensor import Tensor


def check_residues(arr, bits: int, name: str = "X") -> np.ndarray:
    """Integer array reduced mod 2**bits; floats and bools are refused."""
    a = np.asarray(arr)
    if a.dtype.kind not in "iu":
        raise DimensionError(f"{name} must hold integers, got dtype {a.dtype}")
    return Tensor(a, bits).data


def check_batch(X, bits: int) -> np.ndarray:
    """Accept one C x H x W sample or a batch of them; returns batch x C x H x W."""
    a = check_residues(X, bits)
    if a.ndim == 3:
        a = a[None]
    if a.ndim != 4:
        raise DimensionError(f"expected C x H x W or batch x C x H x W, got shape {a.shape}")
    return a


def check_weights(W, bits: int) -> np.ndarray:
    a = check_residues(W, bits, "weights")
    if a.ndim != 4 or a.shape[2] != a.shape[3]:
        raise DimensionError(f"weights must be K x G x R x R, got shape {a.shape}")
    return a


def check_positive(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
        raise GeometryError(f"{name} must be a positive integer, got {value!r}")
    return int(value)
