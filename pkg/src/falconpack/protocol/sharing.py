"""Additive secret sharing over Z_{2^l}."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import DimensionError, PartyMismatchError
from ..tensor import Tensor

PARTIES = ("client", "server")


@dataclass(frozen=True)
class Share:
    party: str
    tensor: Tensor

    def __post_init__(self):
        if self.party not in PARTIES:
            raise PartyMismatchError(f"unknown party {self.party!r}")


def share(x: Tensor, rng: np.random.Generator) -> tuple[Share, Share]:
    """Uniform client share; the server holds the difference."""
    mask = Tensor.random(x.shape, rng, x.bits)
    return Share("client", mask), Share("server", x - mask)


def reconstruct(a: Share, b: Share) -> Tensor:
    if a.party == b.party:
        raise PartyMismatchError(f"both shares belong to the {a.party}")
    if a.tensor.shape != b.tensor.shape:
        raise DimensionError(f"share shapes differ: {a.tensor.shape} vs {b.tensor.shape}")
    return a.tensor + b.tensor
