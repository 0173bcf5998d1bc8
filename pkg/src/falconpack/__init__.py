"""Dense coefficient packing for homomorphically encrypted depthwise and group
convolutions, with a communication model, a tiling solver and a two-party
protocol simulator."""

from .exceptions import (CapacityError, ConfigError, DimensionError, FalconPackError,
                         GeometryError, InfeasibleError, NoiseBudgetError,
                         ParameterMismatchError, PartyMismatchError)
from .ring import RingPoly, poly_add, poly_mul_negacyclic, poly_mul_schoolbook, poly_sub
from .tensor import ConvDims, HeParams, Tensor, conv2d_reference, im2col, \
    pad_depthwise_to_standard
from .packing import FalconPlan, PackingLayout, make_plan, plan_layout
from .protocol import reconstruct, secure_dwconv, share
from .tiling import TileChoice, comm_cost, solve_tiling

__version__ = "0.1.0"

__all__ = [
    "CapacityError", "ConfigError", "ConvDims", "DimensionError", "FalconPackError",
    "GeometryError", "HeParams", "InfeasibleError", "NoiseBudgetError",
    "ParameterMismatchError", "PartyMismatchError", "RingPoly", "Tensor",
    "conv2d_reference", "im2col", "pad_depthwise_to_standard", "poly_add",
    "poly_mul_negacyclic", "poly_mul_schoolbook", "poly_sub", "FalconPlan", "PackingLayout",
    "make_plan", "plan_layout", "reconstruct", "secure_dwconv", "share", "TileChoice",
    "comm_cost", "solve_tiling", "PackedConv2d",
]


def __getattr__(name):
    # scikit-learn is only imported when the estimator is asked for
    if name == "PackedConv2d":
        from .estimator import PackedConv2d
        return PackedConv2d
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
