"""Coefficient mappings: zero-aware depthwise/group packing and the baselines."""

from .depthwise import (extract_output_dw, pack_input_dw, pack_weight_dw, split_weight_poly,
                        unpack_input_dw)
from .group import extract_output_group, pack_input_group, pack_weight_group
from .layout import FilterSlot, PackingLayout, offset, plan_layout, superstring_length
from .plan import CheetahPlan, ConvPlan, FalconPlan, IronPlan, make_plan
from .scs import FilterArrangement, depthwise_patterns, greedy_scs_arrange

__all__ = [
    "CheetahPlan", "ConvPlan", "FalconPlan", "FilterArrangement", "FilterSlot", "IronPlan",
    "PackingLayout", "depthwise_patterns", "extract_output_dw", "extract_output_group",
    "greedy_scs_arrange", "make_plan", "offset", "pack_input_dw", "pack_input_group",
    "pack_weight_dw", "pack_weight_group", "plan_layout", "split_weight_poly",
    "superstring_length", "unpack_input_dw",
]
