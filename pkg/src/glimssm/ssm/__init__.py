"""Selective state-space block with parallel and recurrent execution modes."""

from .scan import (
    scan_backend,
    scan_sequential,
    selective_scan,
    selective_scan_numpy,
)
from .block import (
    BackboneConfig,
    SsmBlockParams,
    SsmLayerState,
    block_forward_parallel,
    block_step,
    init_block_params,
    init_layer_state,
)

__all__ = [
    "selective_scan", "selective_scan_numpy", "scan_sequential",
    "scan_backend",
    "BackboneConfig", "SsmBlockParams", "SsmLayerState",
    "block_forward_parallel", "block_step",
    "init_block_params", "init_layer_state",
]
