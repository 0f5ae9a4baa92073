"""fuseplan: co-exploration of on-chip buffer capacity and DNN graph
partitioning under a consumption-centric subgraph execution model."""

from .cost import CostReport, Evaluator, evaluate, multicore_evaluate, subgraph_cost
from .generators import generate_benchmark
from .graph import (ComputationGraph, LayerDescriptor, LayerKind, PartitionScheme,
                    boundary_tensors, canonicalize, load_graph, load_partition,
                    save_graph, save_partition, subgraph_topo_order,
                    validate_partition)
from .hardware import (CapacityGrid, EnergyTable, HardwareConfig, HardwareSpace,
                       preset_config)
from .kernels import BACKEND
from .memory import allocate_regions, replay_trace, weight_residency
from .schedule import (NodeSchedule, SubgraphSchedule, UnschedulableError,
                       derive_schedule, f_v, stage1_output_tiles,
                       stage2_backward_derive, stage3_update_counts)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CapacityGrid", "ComputationGraph", "CostReport", "EnergyTable",
    "Evaluator", "HardwareConfig", "HardwareSpace", "LayerDescriptor", "LayerKind",
    "NodeSchedule", "PartitionScheme", "SubgraphSchedule", "UnschedulableError",
    "allocate_regions", "boundary_tensors", "canonicalize", "derive_schedule",
    "evaluate", "f_v", "generate_benchmark", "load_graph", "load_partition",
    "multicore_evaluate", "preset_config", "replay_trace", "save_graph",
    "save_partition", "stage1_output_tiles", "stage2_backward_derive",
    "stage3_update_counts", "subgraph_cost", "subgraph_topo_order",
    "validate_partition", "weight_residency",
]
