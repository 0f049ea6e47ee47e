"""Private aggregation for hierarchical wireless federated learning: protocol
simulator, cost model, exhaustive privacy auditor and a training harness."""

from .field import FieldConfig, FieldElement, FieldVector
from .topology import PrivacyParams, Topology, build_topology, group_by_pattern, random_topology
from .protocol import run_round, run_round_broken_no_masks, replay

__all__ = [
    "FieldConfig",
    "FieldElement",
    "FieldVector",
    "PrivacyParams",
    "Topology",
    "build_topology",
    "group_by_pattern",
    "random_topology",
    "run_round",
    "run_round_broken_no_masks",
    "replay",
]
