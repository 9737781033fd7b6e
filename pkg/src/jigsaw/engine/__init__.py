"""Cluster-merging dynamics."""
from .dynamics import (
    AE,
    DynamicsParams,
    JigsawProcess,
    Partition,
    RunResult,
    UsageError,
    cluster_edge_exists,
    is_inert,
    is_internally_solved,
    is_unstoppable,
    run,
    run_slowed,
    solve_explicit_batch,
    step,
)
