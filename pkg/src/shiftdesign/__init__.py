"""Successive graph shift operators for decentralized linear transformations."""

__version__ = "0.1.0"

from .design import (
    DesignProblem,
    ShiftSequence,
    SolveReport,
    SolverConfig,
    assemble_block_ls,
    bcd_design,
    effective_rounds,
    make_weights,
    objective,
    solve_block,
    stage_errors,
)
from .graph import (
    Graph,
    GraphError,
    SelectionMatrix,
    build_graph,
    er_random_graph,
    in_neighbors,
    read_edge_list,
    selection_matrix,
    strongly_connected,
    write_edge_list,
)
from .netsim import RoundTrace, compare_centralized, run_rounds, storage_per_node
from .tasks import consensus_matrix, gf_baseline_fit, load_matrix, random_projection, save_matrix
