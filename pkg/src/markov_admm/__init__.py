"""Consensus optimization over graphs via synchronous and Markov-sampled
asynchronous ADMM, with a certification toolkit for the expected linear
convergence rate."""

from .admm import AlgState, RunRecord, async_step, hypothetical_full_update, init_state, run, sync_step
from .analysis import (
    CertifiedConstants,
    ContractionCheck,
    MetricsRow,
    OptimalCertificate,
    contraction_test,
    contraction_constants,
    contraction_margin,
    edge_update_probability,
    fit_linear_rate,
    g_norm_sq,
    kkt_certificate,
    metrics_rows,
    kprime_bound,
    kprime_bound_complete,
    trigger_probability_bounds,
)
from .backend import backend_name
from .graph import (
    Graph,
    IncidenceMatrices,
    build_graph,
    complete_graph,
    consensus_matrices,
    incidence,
    load_graph,
    path_graph,
    star_graph,
)
from .markov import (
    ChainPath,
    MarkovChain,
    closed_form_stationary,
    metropolis_hastings,
    mixing_constants,
    random_walk_chain,
    simulate,
    stationary_comparison,
)
from .objective import (
    CustomSmooth,
    LocalObjective,
    LogisticRidge,
    ProblemInstance,
    Quadratic,
    centralized_solve,
    grad,
    local_x_update,
)

__version__ = "0.1.0"
