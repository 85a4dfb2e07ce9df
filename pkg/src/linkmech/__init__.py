"""Quota-linked reporting mechanisms.

Budgeted reporting across K linked copies of a decision problem: quota
construction, minimal-lie strategies, truthfulness audits with explicit
permutation witnesses, exact best responses, and seeded convergence
experiments.
"""

from .core import (
    EnumerationCapError,
    Marginal,
    Message,
    PreferenceVector,
    Problem,
    Quota,
    ValidationError,
    marginal,
    tv_distance,
    validate_problem,
)
from .truthfulness import (
    CyclePartition,
    GraphEdge,
    LinkGraph,
    PermutationWitness,
    balance_graph,
    build_link_graph,
    canonical_minimal_message,
    compute_quota,
    count_minimal_lie_messages,
    cycle_partition,
    is_approx_truthful,
    is_approx_truthful_star,
    is_permutation_truthful,
    is_permutation_truthful_naive,
    lie_count,
    min_lie_count,
    minimal_lie_messages,
    permutation_witness,
    sample_minimal_message,
    star_lie_bound,
)
from .optimize import (
    CounterexampleReport,
    SocialChoiceFunction,
    TransportPlan,
    TransportResult,
    best_response_bruteforce,
    best_response_transport,
    enumerate_messages,
    message_count,
    payoff,
    verify_counterexample,
)
from .sim import (
    STRATEGY_NAMES,
    SimConfig,
    SimStats,
    apply_mechanism,
    efficiency_gap,
    exhaustive_expected_lie_count,
    run_convergence,
    sample_type_vector,
    stats_to_csv,
)

__version__ = "0.1.0"
