"""Envy-free allocation of indivisible goods with transfer payments.

Exact-arithmetic library: envy graphs and the envy-freeability
characterization, minimum subsidies and natural transfers, welfare-preserving
constructions with certified bounds, and brute-force oracles at desk scale.
"""

from .model import (
    AdditiveValuation,
    Allocation,
    FairDivisionError,
    Instance,
    InstanceFormatError,
    InvariantViolation,
    NotEnvyFreeableError,
    PaymentVector,
    SqrtCardinalityValuation,
    TableValuation,
    TooLargeError,
    WelfareReport,
    instance_to_json,
    load_instance,
    nash_product,
    normalize,
    rho_mean,
    social_welfare,
    value,
    welfare_report,
)
from .envy import (
    EnvyGraph,
    FreeabilityCertificate,
    bounded_envy,
    build_envy_graph,
    is_ef1,
    is_envy_free,
    is_envy_freeable,
    is_envy_freeable_by_permutation,
    min_subsidies,
    natural_transfers,
)
from .matching import iterated_matching, max_weight_assignment, reassign_bundles
from .algorithms import (
    Certificate,
    NSW_GUARANTEE,
    SolveResult,
    certificates_for,
    envy_cycles,
    make_envy_free_from_bounded,
    nsw_pipeline_additive,
    nsw_pipeline_matroid,
    nsw_reassign,
    subadditive_baseline,
    welfare_target_additive,
    welfare_target_general,
)
from .oracles import (
    TransferLP,
    brute_nsw_opt,
    brute_rho_opt,
    brute_sw_opt,
    enumerate_envy_freeable,
    gen_bad_nsw,
    gen_constant_sum,
    gen_imposs,
    gen_random,
    gen_sqrt,
    gen_tightness,
    min_total_transfer,
    min_transfer_at_welfare,
)

__version__ = "0.1.0"
