"""Costs of simulating discrete memoryless channels, one-shot and asymptotic."""

from .asymptotics import (
    BaTrace,
    ModerateRates,
    SecondOrderParams,
    capacity_ba,
    cs_cc_bracket,
    dispersion,
    inv_normal_cdf,
    moderate_deviation_rates,
    normal_cdf,
    second_order_coding,
    second_order_simulation,
)
from .broadcast import (
    MultipartiteMi,
    RateRegion,
    common_dispersion,
    ds_product_lower_bound,
    multipartite_mi,
    rate_region,
    region_contains,
    region_corners_k2,
    tilde_c_ba,
)
from .divergences import (
    beta_star,
    d_h,
    d_max,
    d_max_smooth,
    d_s_plus,
    kl,
    var_div,
)
from .lp import LpNumericsError, LpProblem, LpSolution, solve_lp
from .ns_meta import (
    BscNsCost,
    NsCostResult,
    NsEpsResult,
    SmoothImax,
    bsc_channel,
    bsc_ns_cost,
    bsc_ns_eps,
    channel_d_max_smooth,
    d_s_plus_channel,
    i_max,
    i_max_smooth,
    ns_cost,
    ns_eps_for_cost,
    smoothing_witness,
)
from .prob import (
    BroadcastDmc,
    Dmc,
    JointPmf,
    Pmf,
    channel_from_json,
    channel_to_json,
    channel_tvd,
    entropy_bits,
    output_marginal,
    push_forward,
    reduce_broadcast,
    tensor_power,
    tvd,
)
from .protocols import (
    BroadcastRun,
    ConvexSplitParams,
    ConvexSplitReport,
    RejectionPlan,
    RejectionRun,
    RngStream,
    achievability_size,
    broadcast_protocol_run,
    convex_split_check,
    convex_split_mixture,
    induced_channel_literal,
    induced_channel_scatter,
    rejection_exact_marginal,
    rejection_sample_run,
)

__version__ = "0.1.0"

__all__ = [
    "BaTrace",
    "BroadcastDmc",
    "BroadcastRun",
    "BscNsCost",
    "ConvexSplitParams",
    "ConvexSplitReport",
    "Dmc",
    "JointPmf",
    "LpNumericsError",
    "LpProblem",
    "LpSolution",
    "ModerateRates",
    "MultipartiteMi",
    "NsCostResult",
    "NsEpsResult",
    "Pmf",
    "RateRegion",
    "RejectionPlan",
    "RejectionRun",
    "RngStream",
    "SecondOrderParams",
    "SmoothImax",
    "achievability_size",
    "beta_star",
    "broadcast_protocol_run",
    "bsc_channel",
    "bsc_ns_cost",
    "bsc_ns_eps",
    "capacity_ba",
    "channel_d_max_smooth",
    "channel_from_json",
    "channel_to_json",
    "channel_tvd",
    "common_dispersion",
    "convex_split_check",
    "convex_split_mixture",
    "cs_cc_bracket",
    "d_h",
    "d_max",
    "d_max_smooth",
    "d_s_plus",
    "d_s_plus_channel",
    "dispersion",
    "ds_product_lower_bound",
    "entropy_bits",
    "i_max",
    "i_max_smooth",
    "induced_channel_literal",
    "induced_channel_scatter",
    "inv_normal_cdf",
    "kl",
    "moderate_deviation_rates",
    "multipartite_mi",
    "normal_cdf",
    "ns_cost",
    "ns_eps_for_cost",
    "output_marginal",
    "push_forward",
    "rate_region",
    "reduce_broadcast",
    "region_contains",
    "region_corners_k2",
    "rejection_exact_marginal",
    "rejection_sample_run",
    "second_order_coding",
    "second_order_simulation",
    "smoothing_witness",
    "solve_lp",
    "tensor_power",
    "tilde_c_ba",
    "tvd",
    "var_div",
    "__version__",
]
