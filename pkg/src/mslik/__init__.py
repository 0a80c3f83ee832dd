"""Multiscale likelihood factorizations and complexity-penalized estimators
for Gaussian, Poisson and multinomial data on 1-D grids."""

from .errors import (
    InvalidArgument,
    InvalidConfig,
    InvalidData,
    InvalidParams,
    InvalidSignal,
    InvalidSplit,
    ResourceLimit,
)
from .estimators import (
    EstimateResult,
    PenaltyConfig,
    QuantizationGrid,
    brute_force_oracle,
    estimate,
    estimate_rdp,
    estimate_rp,
    estimate_threshold,
    objective,
    quantized_penalized_mle,
    segmentation_dp,
)
from .models import (
    Gaussian,
    ModelSpec,
    Multinomial,
    MultiscaleParams,
    Poisson,
    cascade_kill_cost,
    decompose,
    draw_observations,
    hellinger_sq,
    kl_div,
    loglik_direct,
    loglik_factorized,
    model_from_name,
    node_costs,
    reconstruct,
    sample_theta_from_signal,
    squared_error_loss,
)
from .partition import (
    HaarVector,
    Interval,
    PartitionTree,
    SumPyramid,
    balanced_crp,
    comb_crp,
    crp_from_splits,
    dyadic_crp,
    enumerate_crps,
    haar_coefficient,
    haar_vector,
    is_refinement,
    random_crp,
    sum_pyramid,
)
from .risk import RiskCurve, fit_rate_slope, kraft_sum, monte_carlo_risk, oracle_bound_check
from .signals import Signal, SignalSpec, make_signal, preset

__version__ = "0.1.0"
