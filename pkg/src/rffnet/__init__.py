"""Online distributed kernel learning over networks with random Fourier features."""

from .features import (
    FeatureMap,
    approx_kernel,
    gaussian_kernel,
    kernel_expansion_eval,
    sample_feature_map,
    transform,
    transform_batch,
)
from .losses import LossEval, LossModel, hinge_reg_loss, make_loss, squared_loss
from .network import (
    Topology,
    algebraic_connectivity,
    disagreement,
    metropolis_weights,
    random_connected_graph,
    validate_doubly_stochastic,
)
from .learners import (
    MetricsTrace,
    NetworkState,
    StepSchedule,
    adapt,
    combine,
    run_diffusion,
    run_single,
)
from .baselines import Dictionary, klms_predict, qklms_step, run_kernel_lms
from .data import (
    Dataset,
    SampleStream,
    gen_chaotic1_stream,
    gen_chaotic2_stream,
    gen_kernel_expansion_stream,
    gen_quadratic_stream,
    load_libsvm,
    partition_dataset,
)
from .analysis import (
    BlockMatrix,
    StabilityReport,
    SteadyStateMSE,
    block_kron,
    comparator_loss_series,
    covariance_recursion_step,
    empirical_regret,
    fit_comparator,
    mean_convergence_bound,
    ms_stability_check,
    rzz_closed_form,
    rzz_monte_carlo,
    steady_state_mse,
    theta_opt,
    vecbr,
)

__version__ = "0.1.0"
