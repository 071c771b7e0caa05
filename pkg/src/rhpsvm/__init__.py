"""Binary SVM training with a rescaled Huberized pinball loss.

The library provides the loss family and its convex/concave split, kernel
and data plumbing, the difference-of-convex training loop with two inner
solvers (an exact primal Newton reference and clipped dual coordinate
descent), convex baselines (hinge, pinball, Huberized pinball), and a small
benchmark harness for noise robustness, resampling stability and outlier
sensitivity.
"""

from .data import (
    Dataset,
    NoiseSpec,
    ParseError,
    StandardizeTransform,
    dataset_to_csv,
    inject_label_noise,
    parse_csv,
    parse_libsvm,
    standardize,
    stratified_kfold,
    stratified_split,
    synth_two_gaussians,
)
from .evaluation import (
    BoundInputs,
    BoundReport,
    FitConfig,
    MetricsReport,
    OutlierShiftReport,
    StabilityReport,
    accuracy_metrics,
    bound_inputs_for_model,
    bound_terms,
    generalization_bound,
    outlier_shift,
    resampling_stability,
)
from .kernels import Gram, KernelKind, KernelSpec, decision_expansion, gram_matrix, kernel_eval
from .losses import (
    FisherReport,
    LossKind,
    LossParams,
    delta_coefficient,
    fisher_consistency_check,
    g_part,
    h_part,
    hinge,
    huberized_pinball,
    huberized_pinball_deriv,
    lipschitz_bound,
    loss_table,
    loss_table_csv,
    pinball,
    rescaled_hp,
    rescaled_hp_deriv,
)
from .model import TrainedModel, decision_value, decision_values, fit, load, predict, predict_many, save
from .solver import (
    CccpState,
    IndexPartition,
    InnerMethod,
    SolverConfig,
    SolverError,
    cccp_train,
    compute_margins,
    delta_vector,
    inner_solve_dual,
    inner_solve_primal,
    partition,
    rhp_objective,
    train_baseline,
)

__version__ = "0.1.0"
