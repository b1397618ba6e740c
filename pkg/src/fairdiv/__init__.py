"""Dependency estimation between a sensitive viewpoint and predictions, and a
linear classifier trained under a bound on that dependency."""
from .bounds import (
    ComplexityEstimate,
    LossMatrix,
    constant_sweep,
    empirical_rademacher,
    generalization_bound,
    phi_shape_table,
    restriction_cost_bound,
)
from .dependency import (
    DependencyReport,
    choose_scale_a,
    dependency_bound,
    empirical_divergence,
    estimate_dependency,
    theorem1_constant,
    u_statistic_diagnostic,
)
from .divergence import (
    DiscreteJoint,
    PhiGenerator,
    RatioBounds,
    conjugate_maximizer,
    exact_dependency,
    exact_f_divergence,
    get_phi,
    phi_conjugate,
    phi_eval,
    phi_subgradient,
)
from .estimators import DependencyAuditor, FairClassifier
from .exceptions import (
    AbsoluteContinuityError,
    ConvergenceError,
    DomainError,
    EmptyDataset,
    FairDivError,
    InfeasibleBudget,
    InsufficientSamples,
    ShapeError,
)
from .learner import (
    LinearScorer,
    TrainConfig,
    TrainedModel,
    empirical_risk,
    fairness_functional,
    fairness_subgradient,
    predict,
    train,
    train_dataset,
)
from .ratio import KernelSpec, LabeledPair, RatioTable, build_qp, empirical_mmd, estimate_ratio, solve_ratio_qp
from .synthetic import (
    Dataset,
    DiscreteScenario,
    GaussianScenario,
    dataset_from_csv,
    dataset_to_csv,
    generate,
    oracle_dependency,
)

__version__ = "0.1.0"
