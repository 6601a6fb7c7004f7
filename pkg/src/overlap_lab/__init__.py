"""overlap-lab: covariate overlap diagnostics and overlap-robust causal effects.

Diagnoses overlap between treatment groups through Gaussian-measure
divergences and a spectral phase-transition statistic, and estimates average
causal effects on data-adaptive subpopulations (propensity trimming and
SVM-margin selection).
"""

__version__ = "0.1.0"

from .divergence import (
    DiscreteDistributionPair,
    DivergenceResult,
    GaussianMeasurePair,
    check_overlap_lr_equivalence,
    dichotomy_verdict,
    gaussian_bhattacharyya,
    gaussian_divergences,
    gaussian_relative_entropy,
    lr_bounds,
    monte_carlo_bhattacharyya,
    pair_from_mercer,
    pair_from_samples,
)
from .errors import OverlapLabError
from .estimators import (
    BootstrapResult,
    CausalReport,
    ace_difference_in_means,
    ace_ipw,
    ace_oracle,
    bootstrap_se,
    margin_ace_pipeline,
)
from .gp import (
    FunctionalSampleSet,
    Grid,
    KernelSpec,
    MercerSpec,
    covariance_on_grid,
    fourier_basis,
    gaussian_kernel_mercer,
    kernel_eval,
    kernel_gram,
    load_mercer_spec,
    mercer_from_families,
    sample_paths,
    save_mercer_spec,
)
from .mercer import (
    PhaseTransitionReport,
    SpectralEstimate,
    empirical_eigendecomposition,
    overlap_verdict,
    phase_transition_statistic,
    project_mean_difference,
    trapezoid_weights,
)
from .propensity import (
    MarginSet,
    ObservationalDataset,
    PropensityFit,
    TrimmingRegion,
    crump_region,
    fit_kernel_svm,
    fit_logistic,
    margin_set,
    predict_propensity,
    svm_decision_function,
)
from .tree import (
    OverlapLabels,
    Tree,
    fit_tree,
    overlap_labels,
    parse_rendered_tree,
    predict_tree,
    prune_tree,
    render_tree,
)
