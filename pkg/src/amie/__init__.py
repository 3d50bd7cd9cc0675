"""Average model intervention effects for causal feature attribution.

The toolkit measures how a trained classifier's predicted probability
moves when one feature is toggled, averages that over a dataset, and
studies when the resulting attribution identifies the outcome's direct
causes: synthetic causal worlds with controllable latent structure,
exact-inference oracle models, structural false-positive analysis, a
marginal independence screen, and semi-synthetic benchmark networks.
"""

__version__ = "0.1.0"

from .dataset import Dataset, from_csv, split, to_csv
from .explain import (
    AmieReport,
    amie,
    amie_values,
    build_report,
    consistency,
    independence_filter,
    mie,
    nonzero_set,
)
from .graphs import (
    CausalDag,
    FalsePositiveCase,
    FeatureRole,
    FpKind,
    RoleKind,
    ancestors,
    classify_false_positive,
    classify_roles,
    d_separated,
    has_inducing_path,
    make_dag,
    topological_order,
)
from .learners import (
    ForestParams,
    LogRegParams,
    accuracy,
    fit_forest,
    fit_logreg,
    permutation_importance,
)
from .synth import (
    BayesNet,
    GenConfig,
    LatentMode,
    generate_dag,
    mask_latents,
    oracle_model,
    random_cpts,
    sample,
)

__all__ = [
    "__version__",
    "AmieReport",
    "BayesNet",
    "CausalDag",
    "Dataset",
    "FalsePositiveCase",
    "FeatureRole",
    "ForestParams",
    "FpKind",
    "GenConfig",
    "LatentMode",
    "LogRegParams",
    "RoleKind",
    "accuracy",
    "amie",
    "amie_values",
    "ancestors",
    "build_report",
    "classify_false_positive",
    "classify_roles",
    "consistency",
    "d_separated",
    "fit_forest",
    "fit_logreg",
    "from_csv",
    "generate_dag",
    "has_inducing_path",
    "independence_filter",
    "make_dag",
    "mask_latents",
    "mie",
    "nonzero_set",
    "oracle_model",
    "permutation_importance",
    "random_cpts",
    "sample",
    "split",
    "to_csv",
    "topological_order",
]
