"""Cross-subject neural response mapping toolkit.

Fit candidate transform classes between response profiles, score them for
cross-subject predictivity and area-identification specificity, apply
trial-noise correction, and generate synthetic populations with a known
ground truth.
"""
__version__ = "0.1.0"

from .data import (
    PopulationDataset,
    ResponseMatrix,
    ResponseProfile,
    SplitSpec,
    TrialTensor,
    load_dataset,
    save_dataset,
    split_stimuli,
    trial_average,
)
from .exceptions import (
    ConfigError,
    ConvergenceError,
    DatasetError,
    FitError,
    IatcError,
    SimulationError,
)
from .softplus import softplus, softplus_derivative, softplus_inverse

__all__ = [
    "__version__",
    "PopulationDataset",
    "ResponseMatrix",
    "ResponseProfile",
    "SplitSpec",
    "TrialTensor",
    "load_dataset",
    "save_dataset",
    "split_stimuli",
    "trial_average",
    "softplus",
    "softplus_derivative",
    "softplus_inverse",
    "IatcError",
    "DatasetError",
    "FitError",
    "ConvergenceError",
    "SimulationError",
    "ConfigError",
]
