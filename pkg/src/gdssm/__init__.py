"""Gated state-space models that emulate gradient descent in context.

The package provides exact parameter constructions under which a gated
state-space layer reproduces (multi-step, regularized, nonlinear) gradient
descent on an implicit regression model, reference GD/Newton oracles, a
self-contained reverse-mode gradient engine for training the same models,
and an evaluation harness with a config-driven command line runner.
"""

from .autodiff import Tensor
from .model import (
    GluHead,
    NdLayerParams,
    Ssm1dParams,
    SsmModel,
    analytic_sensitivity,
    construct_1d,
    construct_multilayer,
    construct_nd,
    forward_1d,
    forward_multilayer,
    forward_nd,
    forward_nonlinear,
    glu_identity,
    load_checkpoint,
    model_predict,
    model_predict_batch,
    save_checkpoint,
    sensitivity,
    weighted_outer_sum,
)
from .numerics import RngStream, cosine_similarity
from .oracles import (
    GdConfig,
    gd_predict,
    gd_predict_batch,
    gd_weights,
    lsa_gd_construction,
    lsa_predict,
    newton_predict,
    tune_eta,
)
from .tasks import RegressionTask, sample_task
from .training import TrainConfig, TrainingDiverged, grad_check, init_model, train

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "Tensor",
    "GluHead",
    "NdLayerParams",
    "Ssm1dParams",
    "SsmModel",
    "analytic_sensitivity",
    "construct_1d",
    "construct_multilayer",
    "construct_nd",
    "forward_1d",
    "forward_multilayer",
    "forward_nd",
    "forward_nonlinear",
    "glu_identity",
    "load_checkpoint",
    "model_predict",
    "model_predict_batch",
    "save_checkpoint",
    "sensitivity",
    "weighted_outer_sum",
    "RngStream",
    "cosine_similarity",
    "GdConfig",
    "gd_predict",
    "gd_predict_batch",
    "gd_weights",
    "lsa_gd_construction",
    "lsa_predict",
    "newton_predict",
    "tune_eta",
    "RegressionTask",
    "sample_task",
    "TrainConfig",
    "TrainingDiverged",
    "grad_check",
    "init_model",
    "train",
]
