from .gradcheck import grad_check
from .model import (
    BiLstmParams,
    FusionParams,
    GnnParams,
    Hyperparams,
    ModelMismatchError,
    ModelParams,
    RowLengthMismatchError,
    TrainConfig,
    bilstm_forward,
    classify,
    gnn_forward,
    init_model,
    load_model,
    loss,
    predict,
    save_model,
    score,
)
from .train import Adam, DivergedLossError, TrainResult, train

__all__ = [
    "Adam",
    "BiLstmParams",
    "DivergedLossError",
    "FusionParams",
    "GnnParams",
    "Hyperparams",
    "ModelMismatchError",
    "ModelParams",
    "RowLengthMismatchError",
    "TrainConfig",
    "TrainResult",
    "bilstm_forward",
    "classify",
    "gnn_forward",
    "grad_check",
    "init_model",
    "load_model",
    "loss",
    "predict",
    "save_model",
    "score",
    "train",
]
