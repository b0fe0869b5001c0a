from app.diffnet.core import LayerSpec, Module, Parameter
from app.diffnet.layers import LSTM, Conv1D, Dense, NoForwardCacheError, Tanh
from app.diffnet.losses import bce_with_logits, kl_loss, log_softmax, softmax
from app.diffnet.optim import SGD, sgd_step

__all__ = [
    "LayerSpec",
    "Module",
    "Parameter",
    "Dense",
    "Conv1D",
    "LSTM",
    "Tanh",
    "NoForwardCacheError",
    "softmax",
    "log_softmax",
    "kl_loss",
    "bce_with_logits",
    "SGD",
    "sgd_step",
]
