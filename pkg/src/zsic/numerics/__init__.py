"""Float64 numerical substrate: autodiff, LSTM, ridge solver, Adam."""

from .autograd import Tensor, UsageError
from .linalg import NumericalError, entropy, euclidean, ridge_objective_grad, ridge_solve, softmax
from .lstm import LstmParams, bilstm, bilstm_forward, lstm
from .optim import AdamState, ParamStore, adam_step

__all__ = [
    "AdamState",
    "LstmParams",
    "NumericalError",
    "ParamStore",
    "Tensor",
    "UsageError",
    "adam_step",
    "bilstm",
    "bilstm_forward",
    "entropy",
    "euclidean",
    "lstm",
    "ridge_objective_grad",
    "ridge_solve",
    "softmax",
]
