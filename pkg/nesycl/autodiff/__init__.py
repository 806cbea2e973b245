from __future__ import annotations

from .functional import cross_entropy, kl_divergence, log_softmax_rows, mse, nll, softmax_rows
from .gradcheck import check_gradients, numerical_gradient, relative_error
from .optim import OptimizerState, adam_step, zero_grad
from .tensor import EPS, Tape, Tensor, as_tensor, backward, concat, grad_enabled, matmul, no_grad, segment_sum

__all__ = [
	"EPS",
	"OptimizerState",
	"Tape",
	"Tensor",
	"adam_step",
	"as_tensor",
	"backward",
	"check_gradients",
	"concat",
	"cross_entropy",
	"grad_enabled",
	"kl_divergence",
	"log_softmax_rows",
	"matmul",
	"mse",
	"nll",
	"no_grad",
	"numerical_gradient",
	"relative_error",
	"segment_sum",
	"softmax_rows",
	"zero_grad",
]
