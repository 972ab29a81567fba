from .tensor import (Tensor, no_grad, add, mul, matmul, transpose, reshape,
                     take, concat, tsum, tmean, tanh, sigmoid, relu, exp, log,
                     softmax, log_softmax, cross_entropy, layer_norm,
                     softmax_np, log_softmax_np)
from .layers import (Linear, LayerNorm, Embedding, BiLstm, Mha, causal_mask,
                     uniform_init)
from .optim import Adam, triangular_lr, constant_lr, clip_grads, global_norm

__all__ = [
    "Tensor", "no_grad", "add", "mul", "matmul", "transpose", "reshape",
    "take", "concat", "tsum", "tmean", "tanh", "sigmoid", "relu", "exp",
    "log", "softmax", "log_softmax", "cross_entropy", "layer_norm",
    "softmax_np", "log_softmax_np",
    "Linear", "LayerNorm", "Embedding", "BiLstm", "Mha", "causal_mask",
    "uniform_init", "Adam", "triangular_lr", "constant_lr", "clip_grads",
    "global_norm",
]
