from .gradcheck import (
    GradCheckResult,
    compare_gradients,
    finite_diff_check,
    flatten_params,
    unflatten_params,
)
from .optim import AdamWHyper, AdamWState, adamw_step, clip_grad_norm, global_norm
from .tensor import (
    Node,
    Tape,
    Tensor,
    active_tape,
    add,
    as_tensor,
    backward,
    broadcast_to,
    concat,
    div,
    dropout,
    exp,
    getitem,
    layer_norm,
    log,
    matmul,
    mean,
    mul,
    neg,
    power,
    relu,
    reshape,
    sigmoid,
    softmax,
    square,
    stack,
    sub,
    sum_,
    swapaxes,
    take,
    tanh,
    transpose,
)

__all__ = [name for name in dir() if not name.startswith("_")]
