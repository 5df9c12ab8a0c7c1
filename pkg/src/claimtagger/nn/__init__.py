from .autograd import (
    Parameter,
    Tensor,
    add,
    concat,
    dropout,
    embedding_lookup,
    log_softmax,
    matmul,
    mean_of,
    mul,
    narrow,
    neg,
    scale,
    sigmoid,
    softmax_cross_entropy,
    softmax_probs,
    stack_rows,
    tanh,
    tsum,
    xavier_uniform,
)
from .checkpoint import (
    load_checkpoint,
    load_parameters,
    read_checkpoint,
    save_checkpoint,
    write_checkpoint,
)
from .lstm import FORGET_BIAS, LstmCellParams, bilstm_encode, init_lstm_cell, lstm_step
from .optim import Adam, PlateauScheduler, clip_global_norm
