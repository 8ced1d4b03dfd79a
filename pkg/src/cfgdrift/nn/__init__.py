from .tensor import Tensor, no_grad
from .layers import (
    BatchNorm,
    Dense,
    DenseBlock,
    GCNLayer,
    GINLayer,
    GraphBatch,
    Module,
    gcn_layer,
    gin_layer,
    jk_concat,
    readout,
)
from .optim import Adam
from .gradcheck import grad_check

__all__ = [
    "Adam", "BatchNorm", "Dense", "DenseBlock", "GCNLayer", "GINLayer", "GraphBatch",
    "Module", "Tensor", "gcn_layer", "gin_layer", "grad_check", "jk_concat", "no_grad", "readout",
]
