"""Tensor-network analysis of convolutional arithmetic circuits.

Builds the tensor networks of shallow and deep ConvACs, measures the
entanglement of their weights tensors across input partitions, and computes
the min-cut bounds on the matricization rank those networks can reach.
"""

__version__ = "0.1.0"

from .convac import (
    ConvACSpec,
    WeightSet,
    build_deep_tn,
    build_shallow_tn,
    build_tn,
    forward,
    precise_weights_tensor,
    random_weights,
    score_inner_product,
    tn_scores,
    weights_tensor,
)
from .errors import BoundViolation, SizeLimitError, TnarchError, ValidationError
from .network import TensorNetwork, contract, materialize_delta, validate
from .tensors import (
    EntanglementReport,
    IndexPartition,
    entanglement_measures,
    matricize,
    numerical_rank,
    rank1_from_vectors,
    svd_spectrum,
    tensor_product,
)
