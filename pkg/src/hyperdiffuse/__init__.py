"""Discounted Markov diffusion kernels and SHKC node classification on hypergraphs."""

__version__ = "0.1.0"

from .hypergraph import Hypergraph, build_knn_hypergraph, concat_multimodal, validate  # noqa: E402
from .transition import RhoFunction, TransitionMatrix, build_transition, l1_norm, prop1_bound  # noqa: E402
from .diffusion import (  # noqa: E402
    DiffusionOperator,
    DiffusionParams,
    KernelMatrix,
    apply_diffusion,
    diffusion_distance,
    kernel_matrix,
    projection,
)
from .model import ShkcModel, TrainConfig, TrainResult, forward, init_params, loss_and_grads, train  # noqa: E402
