"""Small reference models and graphs used by the tests, docs and CLI."""

import numpy as np

from .graph import CausalGraph, from_edge_labels, from_scm
from .model import Scm


def three_node_model(beta2=1.0) -> Scm:
    """Two instruments, ``X1 -> X2 -> Y``, instrument 2 also hitting ``X2``
    and ``X3``; all coefficients one. Total effects ``[[1,1,0],[1,2,1]]``."""
    A = np.array([[1.0, 1.0], [0.0, 1.0], [0.0, 1.0]])
    B = np.zeros((3, 3))
    B[1, 0] = 1.0
    return Scm(B=B, A=A, beta_star=np.array([0.0, beta2, 0.0]))


def cancellation_model() -> Scm:
    """Fine-tuned model where ``X3 = X1 + 2 X2`` reproduces the instrument
    effect on ``Y`` exactly, so the 1-sparse ``(0, 0, 1)`` solves the
    moment equation as well as the causal ``(1, 2, 0)``."""
    A = np.array([[4.0, 0.0], [0.0, 3.0], [0.0, 0.0]])
    B = np.zeros((3, 3))
    B[2, :] = [1.0, 2.0, 0.0]
    return Scm(B=B, A=A, beta_star=np.array([1.0, 2.0, 0.0]))


def three_node_graph() -> CausalGraph:
    return from_scm(three_node_model())


_CHANNEL_EDGES = [
    ("I1", "X8"), ("I2", "X8"), ("I2", "X9"), ("I3", "X8"), ("I3", "X9"),
    ("I3", "X10"), ("I4", "X10"),
    ("X8", "X5"), ("X9", "X6"), ("X10", "X7"),
    ("X5", "X1"), ("X5", "X2"), ("X5", "X3"), ("X6", "X2"), ("X6", "X4"),
    ("X7", "X2"), ("X7", "X3"), ("X7", "X4"),
    ("X1", "Y"), ("X2", "Y"),
]


def channel_graph(four_parents=False) -> CausalGraph:
    """Four instruments feeding ten predictors through a three-node layer
    (``X5, X6, X7``). With ``four_parents`` the response also depends on
    ``X3`` and ``X4``, and the layer becomes a bottleneck."""
    edges = list(_CHANNEL_EDGES)
    if four_parents:
        edges += [("X3", "Y"), ("X4", "Y")]
    return from_edge_labels(4, 10, edges)


def few_instruments_graph() -> CausalGraph:
    """Three instruments, five predictors, parents ``X1, X2``."""
    edges = [
        ("I1", "X3"), ("I2", "X4"), ("I3", "X5"),
        ("X3", "X1"), ("X4", "X1"), ("X4", "X2"), ("X5", "X2"),
        ("X1", "Y"), ("X2", "Y"),
    ]
    return from_edge_labels(3, 5, edges)


MODELS = {
    "three-node": three_node_model,
    "cancellation": cancellation_model,
}

GRAPHS = {
    "three-node": three_node_graph,
    "channel": channel_graph,
    "channel-four-parents": lambda: channel_graph(four_parents=True),
    "few-instruments": few_instruments_graph,
}
