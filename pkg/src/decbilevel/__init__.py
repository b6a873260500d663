"""Decentralized stochastic bilevel optimization simulator.

A library and CLI for running single-loop decentralized bilevel algorithms
(momentum hypergradient estimation, gradient tracking, consensus averaging)
and their decentralized SGD baselines on analytic problem oracles, with
exact sample and communication accounting.
"""

__version__ = "0.1.0"

from decbilevel.numerics import RngStream, draw_gaussian, draw_uniform_int, sym_eigvals
from decbilevel.topology import (
    ConsensusMatrix,
    Graph,
    erdos_renyi,
    laplacian_matrix,
    metropolis_matrix,
    spectral_gap,
)

__all__ = [
    "RngStream",
    "draw_gaussian",
    "draw_uniform_int",
    "sym_eigvals",
    "Graph",
    "ConsensusMatrix",
    "erdos_renyi",
    "metropolis_matrix",
    "laplacian_matrix",
    "spectral_gap",
    "__version__",
]
