"""Linear-chain CRF inference with a compiled kernel and numpy fallback."""

from ._backend import BACKEND, available_backends
from .core import (
    Transitions,
    TransitionGrads,
    constrained_viterbi,
    log_partition,
    marginals,
    nll,
    nll_gradients,
    score_sequence,
    viterbi,
)

__all__ = [
    "BACKEND",
    "Transitions",
    "TransitionGrads",
    "available_backends",
    "constrained_viterbi",
    "log_partition",
    "marginals",
    "nll",
    "nll_gradients",
    "score_sequence",
    "viterbi",
]
