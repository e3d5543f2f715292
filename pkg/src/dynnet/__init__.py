"""dynnet: sparse continuous-time neural networks built from LTI systems.

Constructs, without gradient-based training, a network of first- and
second-order ODE neurons whose input-output map equals that of a given
linear time-invariant system, and simulates it with per-neuron adaptive
integration.
"""

from .preprocess import StateSpace, TransformedLTI, preprocess_lti
from .network import DynnParams, build_dynn
from .simulate import (
    InputSignal,
    SolverConfig,
    derive_input_signal,
    forward_pass_stepped,
    forward_pass_whole,
)
from .oracle import lsim_exact, reference_coupled_solve
from .estimator import DynnSimulator

__all__ = [
    "StateSpace",
    "TransformedLTI",
    "preprocess_lti",
    "DynnParams",
    "build_dynn",
    "InputSignal",
    "SolverConfig",
    "derive_input_signal",
    "forward_pass_whole",
    "forward_pass_stepped",
    "lsim_exact",
    "reference_coupled_solve",
    "DynnSimulator",
]

__version__ = "0.1.0"
