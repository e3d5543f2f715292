"""Estimator-style front end around the construction and forward pass."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .network import build_dynn
from .preprocess import StateSpace
from .simulate import (
    InputSignal,
    SolverConfig,
    derive_input_signal,
    forward_pass_stepped,
    forward_pass_whole,
)


class DynnSimulator(BaseEstimator):
    """Builds a dynamic neural network from an LTI system and simulates it.

    ``fit`` consumes the state-space matrices and computes the network
    architecture and parameters (no iterative training is involved);
    ``predict`` runs the forward pass for an input signal on a time grid.

    Parameters
    ----------
    n_clusters : int or None
        Number of eigenvalue clusters (horizontal layers requested).  None
        means one cluster per state, the sparsest achievable architecture.
    clustering : str
        Clustering algorithm id; only "kmeans" ships.
    rtol, atol : float
        Solver tolerances for the forward pass.
    mode : str
        "whole" solves each neuron over the full domain, "stepped" restarts
        every ``dt`` along the way.
    dt : float or None
        Interval length for stepped mode.
    max_cond : float or None
        Warn when the transformation's condition number exceeds this cap.
    random_state : int
        Seed for the clustering initialization.

    Attributes
    ----------
    params_ : DynnParams
        Constructed network parameters.
    transformed_ : TransformedLTI
        Block-diagonal realization with the transformation matrix.
    cond_t_ : float
        2-norm condition number of the transformation matrix.
    nfe_report_ : NfeReport
        Per-neuron evaluation counts of the last ``predict`` call.
    """

    def __init__(
        self,
        n_clusters=None,
        clustering="kmeans",
        rtol=1e-10,
        atol=1e-10,
        mode="whole",
        dt=None,
        max_cond=None,
        random_state=0,
    ):
        self.n_clusters = n_clusters
        self.clustering = clustering
        self.rtol = rtol
        self.atol = atol
        self.mode = mode
        self.dt = dt
        self.max_cond = max_cond
        self.random_state = random_state

    def fit(self, system, y=None):
        """Construct the network for a system given as a StateSpace or an
        (A, B, C, D) tuple.  Returns self."""
        if not isinstance(system, StateSpace):
            system = StateSpace(*system)
        n_clusters = self.n_clusters if self.n_clusters is not None else system.n_states
        self.params_, self.transformed_ = build_dynn(
            system,
            n_clusters,
            algorithm=self.clustering,
            seed=self.random_state,
            max_cond=self.max_cond,
        )
        self.cond_t_ = self.transformed_.cond_t
        return self

    def predict(self, u, t):
        """Network output sampled on the grid ``t`` for the input ``u``.

        ``u`` may be an InputSignal or a ``(times, values)`` sample pair
        (interpolated piecewise-linearly).
        """
        if not hasattr(self, "params_"):
            raise RuntimeError("this estimator is not fitted yet; call fit first")
        if not isinstance(u, InputSignal):
            times, values = u
            u = derive_input_signal(times, values, mode="piecewise-linear")
        t = np.asarray(t, dtype=float)
        span = (float(t[0]), float(t[-1]))
        cfg = SolverConfig(rtol=self.rtol, atol=self.atol)
        if self.mode == "whole":
            out, report = forward_pass_whole(self.params_, u, span, cfg)
        elif self.mode == "stepped":
            if self.dt is None:
                raise ValueError("stepped mode requires dt")
            out, report = forward_pass_stepped(self.params_, u, span, self.dt, cfg)
        else:
            raise ValueError(f"unknown mode {self.mode!r}")
        self.nfe_report_ = report
        return out(t)
