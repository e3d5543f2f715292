"""Ground-truth LTI simulation, independent of the network path.

Discrete propagation through augmented matrix exponentials, exact (up to
expm accuracy) for piecewise-linear or piecewise-constant inputs, plus a
direct adaptive solve of the coupled system for cross checks and for the
function-evaluation-count comparison.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import matrix_exponential
from .preprocess import StateSpace
from .simulate import InputSignal, SolverConfig, integrate_dense


@dataclass(frozen=True)
class LsimResult:
    """Sampled states and outputs on the propagation grid."""

    times: np.ndarray
    states: np.ndarray  # (n_times, d_h)
    outputs: np.ndarray  # (n_times, d_o)


def _propagators(a, b, h):
    """(Ad, Bd0, Bd1) from the exponential of the augmented block matrix
    [[A, B, 0], [0, 0, I], [0, 0, 0]] * h.

    x_next = Ad x + Bd0 u_k + Bd1 (u_{k+1} - u_k) for u linear on the step.
    """
    n, m = b.shape
    aug = np.zeros((n + 2 * m, n + 2 * m))
    aug[:n, :n] = a
    aug[:n, n : n + m] = b
    aug[n : n + m, n + m :] = np.eye(m)
    phi = matrix_exponential(aug, h)
    ad = phi[:n, :n]
    bd0 = phi[:n, n : n + m]
    bd1 = phi[:n, n + m :] / h
    return ad, bd0, bd1


def lsim_exact(ss, times, u_samples, interpolation="piecewise-linear"):
    """Propagate x(0)=0 along a sample grid, exactly for the declared
    interpolation of the input samples."""
    if not isinstance(ss, StateSpace):
        ss = StateSpace(*ss)
    times = np.asarray(times, dtype=float)
    u = np.asarray(u_samples, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if len(times) != len(u):
        raise ValueError("times and u_samples must have equal length")
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("times must be strictly increasing")
    if interpolation not in ("piecewise-linear", "piecewise-constant"):
        raise ValueError(f"unknown interpolation {interpolation!r}")
    if u.shape[1] != ss.n_inputs:
        raise ValueError(f"u_samples must have {ss.n_inputs} columns")

    n = ss.n_states
    cache = []  # [(h, ad, bd0, bd1)]

    def propagators_for(h):
        for h0, ops in cache:
            if abs(h - h0) <= 1e-14 * max(1.0, abs(h0)):
                return ops
        ops = _propagators(ss.a, ss.b, h)
        cache.append((h, ops))
        return ops

    x = np.zeros((len(times), n))
    for k in range(len(times) - 1):
        h = times[k + 1] - times[k]
        ad, bd0, bd1 = propagators_for(h)
        if interpolation == "piecewise-linear":
            x[k + 1] = ad @ x[k] + bd0 @ u[k] + bd1 @ (u[k + 1] - u[k])
        else:
            x[k + 1] = ad @ x[k] + bd0 @ u[k]
    y = x @ ss.c.T + u @ ss.d.T
    return LsimResult(times=times, states=x, outputs=y)


def reference_coupled_solve(ss, u, span, cfg=None):
    """Single adaptive integration of the full coupled system dx = Ax + Bu.

    Returns the dense state trajectory; its ``nfe`` is the evaluation count
    used by the decoupling comparison.
    """
    if not isinstance(ss, StateSpace):
        ss = StateSpace(*ss)
    if not isinstance(u, InputSignal):
        raise TypeError("u must be an InputSignal")
    cfg = cfg or SolverConfig()
    cfg = cfg.with_breakpoints(
        [b for b in u.breakpoints if span[0] < b < span[1]]
    )
    a, b = ss.a, ss.b

    def rhs(t, x):
        return a @ x + b @ u.eval_u(t)

    return integrate_dense(rhs, np.zeros(ss.n_states), span, cfg)
