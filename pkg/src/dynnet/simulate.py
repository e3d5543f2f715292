"""Adaptive ODE integration with dense output, and the network forward pass.

One embedded Runge-Kutta pair (Dormand-Prince 5(4)) with a PI step-size
controller and the matching quartic continuous extension.  Integration is
split at mandatory breakpoints (input knots, stepped-mode interval bounds)
so no step straddles a derivative discontinuity of the input.  Every
right-hand-side evaluation is counted.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import IntegrationError, PiecewiseConstantInputWarning
from .validation import check_tolerances

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# coefficients of the quartic continuous extension (columns: theta..theta^4)
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_ORDER = 5  # propagating order; error estimator is one lower
# PI step control (classic DOPRI5 tuning): h *= safety * err^-0.17 * prev^0.04
_PI_ALPHA = 0.17
_PI_BETA = 0.04
_UNDERFLOW_RTOL = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and step constraints of the adaptive solver."""

    method: str = "rk45"
    rtol: float = 1e-10
    atol: float = 1e-10
    max_step: float | None = None
    breakpoints: tuple = ()
    max_steps: int = 500_000

    def __post_init__(self):
        if self.method != "rk45":
            raise ValueError(f"unknown method {self.method!r}; available: rk45")
        check_tolerances(self.rtol, self.atol)
        object.__setattr__(
            self, "breakpoints", tuple(float(b) for b in self.breakpoints)
        )

    def with_breakpoints(self, pts):
        return SolverConfig(
            method=self.method,
            rtol=self.rtol,
            atol=self.atol,
            max_step=self.max_step,
            breakpoints=tuple(sorted(set(self.breakpoints) | set(float(p) for p in pts))),
            max_steps=self.max_steps,
        )


class DenseTrajectory:
    """Continuously evaluable solution assembled from accepted steps.

    Evaluation at an accepted step endpoint returns the stored state
    exactly; interior times use the method-matched quartic interpolant.
    """

    def __init__(self, ts, ys, interp, nfe):
        self.ts = np.asarray(ts, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        self.interp = interp  # per segment: (dim, 4) polynomial coefficients
        self.nfe = int(nfe)

    @property
    def dim(self):
        return self.ys.shape[1]

    @property
    def span(self):
        return float(self.ts[0]), float(self.ts[-1])

    @property
    def n_segments(self):
        return len(self.ts) - 1

    def _eval_segment(self, k, t):
        t0, t1 = self.ts[k], self.ts[k + 1]
        if t == t0:
            return self.ys[k]
        if t == t1:
            return self.ys[k + 1]
        h = t1 - t0
        theta = (t - t0) / h
        powers = np.array([theta, theta**2, theta**3, theta**4])
        return self.ys[k] + h * (self.interp[k] @ powers)

    def eval(self, t):
        """State at time(s) t; scalar in, 1-D out; array in, 2-D out."""
        if np.ndim(t) == 0:
            t = float(t)
            k = int(np.searchsorted(self.ts, t, side="right")) - 1
            k = min(max(k, 0), self.n_segments - 1)
            return self._eval_segment(k, t)
        t = np.asarray(t, dtype=float)
        out = np.empty((t.size, self.dim))
        ks = np.clip(np.searchsorted(self.ts, t, side="right") - 1, 0, self.n_segments - 1)
        for j, (tj, kj) in enumerate(zip(t.ravel(), ks.ravel())):
            out[j] = self._eval_segment(int(kj), float(tj))
        return out

    __call__ = eval


class InputSignal:
    """Time-domain input u with its derivative, analytic or sampled.

    Sampled signals interpolate piecewise-linearly (derivative is the
    interval slope, right-continuous at knots) or piecewise-constantly
    (derivative zero; the jump-impulse correction is not applied).
    """

    def __init__(self, dim, kind, u=None, du=None, times=None, values=None, mode=None):
        self.dim = int(dim)
        self.kind = kind
        self._u = u
        self._du = du
        if kind == "analytic":
            self.times = None
            self.values = None
            self.mode = None
            self._slopes = None
        elif kind == "sampled":
            self.times = np.asarray(times, dtype=float)
            self.values = np.asarray(values, dtype=float).reshape(len(self.times), dim)
            self.mode = mode
            dt = np.diff(self.times)
            if np.any(dt <= 0.0):
                raise ValueError("sample times must be strictly increasing")
            if mode == "piecewise-linear":
                self._slopes = np.diff(self.values, axis=0) / dt[:, None]
            elif mode == "piecewise-constant":
                self._slopes = np.zeros((len(self.times) - 1, dim))
            else:
                raise ValueError(f"unknown interpolation mode {mode!r}")
        else:
            raise ValueError(f"unknown signal kind {kind!r}")

    @classmethod
    def from_callables(cls, u, du, dim, knots=()):
        sig = cls(dim=dim, kind="analytic", u=u, du=du)
        sig.knots = np.asarray(sorted(knots), dtype=float)
        return sig

    @property
    def _n_int(self):
        return len(self.times) - 1

    def _interval(self, t):
        k = np.searchsorted(self.times, t, side="right") - 1
        return np.clip(k, 0, self._n_int - 1)

    def _interval_scalar(self, t):
        times = self.times
        if t >= times[-1]:
            return self._n_int - 1
        k = int(times.searchsorted(t, side="right")) - 1
        return 0 if k < 0 else k

    def eval_u(self, t):
        if self.kind == "analytic":
            if np.ndim(t) == 0:
                return np.asarray(self._u(t), dtype=float).reshape(self.dim)
            return np.stack(
                [np.asarray(self._u(tj), dtype=float).reshape(self.dim) for tj in t]
            )
        if np.ndim(t) == 0:
            t = float(t)
            if t == self.times[-1]:
                return self.values[-1]
            k = self._interval_scalar(t)
            if self.mode == "piecewise-linear":
                return self.values[k] + self._slopes[k] * (t - self.times[k])
            return self.values[k]
        ta = np.asarray(t, dtype=float)
        k = self._interval(ta)
        if self.mode == "piecewise-linear":
            out = self.values[k] + self._slopes[k] * (ta - self.times[k])[:, None]
        else:
            out = self.values[k].copy()
        exact = ta == self.times[-1]
        if np.any(exact):
            out[exact] = self.values[-1]
        return out

    def eval_du(self, t):
        if self.kind == "analytic":
            if np.ndim(t) == 0:
                return np.asarray(self._du(t), dtype=float).reshape(self.dim)
            return np.stack(
                [np.asarray(self._du(tj), dtype=float).reshape(self.dim) for tj in t]
            )
        if np.ndim(t) == 0:
            return self._slopes[self._interval_scalar(float(t))]
        return self._slopes[self._interval(np.asarray(t, dtype=float))]

    @property
    def breakpoints(self):
        """Times the integrator must land on: the knots where the signal's
        derivative (or, piecewise-constant, its value) actually jumps.
        Knots continuing with an identical slope carry no discontinuity and
        do not constrain the step controller."""
        if self.kind == "analytic":
            return tuple(getattr(self, "knots", ()))
        if self.mode == "piecewise-linear":
            jump = np.abs(np.diff(self._slopes, axis=0)).max(axis=1)
            scale = max(1.0, float(np.abs(self._slopes).max()))
        else:
            jump = np.abs(np.diff(self.values, axis=0)).max(axis=1)[:-1]
            scale = max(1.0, float(np.abs(self.values).max()))
        interior = self.times[1:-1][jump > 1e-12 * scale]
        return tuple(np.concatenate([[self.times[0]], interior, [self.times[-1]]]))


def derive_input_signal(times, values, mode="piecewise-linear"):
    """Build an :class:`InputSignal` from samples on a strictly increasing
    grid.  Knots become mandatory solver breakpoints."""
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    if len(times) != len(values):
        raise ValueError("times and values must have equal length")
    if np.any(np.diff(times) <= 0.0):
        raise ValueError("sample times must be strictly increasing (no duplicates)")
    if mode == "piecewise-constant":
        warnings.warn(
            "piecewise-constant interpolation: the state response of the "
            "jump impulses is not applied",
            PiecewiseConstantInputWarning,
        )
    return InputSignal(
        dim=values.shape[1], kind="sampled", times=times, values=values, mode=mode
    )


def _error_norm(err, y0, y1, rtol, atol):
    # max norm: every component obeys |e_i| <= atol + rtol*|y_i|
    scale = atol + rtol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.max(np.abs(err) / scale))


class _Counter:
    __slots__ = ("n",)

    def __init__(self):
        self.n = 0


def _initial_step(rhs, t0, y0, f0, t_end, rtol, atol, counter):
    """Hairer-style starting step selection (costs one extra evaluation)."""
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.max(np.abs(y0) / scale))
    d1 = float(np.max(np.abs(f0) / scale))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_end - t0)
    y1 = y0 + h0 * f0
    f1 = np.asarray(rhs(t0 + h0, y1), dtype=float)
    counter.n += 1
    d2 = float(np.max(np.abs(f1 - f0) / scale)) / h0
    if max(d1, d2) <= 1e-12:
        # quiescent field: any step is exact, try the whole segment
        return t_end - t0
    h1 = (0.01 / max(d1, d2)) ** (1.0 / _ORDER)
    return min(100 * h0, h1, t_end - t0)


def _integrate_segment(rhs, t0, t1, y0, h_start, cfg, counter, ts, ys, interp, span_len):
    """Advance from t0 to t1, appending accepted steps; returns (y_end, h)."""
    t = t0
    y = y0
    # fresh first stage: at a breakpoint the right-hand side may be
    # discontinuous, so the previous segment's last stage is not reused
    f0 = np.asarray(rhs(t0, y0), dtype=float)
    counter.n += 1
    h = h_start if h_start is not None else _initial_step(
        rhs, t0, y0, f0, t1, cfg.rtol, cfg.atol, counter
    )
    if cfg.max_step is not None:
        h = min(h, cfg.max_step)
    h = min(h, t1 - t0)

    err_prev = 1.0
    k = np.empty((7, y0.size))
    while t < t1:
        if counter.n > cfg.max_steps * 7:
            raise IntegrationError(
                f"step budget exhausted near t={t:.6g}", t=t
            )
        landing = h >= t1 - t
        if landing:
            h = t1 - t
        if h < _UNDERFLOW_RTOL * span_len:
            raise IntegrationError(
                f"step size underflow near t={t:.6g} "
                "(stiffness or unattainable accuracy)",
                t=t,
            )
        k[0] = f0
        for s in range(1, 7):
            ts_stage = t + _C[s] * h
            if ts_stage >= t1:
                # stage on the segment boundary: evaluate the left limit so a
                # breakpoint discontinuity of the input never leaks into the
                # step that ends there
                ts_stage = np.nextafter(t1, t0)
            k[s] = rhs(ts_stage, y + h * (k[:s].T @ _A[s]))
            counter.n += 1
        y_new = y + h * (k.T @ _B)
        err = h * (k.T @ _E)
        norm = _error_norm(err, y, y_new, cfg.rtol, cfg.atol)

        if norm <= 1.0:
            t = t1 if landing else t + h
            ts.append(t)
            ys.append(y_new)
            interp.append(k.T @ _P)
            y = y_new
            f0 = k[6].copy()  # FSAL; copy, the stage buffer is reused
            if norm == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * norm**-_PI_ALPHA * err_prev**_PI_BETA
            err_prev = max(norm, 1e-4)
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        else:
            factor = _SAFETY * norm ** (-1.0 / _ORDER)
            h *= max(_MIN_FACTOR, factor)
        if cfg.max_step is not None:
            h = min(h, cfg.max_step)
    return y, h


def integrate_dense(rhs, y0, span, cfg):
    """Adaptive integration of dy/dt = rhs(t, y) over span with dense output.

    Steps never straddle a configured breakpoint; the trajectory records
    every accepted step and the total right-hand-side evaluation count.
    """
    t0, tf = float(span[0]), float(span[1])
    if not tf > t0:
        raise ValueError(f"span must satisfy t0 < tf, got {span}")
    y0 = np.atleast_1d(np.asarray(y0, dtype=float))
    if not np.all(np.isfinite(y0)):
        raise ValueError("y0 contains non-finite entries")

    # merge breakpoints that only differ by accumulated rounding so no
    # micro-segment forces a spurious step underflow
    merge_tol = 1e-12 * (tf - t0)
    bounds = [t0]
    for b in sorted(set(b for b in cfg.breakpoints if t0 < b < tf)):
        if b - bounds[-1] > merge_tol and tf - b > merge_tol:
            bounds.append(float(b))
    bounds.append(tf)

    counter = _Counter()
    ts = [t0]
    ys = [y0.copy()]
    interp = []
    h = None
    y = y0
    for a, b in zip(bounds[:-1], bounds[1:]):
        y, h = _integrate_segment(
            rhs, float(a), float(b), y, h, cfg, counter, ts, ys, interp, tf - t0
        )
    return DenseTrajectory(ts=ts, ys=np.array(ys), interp=interp, nfe=counter.n)


def neuron_dynamics(spec, input_fn):
    """Vector field of one neuron driven by the assembled input closure."""
    w = spec.w
    if spec.order == "first":
        c_inv = 1.0 / spec.c
        k_coef = spec.k

        def rhs(t, y):
            return np.array([(w @ input_fn(t) - k_coef * y[0]) * c_inv])

        return rhs
    m_inv = 1.0 / spec.m
    c_coef = spec.c
    k_coef = spec.k

    def rhs(t, y):
        return np.array(
            [y[1], (w @ input_fn(t) - c_coef * y[1] - k_coef * y[0]) * m_inv]
        )

    return rhs


@dataclass
class NfeReport:
    """Right-hand-side evaluation counts per neuron."""

    per_neuron: dict = field(default_factory=dict)  # (layer, neuron) -> nfe

    def record(self, layer, neuron, nfe):
        self.per_neuron[(layer, neuron)] = int(nfe)

    @property
    def total(self):
        return sum(self.per_neuron.values())

    @property
    def max_per_neuron(self):
        return max(self.per_neuron.values())

    @property
    def min_per_neuron(self):
        return min(self.per_neuron.values())

    def layer_counts(self, layer):
        return [v for (l, _), v in sorted(self.per_neuron.items()) if l == layer]

    def to_table(self):
        return [
            {"layer": l, "neuron": i, "nfe": v}
            for (l, i), v in sorted(self.per_neuron.items())
        ]


class DynnOutput:
    """Continuously evaluable network output y = sum phi_i y_i + psi u."""

    def __init__(self, params, trajectories, input_signal):
        self.params = params
        self.trajectories = trajectories  # list (layer) of list (neuron)
        self.input_signal = input_signal

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        ta = np.atleast_1d(np.asarray(t, dtype=float))
        out = (self.params.psi @ self.input_signal.eval_u(ta).T).T
        for layer_phi, layer_trajs in zip(self.params.phi, self.trajectories):
            for phi_i, traj in zip(layer_phi, layer_trajs):
                out += (phi_i @ traj.eval(ta).T).T
        return out[0] if scalar else out


def _input_closure(u, later_trajs):
    if not later_trajs:
        def assemble(t):
            return np.concatenate([u.eval_u(t), u.eval_du(t)])
    else:
        def assemble(t):
            parts = [u.eval_u(t), u.eval_du(t)]
            parts.extend(traj.eval(t) for traj in later_trajs)
            return np.concatenate(parts)
    return assemble


def _fast_state_evaluator(traj):
    """Plain-Python scalar evaluator of a trajectory (hot inner loop),
    specialized for the one- and two-dimensional neuron states."""
    ts = traj.ts.tolist()
    ys = traj.ys.tolist()
    coefs = [c.tolist() for c in traj.interp]
    n_seg = len(coefs)
    from bisect import bisect_right

    if traj.dim == 1:
        def ev(t):
            k = bisect_right(ts, t) - 1
            if k < 0:
                k = 0
            elif k >= n_seg:
                k = n_seg - 1
            t0 = ts[k]
            if t == t0:
                return ys[k]
            t1 = ts[k + 1]
            if t == t1:
                return ys[k + 1]
            h = t1 - t0
            th = (t - t0) / h
            c = coefs[k][0]
            return (
                ys[k][0] + h * th * (c[0] + th * (c[1] + th * (c[2] + th * c[3]))),
            )

        return ev

    if traj.dim == 2:
        def ev(t):
            k = bisect_right(ts, t) - 1
            if k < 0:
                k = 0
            elif k >= n_seg:
                k = n_seg - 1
            t0 = ts[k]
            if t == t0:
                return ys[k]
            t1 = ts[k + 1]
            if t == t1:
                return ys[k + 1]
            h = t1 - t0
            th = (t - t0) / h
            y0 = ys[k]
            ck = coefs[k]
            c0 = ck[0]
            c1 = ck[1]
            return (
                y0[0] + h * th * (c0[0] + th * (c0[1] + th * (c0[2] + th * c0[3]))),
                y0[1] + h * th * (c1[0] + th * (c1[1] + th * (c1[2] + th * c1[3]))),
            )

        return ev

    def ev(t):
        k = bisect_right(ts, t) - 1
        if k < 0:
            k = 0
        elif k >= n_seg:
            k = n_seg - 1
        t0 = ts[k]
        if t == t0:
            return ys[k]
        t1 = ts[k + 1]
        if t == t1:
            return ys[k + 1]
        h = t1 - t0
        th = (t - t0) / h
        y0 = ys[k]
        return [
            y0[d] + h * th * (c[0] + th * (c[1] + th * (c[2] + th * c[3])))
            for d, c in enumerate(coefs[k])
        ]

    return ev


def _fast_neuron_rhs(spec, u, tail):
    """Specialized right-hand side computing w . u_i without materializing
    the assembled input vector; ``tail`` holds (evaluator, weights) pairs of
    the downstream neurons."""
    d_i = u.dim
    we = spec.w[:d_i].copy()
    wv = spec.w[d_i : 2 * d_i].copy()
    eval_u = u.eval_u
    eval_du = u.eval_du
    tail1 = [(ev, ws[0]) for ev, ws in tail if len(ws) == 1]
    tail2 = [(ev, ws[0], ws[1]) for ev, ws in tail if len(ws) == 2]

    def forcing(t):
        s = float(we @ eval_u(t)) + float(wv @ eval_du(t))
        for ev, w0 in tail1:
            s += w0 * ev(t)[0]
        for ev, w0, w1 in tail2:
            vals = ev(t)
            s += w0 * vals[0] + w1 * vals[1]
        return s

    if spec.order == "first":
        c_inv = 1.0 / spec.c
        k_coef = spec.k

        def rhs(t, y):
            return np.array([(forcing(t) - k_coef * y[0]) * c_inv])

        return rhs
    m_inv = 1.0 / spec.m
    c_coef = spec.c
    k_coef = spec.k

    def rhs(t, y):
        return np.array(
            [y[1], (forcing(t) - c_coef * y[1] - k_coef * y[0]) * m_inv]
        )

    return rhs


def _tail_weights(layer, i):
    """Per-downstream-neuron weight groups of neuron i's tail."""
    groups = []
    pos = 2 * layer.n_inputs
    w = layer.neurons[i].w
    for j in range(i + 1, layer.n_neurons):
        width = layer.neurons[j].state_dim
        groups.append(tuple(float(x) for x in w[pos : pos + width]))
        pos += width
    return groups


def _run_forward(params, u, span, cfg, neuron_configs):
    respect_knots = [b for b in u.breakpoints if span[0] < b < span[1]]
    base_cfg = cfg.with_breakpoints(respect_knots)
    report = NfeReport()
    trajectories = []
    for l, layer in enumerate(params.layers):
        layer_trajs = [None] * layer.n_neurons
        layer_evals = [None] * layer.n_neurons
        for i in reversed(range(layer.n_neurons)):
            spec = layer.neurons[i]
            cfg_i = base_cfg
            if neuron_configs and (l, i) in neuron_configs:
                cfg_i = neuron_configs[(l, i)].with_breakpoints(base_cfg.breakpoints)
            tail = list(zip(layer_evals[i + 1 :], _tail_weights(layer, i)))
            rhs = _fast_neuron_rhs(spec, u, tail)
            y0 = np.zeros(spec.state_dim)
            try:
                traj = integrate_dense(rhs, y0, span, cfg_i)
            except IntegrationError as exc:
                raise IntegrationError(
                    f"layer {l}, neuron {i}: {exc}", t=exc.t, layer=l, neuron=i
                ) from exc
            layer_trajs[i] = traj
            layer_evals[i] = _fast_state_evaluator(traj)
            report.record(l, i, traj.nfe)
        trajectories.append(layer_trajs)
    return DynnOutput(params, trajectories, u), report


def forward_pass_whole(params, u, span, cfg=None, neuron_configs=None):
    """Forward pass solving each neuron's ODE over the whole time domain.

    Neurons within a layer are solved in descending index order; neuron i's
    input closure assembles [u; du/dt; outputs of neurons i+1..n_l] from the
    already computed dense trajectories.  Initial conditions are zero.
    """
    cfg = cfg or SolverConfig()
    return _run_forward(params, u, span, cfg, neuron_configs)


def forward_pass_stepped(params, u, span, dt, cfg=None, neuron_configs=None):
    """Forward pass restarting every neuron on consecutive intervals of
    length dt, each continuing from its previous endpoint state, with one
    interpolant per accepted step inside each interval."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    cfg = cfg or SolverConfig()
    t0, tf = float(span[0]), float(span[1])
    marks = np.arange(t0 + dt, tf, dt)
    # guard against a mark landing on tf through rounding
    marks = marks[marks < tf - 1e-12 * max(1.0, abs(tf))]
    cfg = cfg.with_breakpoints(marks)
    return _run_forward(params, u, span, cfg, neuron_configs)
