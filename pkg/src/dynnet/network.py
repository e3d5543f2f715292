"""Construction of dynamic neural networks from block-diagonal LTI systems.

A network is a stack of horizontal layers, one per diagonal block of the
transformed state matrix.  Within a layer, neuron i feeds every neuron with
a smaller index; real eigenvalues become first-order neurons, complex pairs
become second-order neurons.  This module holds the parameter maps between
the block matrices and the neuron weights, plus the linear output layer.

First-order neurons use the reduced representation: their state derivative
is never consumed downstream (the corresponding weights are exactly zero),
so their output width is 1 and the zero weights are not stored.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import DegenerateNeuronError, GMembershipError
from .preprocess import (
    StateSpace,
    TransformedLTI,
    classify_diagonal_blocks,
    preprocess_lti,
)
from .linalg import BlockLayout
from .validation import as_matrix, check_square


@dataclass(frozen=True)
class NeuronSpec:
    """Weights of one neuron: m xi'' + c xi' + k xi = w . u_i."""

    order: str  # 'first' or 'second'
    m: float
    c: float
    k: float
    w: np.ndarray  # row vector [e | v | tail weights]

    def __post_init__(self):
        if self.order not in ("first", "second"):
            raise ValueError(f"order must be 'first' or 'second', got {self.order!r}")
        if (self.order == "first") != (self.m == 0.0):
            raise ValueError("first-order neurons must have m == 0, second-order m != 0")
        if self.order == "first" and self.c == 0.0:
            raise DegenerateNeuronError("first-order neuron with c == 0 has no ODE")
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float).ravel())

    @property
    def state_dim(self):
        return 1 if self.order == "first" else 2


@dataclass(frozen=True)
class HorizontalLayer:
    """Ordered neurons of one layer; first-order neurons come first."""

    neurons: tuple  # of NeuronSpec
    n_inputs: int  # d_i of the network

    def __post_init__(self):
        object.__setattr__(self, "neurons", tuple(self.neurons))
        orders = [nr.order for nr in self.neurons]
        k_r = orders.count("first")
        if orders != ["first"] * k_r + ["second"] * (len(orders) - k_r):
            raise ValueError("first-order neurons must precede second-order neurons")
        # weight widths must match the efficient input layout
        for i, nr in enumerate(self.neurons):
            expected = 2 * self.n_inputs + sum(
                o.state_dim for o in self.neurons[i + 1 :]
            )
            if nr.w.size != expected:
                raise ValueError(
                    f"neuron {i}: weight width {nr.w.size}, expected {expected}"
                )

    @property
    def n_neurons(self):
        return len(self.neurons)

    @property
    def k_r(self):
        return sum(1 for nr in self.neurons if nr.order == "first")

    @property
    def k_c(self):
        return sum(1 for nr in self.neurons if nr.order == "second")

    @property
    def state_dim(self):
        return self.k_r + 2 * self.k_c


@dataclass(frozen=True)
class SecondOrderSystem:
    """Matrix form M xi'' + C xi' + K xi = E u + V u' of one layer."""

    m: np.ndarray
    c: np.ndarray
    k: np.ndarray
    e: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        m = check_square(self.m, "m")
        c = check_square(self.c, "c")
        k = check_square(self.k, "k")
        e = as_matrix(self.e, "e")
        v = as_matrix(self.v, "v")
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "e", e.reshape(m.shape[0], -1))
        object.__setattr__(self, "v", v.reshape(m.shape[0], -1))
        if np.any(m != np.diag(np.diag(m))):
            raise ValueError("m must be diagonal")
        if np.any(np.tril(c, -1) != 0.0) or np.any(np.tril(k, -1) != 0.0):
            raise ValueError("c and k must be upper-triangular")

    @property
    def n(self):
        return self.m.shape[0]


@dataclass(frozen=True)
class EtaMap:
    """Algebraic reconstruction eta = w_mat xi_c + q_mat xi_c' + z_mat u of
    the eliminated half of each complex pair."""

    w_mat: np.ndarray
    q_mat: np.ndarray
    z_mat: np.ndarray


@dataclass(frozen=True)
class DynnParams:
    """All parameters of a constructed network."""

    layers: tuple  # of HorizontalLayer
    phi: tuple  # per layer, tuple of per-neuron output weights (d_o x 1 or 2)
    psi: np.ndarray  # d_o x d_i feed-through
    n_inputs: int
    n_outputs: int

    @property
    def n_layers(self):
        return len(self.layers)

    @property
    def layer_sizes(self):
        return tuple(layer.n_neurons for layer in self.layers)

    @property
    def n_first_order(self):
        return sum(layer.k_r for layer in self.layers)

    @property
    def n_second_order(self):
        return sum(layer.k_c for layer in self.layers)

    @property
    def state_dim(self):
        return sum(layer.state_dim for layer in self.layers)

    def architecture_summary(self):
        return {
            "n_layers": self.n_layers,
            "layer_sizes": list(self.layer_sizes),
            "n_first_order": self.n_first_order,
            "n_second_order": self.n_second_order,
            "n_inputs": self.n_inputs,
            "n_outputs": self.n_outputs,
        }


def interleave_permutation(n):
    """Index vector realizing the interleaved-to-blocked reordering
    (x1, y1, x2, y2, ...) -> (x1, ..., xn, y1, ..., yn)."""
    return np.concatenate([np.arange(0, 2 * n, 2), np.arange(1, 2 * n, 2)])


def permute_complex_block(m_c):
    """Similarity-transform an all-pairs block into four triangular blocks.

    For a block-upper-triangular matrix with only 2x2 diagonal blocks, the
    interleave permutation t yields t m_c t^T = [[A, B], [C, D]] with all
    four n x n blocks upper-triangular.  Pure reindexing: entries move
    bitwise, nothing is computed.
    """
    m_c = check_square(m_c, "m_c")
    if m_c.shape[0] % 2 != 0:
        raise ValueError("matrix dimension must be even")
    n = m_c.shape[0] // 2
    perm = interleave_permutation(n)
    t = np.eye(2 * n)[perm]
    out = m_c[np.ix_(perm, perm)]
    return t, (out[:n, :n], out[:n, n:], out[n:, :n], out[n:, n:])


def _partition_block(a_l, b_l, k_r, k_c):
    """Split (a_l, b_l) into the 3x3 block form used by the parameter maps."""
    perm = interleave_permutation(k_c)
    a11 = a_l[:k_r, :k_r]
    a_rc = a_l[:k_r, k_r:][:, perm] if k_c else np.zeros((k_r, 0))
    a12, a13 = a_rc[:, :k_c], a_rc[:, k_c:]
    a_c = a_l[k_r:, k_r:][np.ix_(perm, perm)] if k_c else np.zeros((0, 0))
    a22, a23 = a_c[:k_c, :k_c], a_c[:k_c, k_c:]
    a32, a33 = a_c[k_c:, :k_c], a_c[k_c:, k_c:]
    b1 = b_l[:k_r]
    bc = b_l[k_r:][perm] if k_c else np.zeros((0, b_l.shape[1]))
    b2, b3 = bc[:k_c], bc[k_c:]
    return (a11, a12, a13, a22, a23, a32, a33), (b1, b2, b3)


def _census(a_l):
    info = classify_diagonal_blocks(a_l, BlockLayout((a_l.shape[0],)))[0]
    return info.k_r, info.k_c


def _solve_upper(a23, rhs):
    if np.any(np.diag(a23) == 0.0):
        raise GMembershipError("zero super-diagonal entry makes the pair block singular")
    return scipy.linalg.solve_triangular(a23, rhs, lower=False)


def map_eta(a_l, b_l):
    """Reconstruction map for the eliminated states of the complex pairs."""
    a_l = check_square(a_l, "a_l")
    b_l = as_matrix(b_l, "b_l")
    k_r, k_c = _census(a_l)
    if k_c < 1:
        raise ValueError("map_eta requires at least one complex pair")
    (a11, a12, a13, a22, a23, a32, a33), (b1, b2, b3) = _partition_block(
        a_l, b_l, k_r, k_c
    )
    w = -_solve_upper(a23, a22)
    q = _solve_upper(a23, np.eye(k_c))
    z = -_solve_upper(a23, b2)
    return EtaMap(w_mat=w, q_mat=q, z_mat=z)


def map_lti_second_order(a_l, b_l):
    """Rewrite dx = a_l x + b_l u as a first/second-order system in the
    surviving states (one per real eigenvalue, one per complex pair)."""
    a_l = check_square(a_l, "a_l")
    b_l = as_matrix(b_l, "b_l")
    k_r, k_c = _census(a_l)
    d_i = b_l.shape[1]
    (a11, a12, a13, a22, a23, a32, a33), (b1, b2, b3) = _partition_block(
        a_l, b_l, k_r, k_c
    )
    if k_c == 0:
        return SecondOrderSystem(
            m=np.zeros((k_r, k_r)),
            c=np.eye(k_r),
            k=-a11,
            e=b_l.copy(),
            v=np.zeros((k_r, d_i)),
        )
    w = -_solve_upper(a23, a22)
    q = _solve_upper(a23, np.eye(k_c))
    z = -_solve_upper(a23, b2)
    c_rc = -a13 @ q
    c_c = -(a22 + a23 @ a33 @ q)
    k_rc = -(a12 + a13 @ w)
    k_c_mat = -(a23 @ a32 + a23 @ a33 @ w)
    e_r = a13 @ z + b1
    e_c = a23 @ a33 @ z + a23 @ b3
    n = k_r + k_c
    m = np.zeros((n, n))
    m[k_r:, k_r:] = np.eye(k_c)
    c = np.zeros((n, n))
    c[:k_r, :k_r] = np.eye(k_r)
    c[:k_r, k_r:] = c_rc
    c[k_r:, k_r:] = c_c
    k = np.zeros((n, n))
    k[:k_r, :k_r] = -a11
    k[:k_r, k_r:] = k_rc
    k[k_r:, k_r:] = k_c_mat
    e = np.vstack([e_r, e_c])
    v = np.vstack([np.zeros((k_r, d_i)), b2])
    return SecondOrderSystem(m=m, c=c, k=k, e=e, v=v)


def n_dynn_forward(layer):
    """Assemble the layer's matrix form from its neuron weights."""
    n = layer.n_neurons
    d_i = layer.n_inputs
    m = np.zeros((n, n))
    c = np.zeros((n, n))
    k = np.zeros((n, n))
    e = np.zeros((n, d_i))
    v = np.zeros((n, d_i))
    for i, nr in enumerate(layer.neurons):
        m[i, i] = nr.m
        c[i, i] = nr.c
        k[i, i] = nr.k
        e[i] = nr.w[:d_i]
        v[i] = nr.w[d_i : 2 * d_i]
        pos = 2 * d_i
        for j in range(i + 1, n):
            k[i, j] = -nr.w[pos]
            pos += 1
            if layer.neurons[j].order == "second":
                c[i, j] = -nr.w[pos]
                pos += 1
    return SecondOrderSystem(m=m, c=c, k=k, e=e, v=v)


def n_dynn_inverse(sys, n_inputs=None):
    """Read neuron weights off the matrix form; exact inverse of
    :func:`n_dynn_forward` up to normalizing each m entry into {0, 1}.

    Couplings to the state derivative of a first-order neuron are not
    representable in the reduced layout and must be zero.
    """
    n = sys.n
    d_i = sys.e.shape[1] if n_inputs is None else int(n_inputs)
    m = sys.m.copy()
    c = sys.c.copy()
    k = sys.k.copy()
    e = sys.e.copy()
    v = sys.v.copy()
    for i in range(n):
        mi = m[i, i]
        if mi not in (0.0, 1.0):
            c[i] /= mi
            k[i] /= mi
            e[i] /= mi
            v[i] /= mi
            m[i, i] = 1.0
    orders = ["first" if m[i, i] == 0.0 else "second" for i in range(n)]
    neurons = []
    for i in range(n):
        tail = []
        for j in range(i + 1, n):
            tail.append(-k[i, j])
            if orders[j] == "second":
                tail.append(-c[i, j])
            elif c[i, j] != 0.0:
                raise ValueError(
                    f"coupling c[{i},{j}] to a first-order neuron's state "
                    "derivative is not representable"
                )
        w = np.concatenate([e[i], v[i], np.array(tail)])
        neurons.append(
            NeuronSpec(order=orders[i], m=float(m[i, i]), c=float(c[i, i]), k=float(k[i, i]), w=w)
        )
    return HorizontalLayer(neurons=tuple(neurons), n_inputs=d_i)


def detect_block_diagonal_layout(a, unit_tol=0.0):
    """Maximal block-diagonal partition of ``a`` by exact-zero coupling."""
    a = check_square(a, "a")
    n = a.shape[0]
    sizes = []
    start = 0
    for i in range(1, n):
        if (
            np.all(np.abs(a[i:, start:i]) <= unit_tol)
            and np.all(np.abs(a[start:i, i:]) <= unit_tol)
        ):
            sizes.append(i - start)
            start = i
    sizes.append(n - start)
    return BlockLayout(tuple(sizes))


def map_hidden(a, b, layout=None):
    """One horizontal layer per diagonal block of the state matrix."""
    a = check_square(a, "a")
    b = as_matrix(b, "b")
    if layout is None:
        layout = detect_block_diagonal_layout(a)
    elif not isinstance(layout, BlockLayout):
        layout = BlockLayout(layout)
    layers = []
    for bi, sl in enumerate(layout.slices()):
        try:
            sos = map_lti_second_order(a[sl, sl], b[sl])
            layers.append(n_dynn_inverse(sos, n_inputs=b.shape[1]))
        except (GMembershipError, ValueError) as exc:
            raise type(exc)(f"block {bi}: {exc}") from exc
    return layers


def map_output(t_lti):
    """Output-layer weights (phi, psi) reproducing y = C x + D u."""
    ss = t_lti.ss
    layout = t_lti.layout
    d_i, d_o = ss.n_inputs, ss.n_outputs
    c_mat, d_mat = ss.c, ss.d

    phi = []
    z_rows = []
    f_cols = []
    for info, sl in zip(t_lti.blocks, layout.slices()):
        k_r, k_c = info.k_r, info.k_c
        n_l = k_r + k_c
        d_l = info.dim
        p_xi = np.zeros((d_l, n_l))
        p_eta = np.zeros((d_l, k_c))
        for r in range(k_r):
            p_xi[r, r] = 1.0
        for j in range(k_c):
            p_xi[k_r + 2 * j, k_r + j] = 1.0
            p_eta[k_r + 2 * j + 1, j] = 1.0
        if k_c:
            eta = map_eta(ss.a[sl, sl], ss.b[sl])
            w_pad = np.hstack([np.zeros((k_c, k_r)), eta.w_mat])
            q_pad = np.hstack([np.zeros((k_c, k_r)), eta.q_mat])
            x_xi = p_xi + p_eta @ w_pad
            x_xid = p_eta @ q_pad
            z_rows.append(p_eta @ eta.z_mat)
        else:
            x_xi = p_xi
            x_xid = np.zeros((d_l, n_l))
            z_rows.append(np.zeros((d_l, d_i)))
        f_l = np.zeros((d_l, 2 * n_l))
        f_l[:, 0::2] = x_xi
        f_l[:, 1::2] = x_xid
        f_cols.append(f_l)

    f = scipy.linalg.block_diag(*f_cols) if f_cols else np.zeros((0, 0))
    big_phi = c_mat @ f
    z_stack = np.vstack(z_rows) if z_rows else np.zeros((0, d_i))
    psi = c_mat @ z_stack + d_mat

    col = 0
    for info in t_lti.blocks:
        layer_phi = []
        for t in range(info.k_r + info.k_c):
            pair = big_phi[:, col : col + 2]
            if t < info.k_r:
                # the state-derivative column of a first-order neuron is
                # exactly zero and is not stored
                assert np.all(pair[:, 1] == 0.0)
                layer_phi.append(pair[:, :1].copy())
            else:
                layer_phi.append(pair.copy())
            col += 2
        phi.append(tuple(layer_phi))
    return tuple(phi), psi


def build_dynn(ss, n_clusters, algorithm="kmeans", seed=0, max_cond=None):
    """Full construction: pre-process, map hidden layers, map output layer."""
    if not isinstance(ss, StateSpace):
        ss = StateSpace(*ss)
    t_lti = preprocess_lti(
        ss, n_clusters, algorithm=algorithm, seed=seed, max_cond=max_cond
    )
    layers = map_hidden(t_lti.ss.a, t_lti.ss.b, t_lti.layout)
    phi, psi = map_output(t_lti)
    params = DynnParams(
        layers=tuple(layers),
        phi=phi,
        psi=psi,
        n_inputs=ss.n_inputs,
        n_outputs=ss.n_outputs,
    )
    return params, t_lti
