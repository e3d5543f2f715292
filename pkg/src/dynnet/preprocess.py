"""End-to-end pre-processing of an LTI system.

Transforms a state-space realization into a block-diagonal one via a real
Schur decomposition, eigenvalue clustering with ordered block swapping, and
Bartels-Stewart block-diagonalization, while preserving the input-output
map.  Each resulting diagonal block is classified by its mix of real and
complex-pair eigenvalues.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import linalg, spectra
from .exceptions import ConditionNumberWarning, GMembershipError
from .linalg import BlockLayout
from .validation import as_matrix, check_square

# "R is diagonal" test for the unitary shortcut: strict 1x1 blocks only and
# off-diagonal mass below this factor times max|R|.
DIAGONAL_RTOL = 1e-10


@dataclass(frozen=True)
class StateSpace:
    """Constant matrices (a, b, c, d) of dx/dt = a x + b u, y = c x + d u."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        a = check_square(self.a, "a")
        b = as_matrix(self.b, "b")
        c = as_matrix(self.c, "c")
        d = as_matrix(self.d, "d")
        n = a.shape[0]
        if b.shape[0] != n:
            raise ValueError(f"b must have {n} rows, got {b.shape[0]}")
        if c.shape[1] != n:
            raise ValueError(f"c must have {n} columns, got {c.shape[1]}")
        if d.shape != (c.shape[0], b.shape[1]):
            raise ValueError(
                f"d must have shape {(c.shape[0], b.shape[1])}, got {d.shape}"
            )
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @property
    def n_states(self):
        return self.a.shape[0]

    @property
    def n_inputs(self):
        return self.b.shape[1]

    @property
    def n_outputs(self):
        return self.c.shape[0]


@dataclass(frozen=True)
class BlockInfo:
    """Eigenvalue census and sparsity class of one diagonal block."""

    k_r: int
    k_c: int
    clazz: str  # 'G_r', 'G_c' or 'G_mixed'

    @property
    def dim(self):
        return self.k_r + 2 * self.k_c


@dataclass(frozen=True)
class TransformedLTI:
    """Block-diagonal realization (ss) with its transformation matrix."""

    ss: StateSpace
    t: np.ndarray
    t_inv: np.ndarray
    cond_t: float
    blocks: tuple  # of BlockInfo
    diagonalizable_path: bool  # True if the unitary shortcut was taken

    @property
    def layout(self):
        return BlockLayout(tuple(b.dim for b in self.blocks))


def classify_diagonal_blocks(a, layout):
    """Census each diagonal block of a block-diagonal matrix.

    Verifies the sparse-membership conditions: within each block the 1x1
    sub-blocks (real eigenvalues) come first, the trailing 2x2 sub-blocks
    carry complex pairs and have nonzero upper-right entries.
    """
    a = check_square(a, "a")
    if not isinstance(layout, BlockLayout):
        layout = BlockLayout(layout)
    infos = []
    for bi, sl in enumerate(layout.slices()):
        blk = a[sl, sl]
        sizes = linalg.unit_block_sizes(blk)
        k_r = sum(1 for s in sizes if s == 1)
        k_c = sum(1 for s in sizes if s == 2)
        # reals must precede pairs
        seen_pair = False
        off = 0
        for s in sizes:
            if s == 2:
                seen_pair = True
                sub = blk[off : off + 2, off : off + 2]
                if sub[0, 1] == 0.0:
                    raise GMembershipError(
                        f"block {bi}: 2x2 sub-block at offset {off} has zero "
                        "upper-right entry",
                        block_index=bi,
                    )
                tr = sub[0, 0] + sub[1, 1]
                det = sub[0, 0] * sub[1, 1] - sub[0, 1] * sub[1, 0]
                if tr * tr - 4.0 * det >= 0.0:
                    raise GMembershipError(
                        f"block {bi}: 2x2 sub-block at offset {off} has real "
                        "eigenvalues",
                        block_index=bi,
                    )
            elif seen_pair:
                raise GMembershipError(
                    f"block {bi}: real eigenvalue after a complex pair",
                    block_index=bi,
                )
            off += s
        clazz = "G_r" if k_c == 0 else ("G_c" if k_r == 0 else "G_mixed")
        infos.append(BlockInfo(k_r=k_r, k_c=k_c, clazz=clazz))
    return infos


def _is_diagonal(r, sizes):
    if any(s != 1 for s in sizes):
        return False
    off = np.abs(r - np.diag(np.diag(r)))
    return float(off.max()) <= DIAGONAL_RTOL * float(np.abs(r).max() or 1.0)


def preprocess_lti(
    ss,
    n_clusters,
    algorithm="kmeans",
    seed=spectra.DEFAULT_CLUSTER_SEED,
    max_cond=None,
):
    """Block-diagonalize a state-space system, preserving its IO map.

    If the Schur form is already diagonal the orthogonal Schur basis is the
    whole transformation (unitary shortcut).  Otherwise the Schur blocks are
    reordered cluster by cluster and the off-diagonal blocks are annihilated
    by Sylvester solves.
    """
    if not isinstance(ss, StateSpace):
        ss = StateSpace(*ss)
    n = ss.n_states
    if not 1 <= n_clusters <= n:
        raise ValueError(f"n_clusters must be in [1, {n}], got {n_clusters}")

    schur = linalg.real_schur(ss.a)
    if _is_diagonal(schur.r, schur.block_sizes):
        t = schur.q
        t_inv = t.T
        a = np.diag(np.diag(schur.r)).copy()
        layout = BlockLayout((1,) * n)
        diagonalizable = True
    else:
        evs = spectra.extract_eigenvalues(schur.r, schur.layout)
        plan = spectra.plan_clusters(evs, n_clusters, algorithm=algorithm, seed=seed)
        order = spectra.sequence_blocks(plan)
        reordered = linalg.reorder_schur(schur, order)
        # cluster boundaries in the new block order
        cluster_dims = []
        for c in plan.cluster_order:
            cluster_dims.append(
                int(sum(reordered.block_sizes[i] for i in _positions(order, plan.within_order[c])))
            )
        layout = BlockLayout(tuple(cluster_dims))
        t3, a = linalg.block_diagonalize(reordered.r, layout)
        t = reordered.q @ t3
        t_inv = np.linalg.inv(t)
        diagonalizable = False

    cond_t = linalg.condition_number_2norm(t)
    if max_cond is not None and cond_t > max_cond:
        warnings.warn(
            f"condition number of the transformation matrix is {cond_t:.4g}, "
            f"above the configured cap {max_cond:.4g}; consider fewer clusters",
            ConditionNumberWarning,
        )

    new_ss = StateSpace(a=a, b=t_inv @ ss.b, c=ss.c @ t, d=ss.d.copy())
    blocks = tuple(classify_diagonal_blocks(a, layout))
    return TransformedLTI(
        ss=new_ss,
        t=t,
        t_inv=t_inv,
        cond_t=float(cond_t),
        blocks=blocks,
        diagonalizable_path=diagonalizable,
    )


def _positions(order, block_ids):
    """Positions in ``order`` occupied by the given original block ids."""
    lookup = {b: i for i, b in enumerate(order)}
    return [lookup[b] for b in block_ids]
