"""Dense real linear-algebra kernels.

Real Schur decomposition, ordered Schur form via adjacent block swapping,
quasi-triangular Sylvester solves, block-diagonalization, matrix exponential
and 2-norm condition numbers.  Primitive factorizations (Schur, SVD, expm)
are delegated to LAPACK through SciPy; block swapping and Sylvester
back-substitution are implemented here.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import (
    InseparableBlocksError,
    MatrixExponentialOverflowError,
    NumericallySingularWarning,
    SchurConvergenceError,
    SpectraNotSeparatedError,
)
from .validation import check_layout, check_square

# Scale-invariant deflation tolerance: a subdiagonal entry counts as zero if
# its magnitude is below this factor times the local row+column max norms.
QUASI_ZERO_RTOL = 1e-11

# Two spectra count as overlapping if their minimal gap is below this factor
# times max(1, spectral radius).
SEPARATION_RTOL = 1e-10


@dataclass(frozen=True)
class BlockLayout:
    """Partition of a square matrix into consecutive diagonal blocks."""

    sizes: tuple

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if any(s < 1 for s in self.sizes):
            raise ValueError("block sizes must be >= 1")

    @property
    def offsets(self):
        return np.concatenate([[0], np.cumsum(self.sizes)])

    @property
    def dim(self):
        return int(sum(self.sizes))

    def slices(self):
        off = self.offsets
        return [slice(int(off[i]), int(off[i + 1])) for i in range(len(self.sizes))]


@dataclass(frozen=True)
class SchurForm:
    """Real Schur factorization a = q r q^T with q orthogonal and r
    quasi-upper-triangular (1x1 and 2x2 diagonal blocks)."""

    q: np.ndarray
    r: np.ndarray
    block_sizes: tuple = field(default=())

    @property
    def layout(self):
        return BlockLayout(self.block_sizes)


def _local_zero_tol(m, i):
    """Deflation threshold for the subdiagonal entry m[i+1, i]."""
    row = np.max(np.abs(m[i + 1, :]))
    col = np.max(np.abs(m[:, i]))
    return QUASI_ZERO_RTOL * (row + col)


def unit_block_sizes(r):
    """Sizes (1 or 2) of the diagonal blocks of a quasi-triangular matrix."""
    n = r.shape[0]
    sizes = []
    i = 0
    while i < n:
        if i + 1 < n and abs(r[i + 1, i]) > _local_zero_tol(r, i):
            sizes.append(2)
            i += 2
        else:
            sizes.append(1)
            i += 1
    return tuple(sizes)


def _clean_quasi_triangular(r, sizes):
    """Zero all entries strictly below the diagonal blocks, in place."""
    off = np.concatenate([[0], np.cumsum(sizes)])
    for k in range(len(sizes)):
        i0, i1 = int(off[k]), int(off[k + 1])
        r[i1:, i0:i1] = 0.0
    return r


def real_schur(a):
    """Real Schur decomposition a = q r q^T.

    Returns a :class:`SchurForm` whose ``r`` is exactly quasi-triangular
    (entries below the detected diagonal blocks are set to zero).
    """
    a = check_square(a, "a")
    try:
        r, q = scipy.linalg.schur(a, output="real")
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise SchurConvergenceError(f"QR iteration failed to converge: {exc}") from exc
    sizes = unit_block_sizes(r)
    r = _clean_quasi_triangular(r.copy(), sizes)
    return SchurForm(q=q, r=r, block_sizes=sizes)


def quasi_triangular_eigenvalues(r, sizes=None):
    """Eigenvalues of a quasi-triangular matrix read off its diagonal blocks.

    Complex pairs are returned as both conjugates.
    """
    if sizes is None:
        sizes = unit_block_sizes(r)
    off = np.concatenate([[0], np.cumsum(sizes)])
    evs = []
    for k, s in enumerate(sizes):
        i = int(off[k])
        if s == 1:
            evs.append(complex(r[i, i]))
        else:
            tr = r[i, i] + r[i + 1, i + 1]
            det = r[i, i] * r[i + 1, i + 1] - r[i, i + 1] * r[i + 1, i]
            disc = tr * tr - 4.0 * det
            if disc >= 0.0:
                # two real eigenvalues inside a 2x2 block
                sq = np.sqrt(disc)
                evs.append(complex((tr + sq) / 2.0))
                evs.append(complex((tr - sq) / 2.0))
                continue
            b = np.sqrt(-disc) / 2.0
            evs.append(complex(tr / 2.0, b))
            evs.append(complex(tr / 2.0, -b))
    return np.array(evs)


def _min_spectral_gap(ev1, ev2):
    return float(np.min(np.abs(ev1[:, None] - ev2[None, :])))


def _separation_tol(ev1, ev2):
    scale = max(1.0, float(np.max(np.abs(ev1))), float(np.max(np.abs(ev2))))
    return SEPARATION_RTOL * scale


def solve_sylvester(a11, a22, f):
    """Solve a11 X - X a22 = f for quasi-upper-triangular a11 and a22.

    Back-substitution over the 1x1/2x2 block structure (Bartels-Stewart);
    each small block equation is solved through its Kronecker form.
    """
    a11 = check_square(a11, "a11")
    a22 = check_square(a22, "a22")
    f = np.asarray(f, dtype=float)
    p, q = a11.shape[0], a22.shape[0]
    if f.shape != (p, q):
        raise ValueError(f"f must have shape {(p, q)}, got {f.shape}")

    ev1 = quasi_triangular_eigenvalues(a11)
    ev2 = quasi_triangular_eigenvalues(a22)
    gap = _min_spectral_gap(ev1, ev2)
    if gap <= _separation_tol(ev1, ev2):
        raise SpectraNotSeparatedError(
            f"spectra not separated (minimal eigenvalue gap {gap:.3e})", gap=gap
        )

    blocks_a = BlockLayout(unit_block_sizes(a11)).slices()
    blocks_b = BlockLayout(unit_block_sizes(a22)).slices()

    x = np.zeros((p, q))
    for cs in blocks_b:
        g = f[:, cs] + x[:, : cs.start] @ a22[: cs.start, cs]
        bll = a22[cs, cs]
        nb = cs.stop - cs.start
        for rs in reversed(blocks_a):
            rhs = g[rs] - a11[rs, rs.stop :] @ x[rs.stop :, cs]
            na = rs.stop - rs.start
            k = np.kron(np.eye(nb), a11[rs, rs]) - np.kron(bll.T, np.eye(na))
            try:
                sol = np.linalg.solve(k, rhs.flatten(order="F"))
            except np.linalg.LinAlgError as exc:
                raise SpectraNotSeparatedError(
                    f"singular block Sylvester operator (minimal gap {gap:.3e})",
                    gap=gap,
                ) from exc
            x[rs, cs] = sol.reshape((na, nb), order="F")
    return x


def _standardize_2x2(q, r, i):
    """Givens-rotate the 2x2 block at rows/cols (i, i+1) of r into the
    standardized form with equal diagonal entries; q is updated alongside."""
    blk = r[i : i + 2, i : i + 2]
    if blk[0, 0] == blk[1, 1]:
        return
    tau = (blk[0, 1] + blk[1, 0]) / (blk[0, 0] - blk[1, 1])
    off = np.sqrt(tau * tau + 1.0)
    roots = (tau - off, tau + off)
    v = min(roots, key=abs)
    c = 1.0 / np.sqrt(1.0 + v * v)
    s = v * c
    g = np.array([[c, -s], [s, c]])
    cols = slice(i, i + 2)
    r[:, cols] = r[:, cols] @ g
    r[cols, :] = g.T @ r[cols, :]
    q[:, cols] = q[:, cols] @ g


def _swap_adjacent(q, r, v, w):
    """Swap the adjacent diagonal blocks of r occupying index ranges v and w
    (v immediately precedes w) via an orthogonal transformation built from a
    small Sylvester solve; q accumulates the transformation."""
    a11 = r[v, v]
    a22 = r[w, w]
    a12 = r[v, w]
    ev1 = quasi_triangular_eigenvalues(a11)
    ev2 = quasi_triangular_eigenvalues(a22)
    gap = _min_spectral_gap(ev1, ev2)
    if gap <= _separation_tol(ev1, ev2):
        raise InseparableBlocksError(
            f"inseparable blocks: eigenvalue gap {gap:.3e} too small to swap",
            gap=gap,
        )
    nv, nw = v.stop - v.start, w.stop - w.start
    kron = np.kron(np.eye(nw), a11) - np.kron(a22.T, np.eye(nv))
    try:
        x = np.linalg.solve(kron, a12.flatten(order="F")).reshape((nv, nw), order="F")
    except np.linalg.LinAlgError as exc:
        raise InseparableBlocksError(
            f"inseparable blocks: singular swap system (gap {gap:.3e})", gap=gap
        ) from exc
    qs, _ = np.linalg.qr(np.vstack([-x, np.eye(nw)]), mode="complete")
    vw = slice(v.start, w.stop)
    r[:, vw] = r[:, vw] @ qs
    r[vw, :] = qs.T @ r[vw, :]
    q[:, vw] = q[:, vw] @ qs


def reorder_schur(s, target):
    """Reorder the diagonal blocks of a Schur form into ``target`` order.

    ``target`` is a permutation of block indices: the block originally at
    index ``target[j]`` ends up at position ``j``.  Implemented by repeated
    swapping of adjacent blocks (selection order), each swap via a small
    Sylvester solve followed by QR orthogonalization.
    """
    nb = len(s.block_sizes)
    target = [int(t) for t in target]
    if sorted(target) != list(range(nb)):
        raise ValueError("target must be a permutation of block indices")
    if target == list(range(nb)):
        return s

    q = s.q.copy()
    r = s.r.copy()
    order = list(range(nb))  # original block id at each current position
    sizes = list(s.block_sizes)

    def block_slice(pos):
        start = int(sum(sizes[:pos]))
        return slice(start, start + sizes[pos])

    for out_pos, want in enumerate(target):
        pos = order.index(want)
        while pos > out_pos:
            v = block_slice(pos - 1)
            w = block_slice(pos)
            _swap_adjacent(q, r, v, w)
            order[pos - 1], order[pos] = order[pos], order[pos - 1]
            sizes[pos - 1], sizes[pos] = sizes[pos], sizes[pos - 1]
            # restandardize any 2x2 involved in the swap
            for b in (pos - 1, pos):
                bs = block_slice(b)
                if bs.stop - bs.start == 2:
                    _standardize_2x2(q, r, bs.start)
            pos -= 1

    _clean_quasi_triangular(r, sizes)
    return SchurForm(q=q, r=r, block_sizes=tuple(sizes))


def block_diagonalize(r, layout):
    """Annihilate the off-diagonal blocks of a block-upper-triangular matrix.

    Returns ``(t3, a)`` with ``a = t3^{-1} r t3`` block-diagonal w.r.t.
    ``layout`` and ``t3`` unit upper-block-triangular, assembled from the
    Sylvester solutions that eliminate each off-diagonal block.  The diagonal
    blocks of ``a`` equal those of ``r`` exactly.
    """
    r = check_square(r, "r")
    if not isinstance(layout, BlockLayout):
        layout = BlockLayout(layout)
    check_layout(layout.sizes, r.shape[0])
    n = r.shape[0]
    nb = len(layout.sizes)
    slices = layout.slices()

    # pairwise separation check so failures name the offending block pair
    evs = [quasi_triangular_eigenvalues(r[sl, sl]) for sl in slices]
    for k in range(nb):
        for l in range(k + 1, nb):
            gap = _min_spectral_gap(evs[k], evs[l])
            if gap <= _separation_tol(evs[k], evs[l]):
                raise SpectraNotSeparatedError(
                    f"spectra of diagonal blocks {k} and {l} not separated "
                    f"(minimal gap {gap:.3e})",
                    gap=gap,
                    block_pair=(k, l),
                )

    t3 = np.eye(n)
    a = r.copy()
    for k in range(nb - 1):
        lead = slices[k]
        rest = slice(lead.stop, n)
        if rest.start == n:
            break
        y = solve_sylvester(a[lead, lead], a[rest, rest], -a[lead, rest])
        # t3 <- t3 @ [[I, Y], [0, I]] touches only the trailing columns
        t3[:, rest] += t3[:, lead] @ y
        a[lead, rest] = 0.0

    # exact block-diagonal output: keep diagonal blocks of r verbatim
    out = np.zeros_like(r)
    for sl in slices:
        out[sl, sl] = r[sl, sl]
    return t3, out


def matrix_exponential(m, scale=1.0):
    """exp(scale*m) via scaling-and-squaring with a Pade approximant."""
    m = check_square(m, "m")
    sm = scale * m
    out = scipy.linalg.expm(sm)
    if not np.all(np.isfinite(out)):
        norm = float(np.linalg.norm(sm, 1))
        raise MatrixExponentialOverflowError(
            f"matrix exponential overflowed (||scale*m||_1 = {norm:.3e})", norm=norm
        )
    return out


def condition_number_2norm(m):
    """2-norm condition number sigma_max/sigma_min from a full SVD.

    Numerically singular matrices yield +inf together with a
    :class:`NumericallySingularWarning`.
    """
    m = check_square(m, "m")
    sv = np.linalg.svd(m, compute_uv=False)
    smax, smin = float(sv[0]), float(sv[-1])
    if smin <= 1e3 * np.finfo(float).eps * smax:
        warnings.warn(
            "matrix is numerically singular; condition number set to inf",
            NumericallySingularWarning,
        )
        return float("inf")
    return smax / smin
