"""Generators for the benchmark LTI systems and their inputs.

2-D diffusion and convection-diffusion semi-discretizations, the
conditioning ladder (closely spaced real eigenvalues), a dense system with
mixed eigenvalue clusters, Haar-random rotations, and the time-sampled
Gaussian source / sine input families.

All randomness comes from numpy's default PCG64 generator seeded
explicitly, so identical seeds reproduce matrices bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .preprocess import StateSpace
from .simulate import derive_input_signal


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid of a rectangular domain."""

    nx: int
    ny: int
    lx: float
    ly: float

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError("nx and ny must be >= 3")

    @property
    def n(self):
        return self.nx * self.ny


DEFAULT_TIME_GRID = np.round(np.arange(0.0, 10.0 + 1e-9, 0.1), 10)


def _gaussian_spike(grid, xs, ys, amplitude=100.0, width=0.8, center=(5.0, 5.0),
                    t_spike=0.2, times=None):
    """Source samples: a Gaussian bump at one grid time, zero elsewhere,
    meant to be interpolated piecewise-linearly in time."""
    if times is None:
        times = DEFAULT_TIME_GRID
    times = np.asarray(times, dtype=float)
    k = np.argmin(np.abs(times - t_spike))
    if abs(times[k] - t_spike) > 1e-9:
        raise ValueError(f"t_spike={t_spike} is not on the time grid")
    xx, yy = np.meshgrid(xs, ys)  # yy varies along rows, xx along columns
    g = amplitude * np.exp(
        -width * ((xx - center[0]) ** 2 + (yy - center[1]) ** 2)
    )
    values = np.zeros((len(times), grid.n))
    values[k] = g.ravel()  # row-major: x fastest
    return derive_input_signal(times, values, mode="piecewise-linear")


def make_diffusion2d(grid=None, diffusivity=0.8):
    """Periodic 5-point Laplacian semi-discretization of 2-D diffusion.

    Returns the state-space system (B = C = I, D = 0) and a source builder
    emitting the time-sampled Gaussian bump input.
    """
    grid = grid or GridSpec(nx=20, ny=20, lx=10.0, ly=10.0)
    hx = grid.lx / grid.nx
    hy = grid.ly / grid.ny
    if abs(hx - hy) > 1e-12:
        raise ValueError("diffusion grid must be uniform (lx/nx == ly/ny)")
    h2 = diffusivity / hx**2
    n = grid.n
    a = np.zeros((n, n))
    for j in range(grid.ny):
        for i in range(grid.nx):
            p = j * grid.nx + i
            a[p, p] = -4.0 * h2
            a[p, j * grid.nx + (i + 1) % grid.nx] += h2
            a[p, j * grid.nx + (i - 1) % grid.nx] += h2
            a[p, ((j + 1) % grid.ny) * grid.nx + i] += h2
            a[p, ((j - 1) % grid.ny) * grid.nx + i] += h2
    ss = StateSpace(a=a, b=np.eye(n), c=np.eye(n), d=np.zeros((n, n)))
    xs = hx * np.arange(grid.nx)
    ys = hy * np.arange(grid.ny)

    def source(times=None, amplitude=100.0, width=0.8, t_spike=0.2):
        return _gaussian_spike(
            grid, xs, ys,
            amplitude=amplitude, width=width,
            center=(grid.lx / 2.0, grid.ly / 2.0),
            t_spike=t_spike, times=times,
        )

    return ss, source


def make_convdiff2d(grid=None, diffusivity=1.4, vx=0.6, vy=0.0):
    """Convection-diffusion semi-discretization: periodic left/right,
    Dirichlet top/bottom with the frozen boundary rows kept as states."""
    grid = grid or GridSpec(nx=20, ny=20, lx=10.0, ly=9.5)
    hx = grid.lx / grid.nx
    hy = grid.ly / (grid.ny - 1)
    if abs(hx - hy) > 1e-12:
        raise ValueError("convection-diffusion grid must be uniform")
    h = hx
    lap = diffusivity / h**2
    cx = vx / (2.0 * h)
    cy = vy / (2.0 * h)
    n = grid.n
    a = np.zeros((n, n))
    for j in range(1, grid.ny - 1):  # top/bottom rows stay identically zero
        for i in range(grid.nx):
            p = j * grid.nx + i
            ip = j * grid.nx + (i + 1) % grid.nx
            im = j * grid.nx + (i - 1) % grid.nx
            jp = (j + 1) * grid.nx + i
            jm = (j - 1) * grid.nx + i
            a[p, p] = -4.0 * lap
            a[p, ip] += lap - cx
            a[p, im] += lap + cx
            a[p, jp] += lap - cy
            a[p, jm] += lap + cy
    ss = StateSpace(a=a, b=np.eye(n), c=np.eye(n), d=np.zeros((n, n)))
    xs = hx * np.arange(grid.nx)
    ys = hy * np.arange(grid.ny)

    def source(times=None, amplitude=100.0, width=0.8, t_spike=0.2):
        return _gaussian_spike(
            grid, xs, ys,
            amplitude=amplitude, width=width,
            center=(grid.lx / 2.0, grid.lx / 2.0),
            t_spike=t_spike, times=times,
        )

    return ss, source


def make_conditioning_ladder(seed=1386):
    """10x10 upper-triangular system whose eigenvalues accumulate
    geometrically at -4: lambda_n = -4 + 2.5**(-n), n = 1..10.

    The default seed draws couplings for which the transformation's
    condition number stays near 15 at four clusters and explodes as the
    geometrically accumulating eigenvalues are split further.
    """
    rng = np.random.default_rng(seed)
    n = 10
    a = np.triu(rng.uniform(0.0, 0.1, size=(n, n)), 1)
    lam = -4.0 + 2.5 ** -np.arange(1, n + 1, dtype=float)
    a[np.diag_indices(n)] = lam
    b = rng.uniform(0.0, 0.5, size=(n, n))
    c = rng.uniform(0.0, 0.5, size=(n, n))
    d = rng.uniform(-0.5, 0.0, size=(n, n))
    return StateSpace(a=a, b=b, c=c, d=d)


def haar_rotation(n, seed=0):
    """Orthogonal matrix drawn from the Haar distribution: QR of a
    standard-normal matrix with the R diagonal signs fixed."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    signs = np.sign(np.diag(r))
    signs[signs == 0.0] = 1.0
    return q * signs


# blob composition of the mixed-cluster system: (n_real, n_pairs) per blob
_MIXED_BLOBS = ((10, 0), (0, 10), (8, 7), (0, 12), (16, 6), (10, 10))
_MIXED_CENTERS = (-3.0, -7.0, -11.0, -15.0, -19.0, -23.0)


def make_mixed_cluster_system(seed=0, blob_centers=_MIXED_CENTERS):
    """Dense 134x134 system whose spectrum forms six separated blobs with
    all mixes of real and complex-pair eigenvalues.

    Built block-upper-triangular (45 leading rotation-scaling pair blocks,
    44 trailing real blocks, strict upper entries uniform in [-0.5, 0]) and
    made dense by a Haar-rotation similarity that preserves the spectrum
    and the input-output map.
    """
    rng = np.random.default_rng(seed)
    if len(blob_centers) != len(_MIXED_BLOBS):
        raise ValueError(f"expected {len(_MIXED_BLOBS)} blob centers")

    # blobs stay tight in the (re, |im|) plane: splitting one of them (a
    # seventh cluster) forces nearly equal eigenvalues apart and blows up
    # the transformation's condition number
    pair_evs = []  # (re, im)
    real_evs = []
    for (n_real, n_pairs), center in zip(_MIXED_BLOBS, blob_centers):
        re = center + rng.uniform(-0.2, 0.2, size=n_real + n_pairs)
        for k in range(n_real):
            real_evs.append(re[k])
        for k in range(n_pairs):
            pair_evs.append((re[n_real + k], rng.uniform(0.1, 0.4)))
    assert len(real_evs) == 44 and len(pair_evs) == 45

    n = 134
    a = np.triu(rng.uniform(-0.5, 0.0, size=(n, n)), 1)
    off = 0
    for re, im in pair_evs:
        a[off : off + 2, off : off + 2] = [[re, -im], [im, re]]
        off += 2
    for re in real_evs:
        a[off, off] = re
        off += 1

    b = rng.uniform(0.0, 1.0, size=(n, 10))
    c = rng.uniform(0.0, 1.0, size=(4, n))
    d = -rng.uniform(0.0, 1.0, size=(4, 10))

    rot = haar_rotation(n, seed=rng.integers(0, 2**63 - 1))
    return StateSpace(a=rot.T @ a @ rot, b=rot.T @ b, c=c @ rot, d=d)


def make_random_mixed_system(seed, max_dim=12):
    """Small random system with blob-separated mixed spectrum, for the
    map-equivalence suite.  Eigenvalue units are at least 0.1 apart and
    blobs at least 1.5 apart; the recommended cluster count is returned.

    Returns ``(ss, n_blobs)``.
    """
    rng = np.random.default_rng(seed)
    while True:
        n_blobs = int(rng.integers(1, 4))
        units = []  # per blob: list of ('r'|'c')
        for _ in range(n_blobs):
            units.append(
                ["c" if rng.random() < 0.5 else "r" for _ in range(rng.integers(1, 4))]
            )
        dim = sum(2 if u == "c" else 1 for blob in units for u in blob)
        if 2 <= dim <= max_dim:
            break

    evs = []  # (re, im) per unit in block order
    center = -0.5
    for blob in units:
        center -= 1.5 + rng.uniform(0.0, 0.5)
        for j, u in enumerate(blob):
            re = center - 0.15 * j - rng.uniform(0.0, 0.04)
            im = rng.uniform(0.3, 1.5) if u == "c" else 0.0
            evs.append((re, im))
    order = rng.permutation(len(evs))

    a = np.triu(rng.uniform(-0.3, 0.3, size=(dim, dim)), 1)
    off = 0
    for idx in order:
        re, im = evs[idx]
        if im > 0.0:
            a[off : off + 2, off : off + 2] = [[re, -im], [im, re]]
            off += 2
        else:
            a[off, off] = re
            off += 1

    d_i = int(rng.integers(1, 4))
    d_o = int(rng.integers(1, 4))
    b = rng.uniform(-1.0, 1.0, size=(dim, d_i))
    c = rng.uniform(-1.0, 1.0, size=(d_o, dim))
    d = rng.uniform(-1.0, 1.0, size=(d_o, d_i))
    rot = haar_rotation(dim, seed=rng.integers(0, 2**63 - 1))
    ss = StateSpace(a=rot.T @ a @ rot, b=rot.T @ b, c=c @ rot, d=d)
    return ss, n_blobs


def make_sine_input(n_inputs, times=None):
    """The sampled input family u_i(t) = sin(i t / 2), i = 1..n_inputs,
    interpolated piecewise-linearly."""
    if times is None:
        times = DEFAULT_TIME_GRID
    times = np.asarray(times, dtype=float)
    values = np.sin(np.outer(times, np.arange(1, n_inputs + 1)) / 2.0)
    return derive_input_signal(times, values, mode="piecewise-linear")
