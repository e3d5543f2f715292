"""Shared builders for randomized test matrices."""

import numpy as np
import pytest

from dynnet.systems import haar_rotation


def random_quasi_triangular(rng, unit_types, coupling=0.5, re_range=(-4.0, -0.5),
                            im_range=(0.3, 2.0), min_gap=0.25):
    """Quasi-upper-triangular matrix with prescribed 1x1/2x2 diagonal units
    and pairwise well-separated eigenvalues."""
    dims = [2 if t == "c" else 1 for t in unit_types]
    n = sum(dims)
    a = np.triu(rng.uniform(-coupling, coupling, size=(n, n)), 1)
    res = []
    off = 0
    for k, t in enumerate(unit_types):
        re = re_range[0] + (re_range[1] - re_range[0]) * rng.random()
        while any(abs(re - r) < min_gap for r in res):
            re = re_range[0] + (re_range[1] - re_range[0]) * rng.random()
        res.append(re)
        if t == "c":
            im = rng.uniform(*im_range)
            a[off : off + 2, off : off + 2] = [[re, -im], [im, re]]
            off += 2
        else:
            a[off, off] = re
            off += 1
    return a


def random_rotated(rng, unit_types, **kw):
    """Dense matrix with known spectrum: rotated quasi-triangular."""
    a = random_quasi_triangular(rng, unit_types, **kw)
    q = haar_rotation(a.shape[0], seed=int(rng.integers(0, 2**62)))
    return q @ a @ q.T, a


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
