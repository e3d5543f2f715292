"""Eigenvalue extraction, clustering and diagonal-block sequencing.

Eigenvalues are read off the 1x1/2x2 diagonal blocks of a quasi-triangular
matrix, grouped into clusters (conjugate pairs are one unit), and turned
into the target block order: clusters sorted by descending maximum real
part, blocks within a cluster sorted with real eigenvalues first, then by
ascending magnitude of the real part.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ForcedSplitError, UnreducedBlockError
from .linalg import BlockLayout
from .validation import check_square

# Eigenvalues closer than this (relative to 1 + |lambda|) count as identical
# for the forced-split check.
EQUALITY_RTOL = 1e-9

DEFAULT_CLUSTER_SEED = 0


@dataclass(frozen=True)
class Eigenvalue:
    """One eigenvalue unit: a real eigenvalue or a conjugate pair stored once
    with non-negative imaginary part."""

    re: float
    im: float
    block_index: int

    @property
    def is_pair(self):
        return self.im > 0.0

    @property
    def dim(self):
        return 2 if self.is_pair else 1


@dataclass(frozen=True)
class ClusterPlan:
    """Assignment of Schur blocks to clusters plus the inter- and
    intra-cluster orderings."""

    num_clusters: int
    assignment: tuple  # block_index -> cluster id
    cluster_order: tuple  # cluster ids, most-positive max real part first
    within_order: tuple  # per cluster id, ordered tuple of block indices


def extract_eigenvalues(r, layout=None):
    """Eigenvalue units of a quasi-triangular matrix, one per diagonal block.

    2x2 blocks must carry complex-conjugate pairs; a 2x2 block with real
    eigenvalues raises :class:`UnreducedBlockError`.
    """
    r = check_square(r, "r")
    if layout is None:
        from .linalg import unit_block_sizes

        layout = BlockLayout(unit_block_sizes(r))
    evs = []
    for k, sl in enumerate(layout.slices()):
        d = sl.stop - sl.start
        if d == 1:
            evs.append(Eigenvalue(re=float(r[sl.start, sl.start]), im=0.0, block_index=k))
        elif d == 2:
            blk = r[sl, sl]
            tr = blk[0, 0] + blk[1, 1]
            det = blk[0, 0] * blk[1, 1] - blk[0, 1] * blk[1, 0]
            disc = tr * tr - 4.0 * det
            if disc >= 0.0:
                raise UnreducedBlockError(
                    f"2x2 block {k} has real eigenvalues (discriminant {disc:.3e})"
                )
            evs.append(
                Eigenvalue(re=float(tr / 2.0), im=float(np.sqrt(-disc) / 2.0), block_index=k)
            )
        else:
            raise ValueError(f"block {k} has size {d}; only 1x1/2x2 blocks allowed")
    return evs


def _distinct_points(points):
    """Indices of representative distinct (re, |im|) points under the
    relative equality tolerance."""
    reps = []
    for i, p in enumerate(points):
        scale = 1.0 + float(np.hypot(*p))
        if not any(np.hypot(*(p - points[j])) <= EQUALITY_RTOL * scale for j in reps):
            reps.append(i)
    return reps


def _kmeans_labels(points, n_clusters, seed):
    from sklearn.cluster import KMeans

    km = KMeans(
        n_clusters=n_clusters,
        init="k-means++",
        n_init=10,
        max_iter=300,
        tol=1e-10,
        random_state=seed,
    )
    return km.fit_predict(points)


CLUSTERING_ALGORITHMS = {"kmeans": _kmeans_labels}


def plan_clusters(evs, n_clusters, algorithm="kmeans", seed=DEFAULT_CLUSTER_SEED):
    """Cluster eigenvalue units into ``n_clusters`` groups and fix orderings.

    Clustering runs on (re, |im|) so a conjugate pair is a single point and
    identical eigenvalues always land in the same cluster.  Requesting more
    clusters than there are distinct eigenvalue units raises
    :class:`ForcedSplitError`.
    """
    if algorithm not in CLUSTERING_ALGORITHMS:
        raise ValueError(
            f"unknown clustering algorithm {algorithm!r}; "
            f"available: {sorted(CLUSTERING_ALGORITHMS)}"
        )
    n_units = len(evs)
    if not 1 <= n_clusters <= n_units:
        raise ValueError(f"n_clusters must be in [1, {n_units}], got {n_clusters}")

    points = np.array([[ev.re, ev.im] for ev in evs])
    reps = _distinct_points(points)
    if n_clusters > len(reps):
        raise ForcedSplitError(
            f"forced split of repeated eigenvalues: {n_clusters} clusters "
            f"requested but only {len(reps)} distinct eigenvalue units exist",
            n_distinct=len(reps),
        )

    if n_clusters == 1:
        labels = np.zeros(n_units, dtype=int)
    else:
        rep_labels = CLUSTERING_ALGORITHMS[algorithm](points[reps], n_clusters, seed)
        # assign every unit to the cluster of its nearest representative, so
        # identical units co-cluster by construction
        d2 = ((points[:, None, :] - points[reps][None, :, :]) ** 2).sum(axis=2)
        labels = rep_labels[np.argmin(d2, axis=1)]

    cluster_ids = sorted(set(int(l) for l in labels))
    # renumber to 0..L-1 in case a clustering algorithm skips a label
    remap = {c: i for i, c in enumerate(cluster_ids)}
    labels = np.array([remap[int(l)] for l in labels])
    if len(cluster_ids) != n_clusters:
        raise ForcedSplitError(
            f"clustering produced {len(cluster_ids)} non-empty clusters "
            f"instead of {n_clusters}",
            n_distinct=len(reps),
        )

    max_re = [
        max(evs[i].re for i in range(n_units) if labels[i] == c)
        for c in range(n_clusters)
    ]
    cluster_order = tuple(sorted(range(n_clusters), key=lambda c: -max_re[c]))

    within = []
    for c in range(n_clusters):
        members = [i for i in range(n_units) if labels[i] == c]
        members.sort(
            key=lambda i: (evs[i].is_pair, abs(evs[i].re), evs[i].im, evs[i].block_index)
        )
        within.append(tuple(evs[i].block_index for i in members))

    by_block = sorted(range(n_units), key=lambda i: evs[i].block_index)
    if [evs[i].block_index for i in by_block] != list(range(n_units)):
        raise ValueError("eigenvalue units must carry block indices 0..n-1")
    return ClusterPlan(
        num_clusters=n_clusters,
        assignment=tuple(int(labels[i]) for i in by_block),
        cluster_order=cluster_order,
        within_order=tuple(within),
    )


def sequence_blocks(plan):
    """Concatenate the per-cluster block orders into one block permutation."""
    seq = []
    for c in plan.cluster_order:
        seq.extend(plan.within_order[c])
    return tuple(seq)
