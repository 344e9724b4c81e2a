"""Split a dataset over m machines, spatially or at random.

Spatial 1-d partitioning uses the equidistant right-closed intervals
((k-1)/m, k/m] with x = 0 assigned to the first shard.  Multi-dimensional
data is split by a k-d construction: the most populous cell is repeatedly
cut at the median of its largest-variance coordinate until m cells exist.
Random partitioning cuts a uniform permutation into m near-equal blocks.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePartitionError, DomainError
from .kernels import as_points

SPATIAL_1D = "spatial1d"
SPATIAL_KD = "kd"
RANDOM = "random"


@dataclass
class _KdSplit:
    dim: int
    threshold: float
    left: object
    right: object


@dataclass
class Partition:
    """Assignment of observations to m shards plus region geometry.

    ``regions`` holds (a, b] interval tuples in 1-d, cell ids for k-d
    cells, and None for random splits.  ``centers`` are the centers of
    gravity used by distance-based aggregation weights: the interval
    midpoint in 1-d, the centroid of assigned points for k-d cells.
    """

    m: int
    kind: str
    assignment: np.ndarray
    regions: list
    centers: np.ndarray
    tree: object = None

    def region_of(self, points):
        """Shard index owning each query point (0-based)."""
        pts = as_points(points)
        if self.kind == SPATIAL_1D:
            x = pts[:, 0]
            if np.any(x < 0) or np.any(x > 1):
                raise DomainError("query point outside [0,1] is not covered")
            return np.maximum(np.ceil(x * self.m).astype(int), 1) - 1
        if self.kind == SPATIAL_KD:
            return np.array([_route(self.tree, p) for p in pts])
        raise DomainError("random partitions define no spatial regions")


def _shard_datasets(data, assignment, m, tag):
    shards = []
    for k in range(m):
        idx = np.flatnonzero(assignment == k)
        shards.append(data.subset(idx, meta=f"{data.meta}|{tag}{k + 1}/{m}"))
    return shards


def partition_spatial_1d(data, m):
    """Assign observation x to shard ceil(x*m), with x=0 in shard 1."""
    if m < 1:
        raise DegeneratePartitionError("m must be at least 1")
    if data.xs.shape[1] != 1:
        raise DomainError("1-d spatial partitioning requires 1-d covariates")
    x = data.xs[:, 0]
    if len(data) and (x.min() < 0 or x.max() > 1):
        raise DomainError("covariates must lie in [0,1] for spatial partitioning")
    assignment = np.maximum(np.ceil(x * m).astype(int), 1) - 1
    regions = [((k) / m, (k + 1) / m) for k in range(m)]
    centers = ((np.arange(m) + 0.5) / m).reshape(-1, 1)
    part = Partition(m, SPATIAL_1D, assignment, regions, centers)
    return part, _shard_datasets(data, assignment, m, "I")


def partition_random(data, m, rng):
    """Cut a uniformly random permutation into m near-equal blocks."""
    if m < 1:
        raise DegeneratePartitionError("m must be at least 1")
    n = len(data)
    perm = rng.permutation(n)
    assignment = np.empty(n, dtype=int)
    # first n % m blocks get the extra point
    sizes = np.full(m, n // m)
    sizes[: n % m] += 1
    start = 0
    for k, size in enumerate(sizes):
        assignment[perm[start : start + size]] = k
        start += size
    centers = np.zeros((m, data.xs.shape[1] if len(data) else 1))
    for k in range(m):
        sel = assignment == k
        if sel.any():
            centers[k] = data.xs[sel].mean(axis=0)
    part = Partition(m, RANDOM, assignment, [None] * m, centers)
    return part, _shard_datasets(data, assignment, m, "R")


def _route(node, point):
    while isinstance(node, _KdSplit):
        node = node.left if point[node.dim] <= node.threshold else node.right
    return node


def partition_spatial_kd(data, m, rng=None):
    """Recursive median splits along the largest-variance coordinate.

    Produces exactly m cells for any 1 <= m <= n by always splitting the
    most populous cell; powers of two give perfectly balanced cells.  The
    split tree is retained so arbitrary query points can be routed to
    their owning cell.  ``rng`` is accepted for interface symmetry; the
    construction is deterministic.
    """
    if m < 1:
        raise DegeneratePartitionError("m must be at least 1")
    n = len(data)
    if m > n:
        raise DegeneratePartitionError(f"cannot build {m} cells from {n} points")
    cells = [np.arange(n)]
    tree = 0
    while len(cells) < m:
        widest = max(range(len(cells)), key=lambda i: cells[i].size)
        idx = cells[widest]
        pts = data.xs[idx]
        dim = int(np.argmax(pts.var(axis=0)))
        threshold = float(np.median(pts[:, dim]))
        left = idx[pts[:, dim] <= threshold]
        right = idx[pts[:, dim] > threshold]
        if left.size == 0 or right.size == 0:
            # all-equal coordinate; fall back to an even index split
            half = idx.size // 2
            order = np.argsort(pts[:, dim], kind="stable")
            left, right = idx[order[:half]], idx[order[half:]]
            threshold = float(data.xs[left[-1], dim])
        new_id = len(cells)
        cells[widest] = left
        cells.append(right)
        tree = _replace_leaf(tree, widest, _KdSplit(dim, threshold, widest, new_id))
    assignment = np.empty(n, dtype=int)
    centers = np.zeros((m, data.xs.shape[1]))
    for k, idx in enumerate(cells):
        assignment[idx] = k
        centers[k] = data.xs[idx].mean(axis=0)
    part = Partition(m, SPATIAL_KD, assignment, list(range(m)), centers, tree)
    return part, _shard_datasets(data, assignment, m, "C")


def _replace_leaf(node, leaf_id, replacement):
    if isinstance(node, _KdSplit):
        node.left = _replace_leaf(node.left, leaf_id, replacement)
        node.right = _replace_leaf(node.right, leaf_id, replacement)
        return node
    return replacement if node == leaf_id else node
