"""Graphs, order-2 simplicial complexes and Volterra kernel containers.

Column convention for node-to-tuple kernels: the tuple ``(i, j)`` lives in
column ``i * n + j`` (0-based) of an ``n x n**2`` matrix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np

__all__ = [
    "MaskPair",
    "PairwiseKernel",
    "Sc2",
    "TripletGroup",
    "TupleKernel",
    "check_sc_feasibility",
    "default_masks",
    "enumerate_triplet_groups",
    "extract_sc2",
    "group_index",
    "tuple_col",
]


def tuple_col(i: int, j: int, n: int) -> int:
    """Column of the ordered tuple ``(i, j)`` in an ``n x n**2`` kernel."""
    if not (0 <= i < n and 0 <= j < n):
        raise ValueError(f"tuple ({i}, {j}) out of range for n={n}")
    return i * n + j


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PairwiseKernel:
    """Order-1 kernel ``H1``: nonnegative, zero diagonal, ``n x n``."""

    values: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"pairwise kernel must be square, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("pairwise kernel has non-finite entries")
        if np.any(v < 0):
            raise ValueError("pairwise kernel has negative entries")
        if np.any(np.diag(v) != 0):
            raise ValueError("pairwise kernel has self-loops")
        if self.symmetric and not np.array_equal(v, v.T):
            raise ValueError("pairwise kernel flagged symmetric but is not")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class TupleKernel:
    """Order-2 kernel ``H2``: nonnegative ``n x n**2`` with degenerate tuples zeroed."""

    values: np.ndarray
    tuple_symmetric: bool = False

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2 or v.shape[1] != v.shape[0] ** 2:
            raise ValueError(f"tuple kernel must be n x n^2, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("tuple kernel has non-finite entries")
        if np.any(v < 0):
            raise ValueError("tuple kernel has negative entries")
        n = v.shape[0]
        k, i, j = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
        degenerate = ((i == j) | (i == k) | (j == k)).reshape(n, n * n)
        if np.any(v[degenerate] != 0):
            raise ValueError("tuple kernel has mass on a degenerate tuple")
        if self.tuple_symmetric:
            cube = v.reshape(n, n, n)
            if not np.array_equal(cube, cube.transpose(0, 2, 1)):
                raise ValueError("tuple kernel flagged tuple-symmetric but is not")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


@dataclass(frozen=True)
class MaskPair:
    """Binary masks; a 1 marks a coordinate forced to zero."""

    b1: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        b1 = np.array(self.b1, dtype=np.int8)
        b2 = np.array(self.b2, dtype=np.int8)
        n = b1.shape[0]
        if b1.shape != (n, n) or b2.shape != (n, n * n):
            raise ValueError(f"mask shapes {b1.shape}, {b2.shape} are inconsistent")
        if not (np.isin(b1, (0, 1)).all() and np.isin(b2, (0, 1)).all()):
            raise ValueError("masks must be binary")
        b1.setflags(write=False)
        b2.setflags(write=False)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "b2", b2)

    @property
    def n(self) -> int:
        return self.b1.shape[0]


def default_masks(n: int) -> MaskPair:
    """Masks removing self-loops from ``H1`` and degenerate tuples from ``H2``.

    ``b2[k, col(i, j)]`` is 1 when ``i == j``, ``i == k`` or ``j == k``.
    """
    if n < 3:
        raise ValueError(f"need at least 3 nodes, got n={n}")
    k, i, j = np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij")
    b2 = ((i == j) | (i == k) | (j == k)).reshape(n, n * n)
    return MaskPair(np.eye(n, dtype=np.int8), b2.astype(np.int8))


@dataclass(frozen=True)
class TripletGroup:
    triplet: tuple[int, int, int]
    h1_coords: tuple[tuple[int, int], ...]
    h2_coords: tuple[tuple[int, int], ...]


def enumerate_triplet_groups(n: int, masks: MaskPair | None = None) -> list[TripletGroup]:
    """One group per unordered triple ``i < j < k``, in lexicographic order.

    Each group couples the six oriented edge entries of ``H1`` among the three
    nodes with the six node-to-tuple entries of ``H2`` whose row and tuple
    together cover the triple. Coordinates masked by ``masks`` are dropped.
    """
    if n < 3:
        raise ValueError(f"need at least 3 nodes, got n={n}")
    masks = default_masks(n) if masks is None else masks
    if masks.n != n:
        raise ValueError(f"masks are for n={masks.n}, expected {n}")
    groups = []
    for i, j, k in itertools.combinations(range(n), 3):
        h1 = [(i, j), (j, i), (i, k), (k, i), (j, k), (k, j)]
        h2 = [
            (i, j * n + k), (i, k * n + j),
            (j, i * n + k), (j, k * n + i),
            (k, i * n + j), (k, j * n + i),
        ]
        h1 = tuple(c for c in h1 if not masks.b1[c])
        h2 = tuple(c for c in h2 if not masks.b2[c])
        groups.append(TripletGroup((i, j, k), h1, h2))
    return groups


@dataclass(frozen=True)
class GroupIndex:
    """Flat coordinates of every group inside the stacked ``[H1, H2]`` matrix.

    ``flat`` has shape ``(n_groups, 12)``; entries equal to ``-1`` pad groups
    that lost coordinates to a custom mask.
    """

    n: int
    triplets: np.ndarray
    flat: np.ndarray
    valid: np.ndarray


def group_index(n: int, masks: MaskPair | None = None) -> GroupIndex:
    groups = enumerate_triplet_groups(n, masks)
    width = n + n * n
    flat = np.full((len(groups), 12), -1, dtype=np.int64)
    for g, grp in enumerate(groups):
        coords = [r * width + c for r, c in grp.h1_coords]
        coords += [r * width + n + c for r, c in grp.h2_coords]
        flat[g, : len(coords)] = coords
    triplets = np.array([grp.triplet for grp in groups], dtype=np.int64).reshape(-1, 3)
    return GroupIndex(n, triplets, flat, flat >= 0)


def _pair(i: int, j: int) -> tuple[int, int]:
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Sc2:
    """Order-2 simplicial complex: weighted edges and filled triangles.

    Keys are sorted node tuples. Every triangle must have all three edges.
    """

    n: int
    edges: Mapping[tuple[int, int], float] = field(default_factory=dict)
    triangles: Mapping[tuple[int, int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        edges = {}
        for e, w in dict(self.edges).items():
            i, j = (int(a) for a in e)
            if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"invalid edge {e} for n={self.n}")
            edges[_pair(i, j)] = float(w)
        tris = {}
        for t, w in dict(self.triangles).items():
            a, b, c = sorted(int(v) for v in t)
            if len({a, b, c}) != 3 or not (0 <= a and c < self.n):
                raise ValueError(f"invalid triangle {t} for n={self.n}")
            for e in ((a, b), (a, c), (b, c)):
                if e not in edges:
                    raise ValueError(f"triangle {(a, b, c)} lacks edge {e}")
            tris[(a, b, c)] = float(w)
        object.__setattr__(self, "edges", MappingProxyType(edges))
        object.__setattr__(self, "triangles", MappingProxyType(tris))


def _check_pair(h1, h2) -> tuple[np.ndarray, np.ndarray]:
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    n = h1.shape[0]
    if h1.shape != (n, n) or h2.shape != (n, n * n):
        raise ValueError(f"kernel shapes {h1.shape} and {h2.shape} do not match")
    return h1, h2


def check_sc_feasibility(h1, h2, theta: float) -> list[tuple[int, int, int]]:
    """List every ``(k, i, j)`` breaking ``H2[k,(i,j)] <= theta * 1(H1[k,i] H1[k,j] H1[i,j])``.

    An empty list means the pair of kernels respects the triangle constraint.
    """
    if not theta > 0:
        raise ValueError(f"theta must be positive, got {theta}")
    h1, h2 = _check_pair(h1, h2)
    n = h1.shape[0]
    cube = h2.reshape(n, n, n)
    closed = (h1[:, :, None] * h1[:, None, :] * h1[None, :, :]) != 0
    bound = theta * closed
    viol = np.argwhere(cube > bound)
    return [tuple(int(a) for a in v) for v in viol]


def extract_sc2(h1, h2, edge_threshold: float = 0.0, tri_threshold: float = 0.0) -> Sc2:
    """Threshold continuous kernels into a simplicial complex.

    An edge is kept when the larger of its two orientations exceeds
    ``edge_threshold``; a triangle is kept when its three edges are kept and
    the largest of its six tuple entries exceeds ``tri_threshold``.
    """
    if edge_threshold < 0 or tri_threshold < 0:
        raise ValueError("thresholds must be nonnegative")
    h1, h2 = _check_pair(h1, h2)
    n = h1.shape[0]
    sym = np.maximum(h1, h1.T)
    edges = {
        (int(i), int(j)): float(sym[i, j])
        for i, j in zip(*np.triu_indices(n, 1))
        if sym[i, j] > edge_threshold
    }
    triangles = {}
    if n >= 3 and edges:
        cube = h2.reshape(n, n, n)
        # max over the six orientations of each triple
        tri = np.maximum.reduce([cube.transpose(p) for p in itertools.permutations(range(3))])
        adj = np.zeros((n, n), dtype=bool)
        for i, j in edges:
            adj[i, j] = adj[j, i] = True
        for i, j, k in itertools.combinations(range(n), 3):
            if adj[i, j] and adj[i, k] and adj[j, k] and tri[i, j, k] > tri_threshold:
                triangles[(i, j, k)] = float(tri[i, j, k])
    return Sc2(n, edges, triangles)


def kernels_from_sc2(sc: Sc2) -> tuple[np.ndarray, np.ndarray]:
    """Dense symmetric kernels carrying the weights of ``sc``."""
    n = sc.n
    h1 = np.zeros((n, n))
    for (i, j), w in sc.edges.items():
        h1[i, j] = h1[j, i] = w
    h2 = np.zeros((n, n * n))
    for (i, j, k), w in sc.triangles.items():
        for a, b, c in itertools.permutations((i, j, k)):
            h2[a, b * n + c] = w
    return h1, h2
