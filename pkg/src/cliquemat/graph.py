"""Adjacency and clique matrices, and the exact clique-matrix algebra.

A graph on ``V`` vertices is held as a dense boolean adjacency matrix with a
unit diagonal.  A clique matrix ``Z`` is a ``V x C`` binary matrix whose
columns are vertex subsets; it describes the graph when ``A = H(Z Z^T)``,
``H`` being the elementwise Heaviside step.
"""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np


class DimensionError(ValueError):
    """Raised when a clique matrix and a graph disagree on vertex count."""


@dataclass(frozen=True, eq=False)
class AdjacencyMatrix:
    """Symmetric 0/1 adjacency matrix with self connections on the diagonal.

    ``labels`` optionally carries per-vertex annotations (e.g. GML labels).
    """

    bits: np.ndarray
    labels: Optional[Sequence[Optional[str]]] = None

    def __post_init__(self):
        b = np.array(self.bits, dtype=bool)
        if b.ndim != 2 or b.shape[0] != b.shape[1] or b.shape[0] == 0:
            raise ValueError(f"adjacency must be a non-empty square matrix, got {b.shape}")
        if not np.array_equal(b, b.T):
            raise ValueError("adjacency matrix must be symmetric")
        if not b.diagonal().all():
            raise ValueError("adjacency matrix must have a unit diagonal")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)
        if self.labels is not None and len(self.labels) != b.shape[0]:
            raise ValueError("labels length must equal vertex count")

    @property
    def v(self) -> int:
        return self.bits.shape[0]

    @property
    def edge_count(self) -> int:
        return int(np.triu(self.bits, 1).sum())

    def edges(self):
        """Off-diagonal edges ``(i, j)`` with ``i < j``, row-major."""
        i, j = np.nonzero(np.triu(self.bits, 1))
        return list(zip(i.tolist(), j.tolist()))

    def permuted(self, order: Sequence[int]) -> "AdjacencyMatrix":
        """Relabel vertices so that new vertex ``k`` is old vertex ``order[k]``."""
        order = np.asarray(order)
        labels = None if self.labels is None else [self.labels[o] for o in order]
        return AdjacencyMatrix(self.bits[np.ix_(order, order)], labels)

    def __eq__(self, other):
        if not isinstance(other, AdjacencyMatrix):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())

    def __repr__(self):
        return f"AdjacencyMatrix(v={self.v}, edges={self.edge_count})"

    @classmethod
    def from_edges(cls, v: int, edges, labels=None) -> "AdjacencyMatrix":
        b = np.eye(v, dtype=bool)
        for i, j in edges:
            b[i, j] = b[j, i] = True
        return cls(b, labels)

    @classmethod
    def identity(cls, v: int) -> "AdjacencyMatrix":
        return cls(np.eye(v, dtype=bool))

    @classmethod
    def complete(cls, v: int) -> "AdjacencyMatrix":
        return cls(np.ones((v, v), dtype=bool))


@dataclass(frozen=True, eq=False)
class CliqueMatrix:
    """``V x C`` binary matrix whose columns are non-empty vertex subsets."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2:
            raise ValueError(f"clique matrix must be 2-D, got shape {b.shape}")
        if b.dtype != bool:
            if not np.isin(b, (0, 1)).all():
                raise ValueError("clique matrix entries must be 0 or 1")
            b = b.astype(bool)
        else:
            b = b.copy()
        if b.shape[1] and not b.any(axis=0).all():
            raise ValueError("clique matrix may not contain an all-zero column")
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    @property
    def v(self) -> int:
        return self.bits.shape[0]

    @property
    def c(self) -> int:
        return self.bits.shape[1]

    def column_sets(self):
        """Each column as a sorted tuple of vertex indices."""
        return [tuple(np.flatnonzero(self.bits[:, k]).tolist()) for k in range(self.c)]

    def __eq__(self, other):
        if not isinstance(other, CliqueMatrix):
            return NotImplemented
        return self.bits.shape == other.bits.shape and np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash((self.bits.shape, self.bits.tobytes()))

    def __repr__(self):
        return f"CliqueMatrix(v={self.v}, c={self.c})"

    @classmethod
    def from_columns(cls, v: int, columns) -> "CliqueMatrix":
        """Build from an iterable of vertex-index collections."""
        columns = list(columns)
        b = np.zeros((v, len(columns)), dtype=bool)
        for k, col in enumerate(columns):
            b[list(col), k] = True
        return cls(b)

    @classmethod
    def from_rounded(cls, values: np.ndarray, threshold: float = 0.5) -> "CliqueMatrix":
        """Round ``values > threshold`` and drop columns left empty."""
        b = np.asarray(values) > threshold
        return cls(b[:, b.any(axis=0)])


@dataclass(frozen=True)
class GraphStats:
    v: int
    edge_count: int
    clique_count: int
    size_histogram: Dict[int, int] = field(default_factory=dict)
    reconstruction_exact: bool = False

    def to_dict(self) -> dict:
        return {
            "v": self.v,
            "edge_count": self.edge_count,
            "clique_count": self.clique_count,
            "size_histogram": {str(k): n for k, n in sorted(self.size_histogram.items())},
            "reconstruction_exact": self.reconstruction_exact,
        }


def _check_dims(a: AdjacencyMatrix, z: CliqueMatrix):
    if a.v != z.v:
        raise DimensionError(f"clique matrix has {z.v} rows but graph has {a.v} vertices")


def reconstruct_bits(z: CliqueMatrix) -> np.ndarray:
    """Raw boolean ``H(Z Z^T)``; a vertex in no column has a zero diagonal."""
    zi = z.bits.astype(np.int64)
    return zi @ zi.T > 0


def heaviside_reconstruct(z: CliqueMatrix) -> AdjacencyMatrix:
    """Return ``H(Z Z^T)`` as an adjacency matrix.

    Raises ValueError when some vertex lies in no column, since the result
    would then lack its self connection.
    """
    if z.c == 0:
        raise ValueError("clique matrix has no columns")
    bits = reconstruct_bits(z)
    if not bits.diagonal().all():
        raise ValueError("some vertex is covered by no column")
    return AdjacencyMatrix(bits)


def incidence_matrix(a: AdjacencyMatrix) -> CliqueMatrix:
    """One column per edge ``i < j``, plus a singleton per isolated vertex."""
    edges = a.edges()
    degree = a.bits.sum(axis=1) - 1
    isolated = np.flatnonzero(degree == 0).tolist()
    cols = [(i, j) for i, j in edges] + [(i,) for i in isolated]
    return CliqueMatrix.from_columns(a.v, cols)


def is_valid_clique_matrix(a: AdjacencyMatrix, z: CliqueMatrix) -> bool:
    _check_dims(a, z)
    return bool(np.array_equal(reconstruct_bits(z), a.bits))


def columns_are_cliques(a: AdjacencyMatrix, z: CliqueMatrix) -> bool:
    """True iff the vertices of every column are pairwise adjacent in ``a``."""
    _check_dims(a, z)
    # pairs sharing a column but absent from the graph
    return not (reconstruct_bits(z) & ~a.bits).any()


def dedup_columns(z: CliqueMatrix, drop_subsumed: bool = True) -> CliqueMatrix:
    """Remove duplicate columns and, optionally, columns contained in another."""
    if z.c == 0:
        return z
    _, first = np.unique(z.bits.T, axis=0, return_index=True)
    keep = sorted(first.tolist())
    b = z.bits[:, keep]
    if drop_subsumed:
        bi = b.astype(np.int64)
        inter = bi.T @ bi
        size = bi.sum(axis=0)
        # column k is subsumed by l when |k & l| == |k| and l is strictly larger
        sub = (inter == size[:, None]) & (size[None, :] > size[:, None])
        b = b[:, ~sub.any(axis=1)]
    return CliqueMatrix(b)


def stats(a: AdjacencyMatrix, z: CliqueMatrix) -> GraphStats:
    _check_dims(a, z)
    hist = Counter(z.bits.sum(axis=0).tolist())
    return GraphStats(
        v=a.v,
        edge_count=a.edge_count,
        clique_count=z.c,
        size_histogram=dict(sorted(hist.items())),
        reconstruction_exact=is_valid_clique_matrix(a, z),
    )
