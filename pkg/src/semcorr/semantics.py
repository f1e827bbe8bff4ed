"""Semantic partitions from ingested region scores, and language-feature fusion."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csgraph

from ._validation import check_features
from .errors import DimensionMismatch, MissingEmbedding, NoLabeledVertices
from .geodesics import _graph

UNLABELED = -1


@dataclass(frozen=True, eq=False)
class SemanticPartition:
    """Per-vertex region labels plus the region (prompt) names.

    ``labels[u]`` is a region id in ``0..N-1`` or :data:`UNLABELED`.
    """

    labels: np.ndarray
    names: tuple = field(default=())

    def __post_init__(self):
        lab = np.array(self.labels, dtype=np.int64)
        if lab.ndim != 1:
            raise DimensionMismatch("labels must be 1-D")
        names = tuple(self.names) or tuple(f"region_{i}" for i in range(int(lab.max(initial=-1)) + 1))
        if lab.size and lab.max() >= len(names):
            raise DimensionMismatch(f"label {int(lab.max())} has no region name")
        if lab.size and lab.min() < UNLABELED:
            raise DimensionMismatch("labels must be >= -1")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "names", names)

    @property
    def n_regions(self):
        return len(self.names)

    @property
    def is_complete(self):
        return bool(np.all(self.labels >= 0))

    def region(self, i):
        return np.flatnonzero(self.labels == i)

    @property
    def regions(self):
        return [self.region(i) for i in range(self.n_regions)]

    def nonempty_regions(self):
        return [i for i in range(self.n_regions) if np.any(self.labels == i)]


def labels_from_scores(scores, threshold=0.0, names=None):
    """Arg-max region per vertex; rows whose maximum is below ``threshold`` stay unlabeled.

    Rows that are entirely NaN are treated as absent (unlabeled).
    """
    S = np.asarray(scores, dtype=np.float64)
    if S.ndim != 2 or S.shape[1] < 1:
        raise DimensionMismatch(f"score table must be (n, N) with N >= 1, got {S.shape}")
    if names is not None and len(names) != S.shape[1]:
        raise DimensionMismatch(f"{len(names)} prompts for {S.shape[1]} score columns")
    absent = np.all(np.isnan(S), axis=1)
    if np.any(~np.isfinite(S[~absent])):
        raise DimensionMismatch("score table has non-finite entries")
    filled = np.where(absent[:, None], -np.inf, S)
    labels = np.argmax(filled, axis=1)  # first maximum wins ties
    best = filled[np.arange(len(S)), labels]
    labels[(best < threshold) | absent] = UNLABELED
    if names is None:
        names = tuple(f"region_{i}" for i in range(S.shape[1]))
    return SemanticPartition(labels, tuple(names))


def complete_partition(partial, mesh):
    """Give every unlabeled vertex the label of its geodesically nearest labelled region.

    Distance ties resolve to the smaller region id. Regions left empty are kept
    in ``names`` but a warning is emitted.
    """
    lab = partial.labels
    if lab.shape[0] != mesh.n_vertices:
        raise DimensionMismatch("partition size does not match the mesh")
    if not np.any(lab >= 0):
        raise NoLabeledVertices("no labelled vertex to propagate from")
    if partial.is_complete:
        return partial
    present = np.unique(lab[lab >= 0])
    g = _graph(mesh)
    dist = np.full((len(present), mesh.n_vertices), np.inf)
    for r, region in enumerate(present):
        dist[r] = csgraph.dijkstra(g, directed=False, indices=np.flatnonzero(lab == region),
                                   min_only=True)
    nearest = present[np.argmin(dist, axis=0)]
    out = np.where(lab >= 0, lab, nearest)
    if np.any(~np.isfinite(dist.min(axis=0))):
        warnings.warn("some vertices cannot reach any labelled region", stacklevel=2)
    empty = [partial.names[i] for i in range(partial.n_regions) if not np.any(out == i)]
    if empty:
        warnings.warn(f"empty regions dropped from the graph: {empty}", stacklevel=2)
    return SemanticPartition(out, partial.names)


@dataclass(frozen=True, eq=False)
class LanguageTable:
    """One embedding per region prompt, plus the encoder that produced them."""

    embeddings: np.ndarray
    names: tuple = ()
    encoder: str = "unknown"

    def __post_init__(self):
        E = check_features(self.embeddings, name="language embeddings")
        if np.any(np.linalg.norm(E, axis=1) == 0):
            raise DimensionMismatch("language embeddings must have non-zero norm")
        if self.names and len(self.names) != len(E):
            raise DimensionMismatch(f"{len(self.names)} names for {len(E)} embeddings")
        E.setflags(write=False)
        object.__setattr__(self, "embeddings", E)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def dim(self):
        return self.embeddings.shape[1]

    def row_for(self, label, name=None):
        if self.names and name is not None:
            if name not in self.names:
                raise MissingEmbedding(f"no embedding for region {name!r}")
            return self.embeddings[self.names.index(name)]
        if not 0 <= label < len(self.embeddings):
            raise MissingEmbedding(f"no embedding for region id {label}")
        return self.embeddings[label]


def fuse_language(visual, partition, table, weight=0.5):
    """Concatenate each vertex's visual feature with its region's language embedding.

    The language block is the unit-normalized embedding scaled by
    ``weight * rms(visual)``, where ``rms`` is the root-mean-square row norm of
    the visual block (1 if the visual block is identically zero).
    """
    V = check_features(visual, n_rows=len(partition.labels), name="visual features")
    if not partition.is_complete:
        raise DimensionMismatch("partition must be complete before fusion")
    if not isinstance(table, LanguageTable):
        table = LanguageTable(table)
    used = np.unique(partition.labels)
    block = np.zeros((partition.n_regions, table.dim))
    for lbl in used:
        e = table.row_for(int(lbl), partition.names[lbl] if table.names else None)
        block[lbl] = e / np.linalg.norm(e)
    rms = float(np.sqrt(np.mean(np.sum(V ** 2, axis=1))))
    if rms == 0.0:
        rms = 1.0
    return np.hstack([V, weight * rms * block[partition.labels]])
