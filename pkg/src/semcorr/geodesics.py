"""Edge-graph geodesic distances (Dijkstra with Euclidean edge lengths)."""

import warnings

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from ._validation import check_indices
from .errors import DegenerateGeometry, EmptySourceSet


class DisconnectedWarning(UserWarning):
    """Some vertices are unreachable from the source set."""


def edge_graph(mesh):
    """Symmetric sparse graph weighted by Euclidean edge length."""
    e = mesh.edges
    w = mesh.edge_lengths
    n = mesh.n_vertices
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    return sparse.csr_matrix((np.concatenate([w, w]), (rows, cols)), shape=(n, n))


def _graph(mesh):
    # TriangleMesh is frozen, so the graph is cached in its instance dict
    g = mesh.__dict__.get("_edge_graph")
    if g is None:
        g = edge_graph(mesh)
        mesh.__dict__["_edge_graph"] = g
    return g


def single_source(mesh, sources):
    """Distance from every vertex to the nearest vertex of ``sources``.

    Unreachable vertices get ``inf`` and a :class:`DisconnectedWarning` is emitted.
    """
    src = np.unique(check_indices(sources, mesh.n_vertices, "sources"))
    if src.size == 0:
        raise EmptySourceSet("source set is empty")
    d = csgraph.dijkstra(_graph(mesh), directed=False, indices=src, min_only=True)
    if not np.all(np.isfinite(d)):
        warnings.warn(f"{int(np.sum(~np.isfinite(d)))} vertices unreachable", DisconnectedWarning,
                      stacklevel=2)
    return d


def pairwise_subset(mesh, subset_a, subset_b):
    """``|a| x |b|`` matrix of graph geodesic distances."""
    a = check_indices(subset_a, mesh.n_vertices, "subset_a")
    b = check_indices(subset_b, mesh.n_vertices, "subset_b")
    if a.size == 0 or b.size == 0:
        raise EmptySourceSet("empty vertex subset")
    ua, inv = np.unique(a, return_inverse=True)
    d = csgraph.dijkstra(_graph(mesh), directed=False, indices=ua)
    return d[inv][:, b]


def all_pairs(mesh):
    return csgraph.dijkstra(_graph(mesh), directed=False)


def normalization_scale(mesh):
    """Square root of the total surface area."""
    area = mesh.area
    if not area > 0:
        raise DegenerateGeometry("mesh has zero surface area")
    return float(np.sqrt(area))
