"""Semantic region graph: prior edges weighted by matched mean geodesic distance."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .assignment import Assignment, solve_assignment
from .errors import EmptyRegion, UnknownRegionInPrior
from .geodesics import _graph, pairwise_subset

REGION_CAP = 256


@dataclass(frozen=True, eq=False)
class SemanticGraph:
    """Region nodes, prior edges with weights, and all-pairs semantic distances.

    ``distances[i, j]`` is ``inf`` for regions in different components of the
    prior graph. ``active`` lists the region ids that took part (non-empty).
    """

    names: tuple
    edges: tuple
    weights: np.ndarray
    distances: np.ndarray
    active: tuple = ()

    @property
    def n_regions(self):
        return len(self.names)

    def finite_diameter(self):
        d = self.distances[np.isfinite(self.distances)]
        return float(d.max()) if d.size else 0.0

    def margin_distances(self):
        """Distances with unreachable pairs replaced by the finite diameter."""
        d = self.distances.copy()
        d[~np.isfinite(d)] = self.finite_diameter()
        return d

    def to_json(self):
        def enc(x):
            return None if not np.isfinite(x) else float(x)
        return json.dumps({
            "regions": [{"id": i, "name": n} for i, n in enumerate(self.names)],
            "edges": [[self.names[a], self.names[b]] for a, b in self.edges],
            "weights": [float(w) for w in self.weights],
            "distances": [[enc(x) for x in row] for row in self.distances],
            "active": list(self.active),
        }, indent=2)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        names = tuple(r["name"] for r in sorted(obj["regions"], key=lambda r: r["id"]))
        edges = tuple((names.index(a), names.index(b)) for a, b in obj["edges"])
        D = np.array([[np.inf if x is None else x for x in row] for row in obj["distances"]],
                     dtype=np.float64).reshape(len(names), len(names))
        return cls(names, edges, np.array(obj["weights"], dtype=np.float64), D,
                   tuple(obj.get("active", range(len(names)))))


def farthest_point_sample(mesh, vertices, count, seed=0):
    """Seeded farthest-point subsample of ``vertices`` under graph geodesics."""
    vertices = np.asarray(vertices, dtype=np.int64)
    if len(vertices) <= count:
        return vertices
    rng = np.random.default_rng(seed)
    g = _graph(mesh)
    chosen = [int(rng.integers(len(vertices)))]
    d = csgraph.dijkstra(g, directed=False, indices=vertices[chosen[0]])[vertices]
    for _ in range(count - 1):
        nxt = int(np.argmax(d))
        chosen.append(nxt)
        d = np.minimum(d, csgraph.dijkstra(g, directed=False, indices=vertices[nxt])[vertices])
    return np.sort(vertices[chosen])


def matched_assignment(mesh, region_i, region_j):
    cost = pairwise_subset(mesh, region_i, region_j)
    return solve_assignment(cost), cost


def edge_distance(mesh, region_i, region_j, cap=REGION_CAP, seed=0):
    """Mean geodesic length over an optimal bipartite matching of two regions.

    Regions larger than ``cap`` vertices are first reduced by farthest-point
    sampling. Identical vertex sets give 0.
    """
    a = np.unique(np.asarray(region_i, dtype=np.int64))
    b = np.unique(np.asarray(region_j, dtype=np.int64))
    if a.size == 0 or b.size == 0:
        raise EmptyRegion("cannot compute a distance to an empty region")
    if a.shape == b.shape and np.array_equal(a, b):
        return 0.0
    if cap is not None:
        a = farthest_point_sample(mesh, a, cap, seed)
        b = farthest_point_sample(mesh, b, cap, seed)
    match, _ = matched_assignment(mesh, a, b)
    return match.cost / match.size


def shortest_paths(n, edges, weights):
    """All-pairs Dijkstra over an undirected weighted edge list (``inf`` if unreachable)."""
    if not len(edges):
        D = np.full((n, n), np.inf)
        np.fill_diagonal(D, 0.0)
        return D
    e = np.asarray(edges, dtype=np.int64)
    w = np.asarray(weights, dtype=np.float64)
    # keep the lightest copy of parallel edges
    best = {}
    for (i, j), wt in zip(map(tuple, np.sort(e, axis=1)), w):
        if i != j and wt < best.get((i, j), np.inf):
            best[(i, j)] = wt
    if not best:
        return shortest_paths(n, [], [])
    ij = np.array(list(best.keys()))
    wt = np.array(list(best.values()))
    # explicit zeros would vanish from a sparse matrix; csgraph treats them as absent
    G = sparse.csr_matrix((wt, (ij[:, 0], ij[:, 1])), shape=(n, n))
    D = csgraph.dijkstra(G, directed=False)
    np.fill_diagonal(D, 0.0)
    return D


def _region_id(p, names):
    if isinstance(p, str):
        if p not in names:
            raise UnknownRegionInPrior(f"prior references unknown region {p!r}")
        return names.index(p)
    if not 0 <= int(p) < len(names):
        raise UnknownRegionInPrior(f"prior references unknown region id {p}")
    return int(p)


def parse_priors(text, names):
    """Read ``{"edges": [["head", "torso"], ...]}`` into region-id pairs."""
    obj = json.loads(text) if isinstance(text, str) else text
    out = []
    for pair in obj["edges"]:
        if len(pair) != 2:
            raise UnknownRegionInPrior(f"prior edge must have two endpoints: {pair}")
        out.append((_region_id(pair[0], names), _region_id(pair[1], names)))
    return out


def build_graph(partition, priors, mesh, cap=REGION_CAP, seed=0):
    """Weight every prior edge by :func:`edge_distance`, then close under shortest paths.

    ``priors`` is a list of region-id pairs or region-name pairs. Edges touching
    an empty region are skipped with a warning.
    """
    names = partition.names
    edges = [(_region_id(a, names), _region_id(b, names)) for a, b in priors]
    regions = partition.regions
    active = tuple(i for i, r in enumerate(regions) if r.size)
    kept, weights = [], []
    for i, j in edges:
        if not regions[i].size or not regions[j].size:
            warnings.warn(f"prior edge {names[i]}-{names[j]} touches an empty region; skipped",
                          stacklevel=2)
            continue
        kept.append((i, j))
        weights.append(edge_distance(mesh, regions[i], regions[j], cap=cap, seed=seed))
    D = shortest_paths(len(names), kept, weights)
    return SemanticGraph(tuple(names), tuple(kept), np.array(weights, dtype=np.float64), D, active)


__all__ = ["Assignment", "SemanticGraph", "build_graph", "edge_distance", "farthest_point_sample",
           "parse_priors", "shortest_paths", "solve_assignment"]
