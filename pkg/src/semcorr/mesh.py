"""Triangle meshes: parsing, validation, normalization and discrete operators.

The stiffness matrix follows the convention ``W[i, j] = (cot a_ij + cot b_ij) / 2``
for neighbouring vertices and ``W[i, i] = -sum_j W[i, j]``, so ``W`` is negative
semi-definite. The positive semi-definite Laplacian used by the spectral module
is ``-W``.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .errors import DegenerateGeometry, ParseError, TopologyError

ZERO_AREA = 1e-14


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Validated triangle mesh.

    Parameters
    ----------
    vertices : (n, 3) float array
    faces : (m, 3) int array
        Counter-clockwise oriented triangles (outward normals).
    remap : (n_original,) int array, optional
        Map from the indices of the parsed file to the cleaned vertex
        indices; ``-1`` marks removed (unreferenced) vertices.
    """

    vertices: np.ndarray
    faces: np.ndarray
    remap: np.ndarray | None = field(default=None)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        f = np.array(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise TopologyError(f"vertices must be (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise TopologyError(f"faces must be (m, 3), got {f.shape}")
        if not np.all(np.isfinite(v)):
            raise TopologyError("non-finite vertex coordinates")
        if f.size:
            if f.min() < 0 or f.max() >= len(v):
                bad = int(f.max()) if f.max() >= len(v) else int(f.min())
                raise TopologyError(f"face references vertex {bad} of a {len(v)}-vertex mesh")
            degenerate = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
            if degenerate.any():
                raise TopologyError(f"degenerate face {int(np.flatnonzero(degenerate)[0])}")
        used = np.zeros(len(v), dtype=bool)
        used[f.ravel()] = True
        if not used.all():
            raise TopologyError("mesh has unreferenced vertices; use TriangleMesh.from_arrays")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        if self.remap is not None:
            r = np.array(self.remap, dtype=np.int64)
            r.setflags(write=False)
            object.__setattr__(self, "remap", r)

    @classmethod
    def from_arrays(cls, vertices, faces):
        """Build a mesh, dropping unreferenced vertices and recording the remap."""
        v = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        f = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            bad = int(f.max()) if f.max() >= len(v) else int(f.min())
            raise TopologyError(f"face references vertex {bad} of a {len(v)}-vertex mesh")
        used = np.zeros(len(v), dtype=bool)
        used[f.ravel()] = True
        remap = np.full(len(v), -1, dtype=np.int64)
        remap[used] = np.arange(used.sum())
        return cls(v[used], remap[f], remap=remap)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_faces(self):
        return self.faces.shape[0]

    @cached_property
    def edges(self):
        """Unique undirected edges as a sorted ``(E, 2)`` array with ``i < j``."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e = np.sort(e, axis=1)
        return np.unique(e, axis=0)

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @cached_property
    def adjacency(self):
        """Symmetric 0/1 vertex adjacency as CSR."""
        e = self.edges
        n = self.n_vertices
        data = np.ones(2 * len(e))
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        return sparse.csr_matrix((data, (rows, cols)), shape=(n, n))

    @cached_property
    def one_ring(self):
        """Tuple of neighbour index arrays, one per vertex."""
        A = self.adjacency
        return tuple(A.indices[A.indptr[i]:A.indptr[i + 1]].copy() for i in range(self.n_vertices))

    @cached_property
    def edge_lengths(self):
        e = self.edges
        return np.linalg.norm(self.vertices[e[:, 0]] - self.vertices[e[:, 1]], axis=1)

    @cached_property
    def face_areas(self):
        v = self.vertices
        f = self.faces
        cr = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        return 0.5 * np.linalg.norm(cr, axis=1)

    @cached_property
    def face_normals(self):
        v = self.vertices
        f = self.faces
        cr = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        return cr / np.maximum(np.linalg.norm(cr, axis=1, keepdims=True), 1e-300)

    @property
    def area(self):
        return float(self.face_areas.sum())

    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces

    def with_vertices(self, vertices):
        """Same connectivity, new positions."""
        return TriangleMesh(vertices, self.faces, remap=self.remap)

    def permuted(self, perm):
        """Relabel vertices so that new vertex ``i`` is old vertex ``perm[i]``."""
        perm = np.asarray(perm, dtype=np.int64)
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        return TriangleMesh(self.vertices[perm], inv[self.faces])


# ---------------------------------------------------------------------------
# parsing

def _tokens(stream):
    """Yield (line_number, tokens) for non-empty, non-comment lines."""
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _as_text(source):
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(source.decode("utf-8"))
    if isinstance(source, str):
        return io.StringIO(source)
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return io.StringIO(data)


def _floats(tokens, lineno, count=3):
    try:
        return [float(t) for t in tokens[:count]]
    except ValueError:
        raise ParseError(f"expected {count} numbers, got {' '.join(tokens)!r}", lineno) from None


def _parse_off(lines):
    it = _tokens(lines)
    try:
        lineno, toks = next(it)
    except StopIteration:
        raise ParseError("empty OFF stream", 1) from None
    head = toks[0]
    if not head.endswith("OFF"):
        raise ParseError(f"missing OFF header, got {head!r}", lineno)
    toks = toks[1:]
    if not toks:
        try:
            lineno, toks = next(it)
        except StopIteration:
            raise ParseError("missing OFF counts", lineno) from None
    try:
        nv, nf = int(toks[0]), int(toks[1])
    except (ValueError, IndexError):
        raise ParseError("malformed OFF counts line", lineno) from None
    verts, faces = [], []
    for _ in range(nv):
        try:
            lineno, toks = next(it)
        except StopIteration:
            raise ParseError("unexpected end of file in vertex block", lineno) from None
        if len(toks) < 3:
            raise ParseError("vertex line needs 3 coordinates", lineno)
        verts.append(_floats(toks, lineno))
    for _ in range(nf):
        try:
            lineno, toks = next(it)
        except StopIteration:
            raise ParseError("unexpected end of file in face block", lineno) from None
        try:
            cnt = int(toks[0])
            idx = [int(t) for t in toks[1:1 + cnt]]
        except ValueError:
            raise ParseError("malformed face line", lineno) from None
        if cnt != 3 or len(idx) != 3:
            raise ParseError("only triangular faces are supported", lineno)
        faces.append(idx)
    return verts, faces


def _parse_obj(lines):
    verts, faces = [], []
    for lineno, toks in _tokens(lines):
        tag = toks[0]
        if tag == "v":
            if len(toks) < 4:
                raise ParseError("vertex record needs 3 coordinates", lineno)
            verts.append(_floats(toks[1:], lineno))
        elif tag == "f":
            if len(toks) != 4:
                raise ParseError("only triangular faces are supported", lineno)
            idx = []
            for t in toks[1:]:
                try:
                    k = int(t.split("/", 1)[0])
                except ValueError:
                    raise ParseError(f"malformed face index {t!r}", lineno) from None
                if k == 0:
                    raise ParseError("OBJ indices are 1-based; got 0", lineno)
                idx.append(k - 1 if k > 0 else len(verts) + k)
            faces.append(idx)
    return verts, faces


def _parse_ply(lines):
    it = _tokens(lines)
    try:
        lineno, toks = next(it)
    except StopIteration:
        raise ParseError("empty PLY stream", 1) from None
    if toks != ["ply"]:
        raise ParseError("missing 'ply' magic", lineno)
    elements = []  # (name, count, [property names])
    while True:
        try:
            lineno, toks = next(it)
        except StopIteration:
            raise ParseError("unterminated PLY header", lineno) from None
        key = toks[0]
        if key == "format":
            if len(toks) < 2 or toks[1] != "ascii":
                raise ParseError("only ASCII PLY is supported", lineno)
        elif key == "element":
            try:
                elements.append((toks[1], int(toks[2]), []))
            except (IndexError, ValueError):
                raise ParseError("malformed element line", lineno) from None
        elif key == "property":
            if not elements:
                raise ParseError("property before element", lineno)
            elements[-1][2].append(toks[-1])
        elif key == "end_header":
            break
        elif key in ("comment", "obj_info"):
            continue
        else:
            raise ParseError(f"unknown header keyword {key!r}", lineno)
    verts, faces = [], []
    for name, count, props in elements:
        for _ in range(count):
            try:
                lineno, toks = next(it)
            except StopIteration:
                raise ParseError(f"unexpected end of file in element {name!r}", lineno) from None
            if name == "vertex":
                try:
                    pos = [props.index(c) for c in ("x", "y", "z")]
                    verts.append([float(toks[p]) for p in pos])
                except (ValueError, IndexError):
                    raise ParseError("malformed vertex record", lineno) from None
            elif name == "face":
                try:
                    cnt = int(toks[0])
                    idx = [int(t) for t in toks[1:1 + cnt]]
                except (ValueError, IndexError):
                    raise ParseError("malformed face record", lineno) from None
                if cnt != 3 or len(idx) != 3:
                    raise ParseError("only triangular faces are supported", lineno)
                faces.append(idx)
    return verts, faces


_PARSERS = {"OFF": _parse_off, "OBJ": _parse_obj, "PLY": _parse_ply, "PLY-ASCII": _parse_ply}


def load_mesh(source, format="OFF"):
    """Parse and validate a triangle mesh.

    ``source`` may be a path-less text/byte string or a readable stream.
    Unreferenced vertices are removed and the original-to-clean index map is
    stored on ``mesh.remap``.
    """
    fmt = format.upper()
    if fmt not in _PARSERS:
        raise ValueError(f"unsupported mesh format {format!r}")
    verts, faces = _PARSERS[fmt](_as_text(source))
    if not faces:
        raise TopologyError("mesh has no faces")
    v = np.array(verts, dtype=np.float64).reshape(-1, 3)
    f = np.array(faces, dtype=np.int64).reshape(-1, 3)
    return TriangleMesh.from_arrays(v, f)


def read_mesh(path):
    """Load a mesh from disk, inferring the format from the suffix."""
    suffix = str(path).rsplit(".", 1)[-1].upper()
    with open(path, "rb") as fh:
        return load_mesh(fh, format=suffix)


def write_off(mesh, path_or_stream):
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} 0"]
    lines += [" ".join(repr(float(c)) for c in v) for v in mesh.vertices]
    lines += ["3 " + " ".join(str(int(i)) for i in f) for f in mesh.faces]
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_stream, "write"):
        path_or_stream.write(text)
    else:
        with open(path_or_stream, "w") as fh:
            fh.write(text)


def remap_json(mesh):
    """Original-to-cleaned index map as a JSON array (``-1`` = dropped)."""
    remap = mesh.remap if mesh.remap is not None else np.arange(mesh.n_vertices)
    return json.dumps([int(i) for i in remap])


# ---------------------------------------------------------------------------
# geometry and operators

def normalize_unit_sphere(mesh):
    """Center the vertex centroid at the origin and scale the max norm to 1."""
    if mesh.n_vertices == 0:
        raise DegenerateGeometry("empty mesh")
    v = mesh.vertices - mesh.vertices.mean(axis=0)
    r = np.linalg.norm(v, axis=1).max()
    if r <= 0 or not np.isfinite(r):
        raise DegenerateGeometry("all vertices coincide")
    v = v / r
    # one correction pass pulls the centroid back to round-off level
    v = v - v.mean(axis=0)
    v = v / np.linalg.norm(v, axis=1).max()
    return mesh.with_vertices(v)


def _check_areas(mesh):
    areas = mesh.face_areas
    bad = np.flatnonzero(areas < ZERO_AREA)
    if bad.size:
        raise DegenerateGeometry(f"face {int(bad[0])} has zero area ({areas[bad[0]]:.3e})")
    return areas


def cotangent_stiffness(mesh):
    """Symmetric cotangent stiffness matrix (negative semi-definite, CSR)."""
    _check_areas(mesh)
    v = mesh.vertices
    f = mesh.faces
    n = mesh.n_vertices
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = f[:, (k + 1) % 3], f[:, (k + 2) % 3], f[:, k]
        a = v[i] - v[o]
        b = v[j] - v[o]
        cot = np.einsum("ij,ij->i", a, b) / np.linalg.norm(np.cross(a, b), axis=1)
        w = 0.5 * cot
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    W = sparse.csr_matrix((vals, (rows, cols)), shape=(n, n))
    W = W - sparse.diags(np.asarray(W.sum(axis=1)).ravel())
    return W.tocsr()


def lumped_mass(mesh):
    """Diagonal (barycentric) lumped mass matrix as a sparse diagonal."""
    areas = _check_areas(mesh)
    m = np.zeros(mesh.n_vertices)
    np.add.at(m, mesh.faces.ravel(), np.repeat(areas / 3.0, 3))
    return sparse.diags(m).tocsr()
