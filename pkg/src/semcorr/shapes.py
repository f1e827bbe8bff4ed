"""Procedural test shapes.

Every generator returns a :class:`~semcorr.mesh.TriangleMesh` with outward
(counter-clockwise) face orientation. Tube generators also return per-vertex
parameter coordinates ``(angle, t)`` so that two tubes built with the same
resolution share a parameterization and hence a ground-truth map.
"""

import numpy as np
from scipy.spatial import ConvexHull

from .mesh import TriangleMesh


def tetrahedron():
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    f = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    return _orient_outward(TriangleMesh(v, f))


def icosphere(subdivisions=3):
    """Unit icosphere; subdivision ``s`` gives ``10 * 4**s + 2`` vertices."""
    t = (1.0 + 5 ** 0.5) / 2.0
    v = [[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
         [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
         [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]]
    f = [[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
         [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
         [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
         [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]]
    verts = [np.array(p, dtype=float) / np.linalg.norm(p) for p in v]
    faces = f
    for _ in range(subdivisions):
        cache = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new
    return TriangleMesh(np.array(verts), np.array(faces))


def square_grid(n=20, pattern="uniform"):
    """Unit square ``[0, 1]^2`` in the z=0 plane with ``(n + 1)^2`` vertices.

    ``pattern="uniform"`` splits every cell along the same diagonal,
    ``"alternating"`` flips the diagonal in a checkerboard.
    """
    xs = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    v = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    faces = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            if pattern == "alternating" and (i + j) % 2:
                faces += [[a, b, d], [b, c, d]]
            else:
                faces += [[a, b, c], [a, c, d]]
    return TriangleMesh(v, np.array(faces))


def strip(n=3, height=10.0):
    """Triangle strip whose first ``n`` vertices form a unit-spaced chain.

    The second row sits ``height`` above the chain, so for a large height every
    shortest edge path between chain vertices runs along the chain itself.
    """
    bottom = np.column_stack([np.arange(n, dtype=float), np.zeros(n), np.zeros(n)])
    top = np.column_stack([np.arange(n - 1) + 0.5, np.full(n - 1, height), np.zeros(n - 1)])
    v = np.vstack([bottom, top])
    faces = [[i, i + 1, n + i] for i in range(n - 1)]
    faces += [[i + 1, n + i + 1, n + i] for i in range(n - 2)]
    return TriangleMesh(v, np.array(faces))


def random_sphere_mesh(n=40, seed=0):
    """Convex hull of ``n`` random points on the unit sphere."""
    rng = np.random.default_rng(seed)
    p = rng.normal(size=(n, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    hull = ConvexHull(p)
    return _orient_outward(TriangleMesh.from_arrays(p, hull.simplices))


def uv_sphere(n_lat=20, n_lon=25, bumps=0.0, seed=0):
    """Latitude/longitude sphere with ``n_lat * n_lon + 2`` vertices.

    ``bumps`` adds a seeded smooth radial perturbation that breaks all
    intrinsic symmetries.
    """
    lat = np.pi * (np.arange(1, n_lat + 1) / (n_lat + 1))
    lon = 2 * np.pi * np.arange(n_lon) / n_lon
    T, P = np.meshgrid(lat, lon, indexing="ij")
    v = np.column_stack([np.sin(T).ravel() * np.cos(P).ravel(),
                         np.sin(T).ravel() * np.sin(P).ravel(),
                         np.cos(T).ravel()])
    v = np.vstack([v, [[0, 0, 1], [0, 0, -1]]])
    north, south = n_lat * n_lon, n_lat * n_lon + 1
    idx = np.arange(n_lat * n_lon).reshape(n_lat, n_lon)
    faces = []
    for j in range(n_lon):
        jn = (j + 1) % n_lon
        faces.append([north, idx[0, j], idx[0, jn]])
        faces.append([south, idx[-1, jn], idx[-1, j]])
        for i in range(n_lat - 1):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, jn], idx[i, jn]
            faces += [[a, b, c], [a, c, d]]
    if bumps:
        rng = np.random.default_rng(seed)
        centers = rng.normal(size=(6, 3))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
        amp = rng.uniform(0.5, 1.0, size=6) * bumps
        r = 1.0 + (amp * np.exp(-4.0 * np.sum((v[:, None, :] - centers[None]) ** 2, axis=2))).sum(1)
        v = v * r[:, None]
    return _orient_outward(TriangleMesh(v, np.array(faces)))


def tube(n_theta=24, n_h=20, length=2.0, radius=0.35, bend=0.0, profile=None):
    """Capped tube along +z with a shared ``(angle, t)`` parameterization.

    Parameters
    ----------
    radius : float
        Base radius.
    bend : float
        Total bending angle (radians) of the centre line, applied as a
        circular arc of the given length; ``0`` keeps the tube straight.
    profile : callable, optional
        ``profile(t) -> scale`` multiplies the radius along ``t in [0, 1]``.

    Returns
    -------
    mesh : TriangleMesh
    params : (n, 2) array of ``(angle, t)``; the caps use ``t = -0.05`` and
        ``t = 1.05`` with angle 0.
    """
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    ts = np.linspace(0.0, 1.0, n_h)
    Tt, Th = np.meshgrid(ts, theta, indexing="ij")
    r = radius * (profile(Tt) if profile is not None else np.ones_like(Tt))
    s = (Tt * length).ravel()
    local = np.column_stack([(r * np.cos(Th)).ravel(), (r * np.sin(Th)).ravel()])
    params = np.column_stack([Th.ravel(), Tt.ravel()])
    pts = _centerline_frame(s, local, length, bend)
    r0 = radius * (profile(np.array([0.0]))[0] if profile is not None else 1.0)
    r1 = radius * (profile(np.array([1.0]))[0] if profile is not None else 1.0)
    caps = _centerline_frame(np.array([-0.5 * r0, length + 0.5 * r1]), np.zeros((2, 2)), length, bend)
    v = np.vstack([pts, caps])
    bottom, top = n_h * n_theta, n_h * n_theta + 1
    idx = np.arange(n_h * n_theta).reshape(n_h, n_theta)
    faces = []
    for j in range(n_theta):
        jn = (j + 1) % n_theta
        faces.append([bottom, idx[0, jn], idx[0, j]])
        faces.append([top, idx[-1, j], idx[-1, jn]])
        for i in range(n_h - 1):
            a, b, c, d = idx[i, j], idx[i, jn], idx[i + 1, jn], idx[i + 1, j]
            faces += [[a, b, c], [a, c, d]]
    params = np.vstack([params, [[0.0, -0.05], [0.0, 1.05]]])
    # faces are built counter-clockwise seen from outside; bending preserves that
    return TriangleMesh(v, np.array(faces)), params


def _centerline_frame(s, local, length, bend):
    """Place cross-section offsets ``local`` (x, y) along a possibly bent axis."""
    if abs(bend) < 1e-12:
        return np.column_stack([local[:, 0], local[:, 1], s])
    R = length / bend
    phi = s / R
    # centre line bends in the x-z plane around (R, 0, 0)
    cx = R - R * np.cos(phi)
    cz = R * np.sin(phi)
    tx, tz = np.sin(phi), np.cos(phi)
    # normal inside the bending plane is (cos phi, 0, -sin phi)
    nx, nz = np.cos(phi), -np.sin(phi)
    return np.column_stack([cx + local[:, 0] * nx, local[:, 1], cz + local[:, 0] * nz])


def _orient_outward(mesh):
    """Flip faces whose normal points towards the vertex centroid.

    Only valid for star-shaped meshes around the centroid, which covers every
    generator in this module.
    """
    v = mesh.vertices
    f = mesh.faces.copy()
    centroid = v.mean(axis=0)
    fc = v[f].mean(axis=1)
    n = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
    flip = np.einsum("ij,ij->i", n, fc - centroid) < 0
    f[flip] = f[flip][:, [0, 2, 1]]
    return TriangleMesh(v, f, remap=mesh.remap)
