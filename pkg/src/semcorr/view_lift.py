"""Multi-view visibility and lifting of 2-D feature images onto mesh vertices.

Image coordinates are continuous ``(u, v)`` with pixel ``(row i, col j)``
covering ``[j, j + 1) x [i, i + 1)``; pixel centres sit at half-integers.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.sparse import csgraph

from .errors import AllInvisible, CameraInsideMesh, DimensionMismatch
from .geodesics import _graph

ELEVATION_LADDER = (-30.0, 0.0, 30.0, 60.0)
NEAR_PLANE = 1e-6
DEPTH_TOLERANCE = 1e-3
WORLD_UP = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class Camera:
    """Pinhole camera on a sphere around the origin, looking at the origin.

    ``fov`` is the full field of view across the smaller image side.
    """

    azimuth: float
    elevation: float
    radius: float = 2.2
    fov: float = 60.0
    height: int = 512
    width: int = 512

    def __post_init__(self):
        if self.height < 16 or self.width < 16:
            raise ValueError("image size must be at least 16x16")
        if self.radius <= 1.0:
            raise ValueError("camera radius must exceed 1 (mesh lies in the unit sphere)")
        if np.arcsin(1.0 / self.radius) > np.radians(self.fov) / 2:
            raise ValueError(f"fov {self.fov} deg does not frame the unit sphere at radius {self.radius}")
        if abs(abs(self.elevation) - 90.0) < 1e-9:
            raise ValueError("elevation of +-90 deg is degenerate with the world up axis")

    @cached_property
    def position(self):
        a, e = np.radians(self.azimuth), np.radians(self.elevation)
        return self.radius * np.array([np.cos(e) * np.sin(a), np.sin(e), np.cos(e) * np.cos(a)])

    @cached_property
    def rotation(self):
        """Rows are the camera right, down and forward axes in world coordinates."""
        fwd = -self.position / np.linalg.norm(self.position)
        right = np.cross(fwd, WORLD_UP)
        right /= np.linalg.norm(right)
        down = np.cross(fwd, right)
        return np.vstack([right, down, fwd])

    @property
    def focal(self):
        return 0.5 * min(self.height, self.width) / np.tan(np.radians(self.fov) / 2)

    def to_camera(self, points):
        return (np.asarray(points, dtype=np.float64) - self.position) @ self.rotation.T

    def project(self, points):
        """``(u, v, depth)`` for each world point."""
        pc = self.to_camera(points)
        z = pc[:, 2]
        u = 0.5 * self.width + self.focal * pc[:, 0] / z
        v = 0.5 * self.height + self.focal * pc[:, 1] / z
        return u, v, z

    def to_dict(self):
        return asdict(self)


def sample_cameras(K=24, radius=2.2, fov=60.0, H=512, W=512, seed=0):
    """Azimuth ring at ``360 i / K`` degrees with a cycling elevation ladder.

    The seed only selects the phase of the elevation ladder.
    """
    if K < 1:
        raise ValueError("need at least one camera")
    phase = int(seed) % len(ELEVATION_LADDER)
    return [Camera(azimuth=360.0 * i / K,
                   elevation=ELEVATION_LADDER[(i + phase) % len(ELEVATION_LADDER)],
                   radius=radius, fov=fov, height=H, width=W)
            for i in range(K)]


def cameras_to_json(cameras, seed=0):
    return json.dumps({"seed": int(seed), "elevation_schedule": list(ELEVATION_LADDER),
                       "cameras": [c.to_dict() for c in cameras]}, indent=2)


def cameras_from_json(text):
    obj = json.loads(text)
    return [Camera(**c) for c in obj["cameras"]]


@dataclass(frozen=True, eq=False)
class Raster:
    """Per-view rasterization result."""

    depth: np.ndarray        # (H, W), inf for background
    face_id: np.ndarray      # (H, W), -1 for background
    bary: np.ndarray         # (H, W, 3) perspective-correct barycentrics
    u: np.ndarray            # (n,) projected vertex coordinates
    v: np.ndarray
    z: np.ndarray            # (n,) vertex depth
    visible: np.ndarray      # (n,) bool
    eps: float               # depth tolerance used for visibility
    front: np.ndarray        # (m,) bool, front-facing faces


def _face_depth_at(cam_uv, cam_z, tri, u, v):
    """Perspective-correct depth of the plane of triangle ``tri`` at screen points."""
    (u0, u1, u2), (v0, v1, v2) = cam_uv[0][tri], cam_uv[1][tri]
    den = (v1 - v2) * (u0 - u2) + (u2 - u1) * (v0 - v2)
    b0 = ((v1 - v2) * (u - u2) + (u2 - u1) * (v - v2)) / den
    b1 = ((v2 - v0) * (u - u2) + (u0 - u2) * (v - v2)) / den
    b2 = 1.0 - b0 - b1
    z0, z1, z2 = cam_z[tri]
    inv = b0 / z0 + b1 / z1 + b2 / z2
    return 1.0 / inv


def rasterize(mesh, cam):
    """Z-buffer rasterization with back-face culling, plus per-vertex visibility.

    A vertex is visible when it projects inside the image, at least one of its
    incident faces is front-facing, and no face drawn in its 3x3 pixel
    neighbourhood covers its exact screen position at a depth more than ``eps``
    in front of it (``eps = 1e-3 x`` the view's vertex depth range).
    """
    verts = mesh.vertices
    faces = mesh.faces
    H, W = cam.height, cam.width
    u, v, z = cam.project(verts)
    if np.any(z <= NEAR_PLANE):
        raise CameraInsideMesh("a vertex lies behind the camera near plane")
    normals = np.cross(verts[faces[:, 1]] - verts[faces[:, 0]], verts[faces[:, 2]] - verts[faces[:, 0]])
    front = np.einsum("ij,ij->i", normals, cam.position - verts[faces[:, 0]]) > 0
    depth = np.full((H, W), np.inf)
    face_id = np.full((H, W), -1, dtype=np.int64)
    bary = np.zeros((H, W, 3))
    for fi in np.flatnonzero(front):
        a, b, c = faces[fi]
        us, vs, zs = u[[a, b, c]], v[[a, b, c]], z[[a, b, c]]
        j0 = max(int(np.floor(us.min() - 0.5)), 0)
        j1 = min(int(np.ceil(us.max() - 0.5)), W - 1)
        i0 = max(int(np.floor(vs.min() - 0.5)), 0)
        i1 = min(int(np.ceil(vs.max() - 0.5)), H - 1)
        if j1 < j0 or i1 < i0:
            continue
        den = (vs[1] - vs[2]) * (us[0] - us[2]) + (us[2] - us[1]) * (vs[0] - vs[2])
        if abs(den) < 1e-18:
            continue
        pj, pi = np.meshgrid(np.arange(j0, j1 + 1) + 0.5, np.arange(i0, i1 + 1) + 0.5)
        b0 = ((vs[1] - vs[2]) * (pj - us[2]) + (us[2] - us[1]) * (pi - vs[2])) / den
        b1 = ((vs[2] - vs[0]) * (pj - us[2]) + (us[0] - us[2]) * (pi - vs[2])) / den
        b2 = 1.0 - b0 - b1
        inside = (b0 >= -1e-12) & (b1 >= -1e-12) & (b2 >= -1e-12)
        if not inside.any():
            continue
        w = np.stack([b0 / zs[0], b1 / zs[1], b2 / zs[2]], axis=-1)
        inv = w.sum(axis=-1)
        zz = 1.0 / inv
        sub_d = depth[i0:i1 + 1, j0:j1 + 1]
        win = inside & (zz < sub_d)
        if not win.any():
            continue
        sub_d[win] = zz[win]
        face_id[i0:i1 + 1, j0:j1 + 1][win] = fi
        bary[i0:i1 + 1, j0:j1 + 1][win] = w[win] / inv[win, None]
    eps = DEPTH_TOLERANCE * float(z.max() - z.min()) if len(z) > 1 else DEPTH_TOLERANCE
    eps = max(eps, 1e-12)
    visible = _vertex_visibility(mesh, (u, v), z, front, face_id, eps)
    return Raster(depth, face_id, bary, u, v, z, visible, eps, front)


def _covering_depth(uv, z, tri, pu, pv):
    """Depth of triangle ``tri`` at screen point ``(pu, pv)``, or inf if it misses the point."""
    (u0, u1, u2), (v0, v1, v2) = uv[0][tri], uv[1][tri]
    den = (v1 - v2) * (u0 - u2) + (u2 - u1) * (v0 - v2)
    if abs(den) < 1e-18:
        return np.inf
    b0 = ((v1 - v2) * (pu - u2) + (u2 - u1) * (pv - v2)) / den
    b1 = ((v2 - v0) * (pu - u2) + (u0 - u2) * (pv - v2)) / den
    if min(b0, b1, 1.0 - b0 - b1) < -1e-9:
        return np.inf
    return _face_depth_at(uv, z, tri, pu, pv)


def _vertex_visibility(mesh, uv, z, front, face_id, eps):
    u, v = uv
    H, W = face_id.shape
    n = mesh.n_vertices
    faces = mesh.faces
    has_front = np.zeros(n, dtype=bool)
    has_front[faces[front].ravel()] = True
    inside = (u >= 0) & (u < W) & (v >= 0) & (v < H)
    visible = np.zeros(n, dtype=bool)
    for vi in np.flatnonzero(inside & has_front):
        j, i = int(u[vi]), int(v[vi])
        ids = np.unique(face_id[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2])
        ids = ids[ids >= 0]
        # occluded when a non-incident face drawn nearby covers the vertex's exact
        # screen position at a depth more than eps in front of it
        occluded = False
        for f in ids:
            if vi in faces[f]:
                continue
            if _covering_depth(uv, z, faces[f], u[vi], v[vi]) < z[vi] - eps:
                occluded = True
                break
        visible[vi] = not occluded
    return visible


def visibility_record(mesh, cameras):
    """``(n, K)`` boolean visibility matrix and the per-view rasters."""
    rasters = [rasterize(mesh, c) for c in cameras]
    return np.column_stack([r.visible for r in rasters]), rasters


def bilinear_sample(image, u, v):
    """Sample an ``(H, W, D)`` image at continuous coordinates (edge-clamped)."""
    H, W = image.shape[:2]
    x = np.clip(np.asarray(u) - 0.5, 0.0, W - 1.0)
    y = np.clip(np.asarray(v) - 0.5, 0.0, H - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.int64), W - 2) if W > 1 else np.zeros_like(x, dtype=np.int64)
    y0 = np.minimum(np.floor(y).astype(np.int64), H - 2) if H > 1 else np.zeros_like(y, dtype=np.int64)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    x1 = np.minimum(x0 + 1, W - 1)
    y1 = np.minimum(y0 + 1, H - 1)
    return ((1 - fy) * ((1 - fx) * image[y0, x0] + fx * image[y0, x1])
            + fy * ((1 - fx) * image[y1, x0] + fx * image[y1, x1]))


def lift_features(mesh, cameras, images, visibility, rasters=None, return_mask=False):
    """Visibility-weighted average of bilinear samples from every view.

    Vertices seen by no view copy the feature of their geodesically nearest
    visible vertex. With ``return_mask=True`` also returns the boolean mask of
    vertices that were filled this way.
    """
    if len(images) != len(cameras):
        raise DimensionMismatch(f"{len(images)} images for {len(cameras)} cameras")
    vis = np.asarray(visibility, dtype=bool)
    if vis.shape != (mesh.n_vertices, len(cameras)):
        raise DimensionMismatch(f"visibility must be ({mesh.n_vertices}, {len(cameras)})")
    total = None
    for k, cam in enumerate(cameras):
        # images may be a lazy sequence; only one view is held at a time
        im = np.asarray(images[k], dtype=np.float64)
        if im.ndim == 2:
            im = im[..., None]
        if im.shape[:2] != (cam.height, cam.width):
            raise DimensionMismatch(f"image {k} has size {im.shape[:2]}, camera expects "
                                    f"{(cam.height, cam.width)}")
        if total is None:
            total = np.zeros((mesh.n_vertices, im.shape[-1]))
        elif im.shape[-1] != total.shape[1]:
            raise DimensionMismatch("feature images must share one feature dimension")
        if not np.all(np.isfinite(im)):
            raise DimensionMismatch(f"image {k} has non-finite entries")
        sel = np.flatnonzero(vis[:, k])
        if sel.size == 0:
            continue
        if rasters is not None:
            uu, vv = rasters[k].u[sel], rasters[k].v[sel]
        else:
            uu, vv, _ = cam.project(mesh.vertices[sel])
        total[sel] += bilinear_sample(im, uu, vv)
    if total is None:
        raise AllInvisible("no views given")
    count = vis.sum(axis=1)
    seen = count > 0
    if not seen.any():
        raise AllInvisible("no vertex is visible in any view")
    out = np.zeros_like(total)
    out[seen] = total[seen] / count[seen, None]
    missing = ~seen
    if missing.any():
        _, _, nearest = csgraph.dijkstra(_graph(mesh), directed=False, indices=np.flatnonzero(seen),
                                         min_only=True, return_predecessors=True)
        fill = np.flatnonzero(missing & (nearest >= 0))
        out[fill] = out[nearest[fill]]
    return (out, missing) if return_mask else out


def render_vertex_attribute(mesh, cam, values, raster=None):
    """Render per-vertex values into an ``(H, W, D)`` image.

    Covered pixels get the perspective-correct barycentric interpolation of the
    values of the visible face; background pixels copy the nearest covered
    pixel so that bilinear samples near silhouettes stay on the surface.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    r = raster if raster is not None else rasterize(mesh, cam)
    covered = r.face_id >= 0
    img = np.zeros((cam.height, cam.width, values.shape[1]))
    if not covered.any():
        return img
    tri = mesh.faces[r.face_id[covered]]
    b = r.bary[covered]
    img[covered] = np.einsum("pk,pkd->pd", b, values[tri])
    _, (ii, jj) = ndimage.distance_transform_edt(~covered, return_indices=True)
    return img[ii, jj]
