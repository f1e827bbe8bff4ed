"""Geodesic-error evaluation of point maps against dense or keypoint ground truth."""

from __future__ import annotations

import csv
import io
import json

import numpy as np
from scipy.sparse import csgraph

from ._validation import check_indices, check_vector
from .errors import DimensionMismatch, LengthMismatch, UnsortedThresholds
from .geodesics import _graph, normalization_scale

NORMALIZATION = "sqrt_area"


def _scale(mesh, scale):
    s = normalization_scale(mesh) if scale is None else float(scale)
    if not s > 0:
        raise DimensionMismatch("scale must be positive")
    return s


def _pair_distances(mesh, a, b):
    """``D_geo(a[m], b[m])`` with one Dijkstra per distinct endpoint."""
    ua, inv = np.unique(a, return_inverse=True)
    d = csgraph.dijkstra(_graph(mesh), directed=False, indices=ua)
    return d[inv, b]


def dense_error(pi, gt, mesh_src, scale=None):
    """Per-target-vertex geodesic error on the source mesh, divided by ``scale``.

    ``scale`` defaults to the square root of the source surface area.
    Returns ``(errors, mean)``.
    """
    pi = np.asarray(pi)
    gt = np.asarray(gt)
    if pi.ndim != 1 or pi.shape != gt.shape:
        raise DimensionMismatch(f"map shapes differ: {pi.shape} vs {gt.shape}")
    pi = check_indices(pi, mesh_src.n_vertices, "pi")
    gt = check_indices(gt, mesh_src.n_vertices, "gt")
    s = _scale(mesh_src, scale)
    err = _pair_distances(mesh_src, gt, pi) / s
    return err, float(err.mean()) if err.size else 0.0


def keypoint_error(pi, keypoints_src, keypoints_tgt, mesh_src, scale=None):
    """Mean of ``D_geo(pi[kp_tgt[m]], kp_src[m]) / scale`` over annotated pairs."""
    ks = np.asarray(keypoints_src)
    kt = np.asarray(keypoints_tgt)
    if ks.shape != kt.shape:
        raise LengthMismatch(f"{ks.size} source keypoints for {kt.size} target keypoints")
    pi = check_indices(pi, mesh_src.n_vertices, "pi")
    kt = check_indices(kt, len(pi), "keypoints_tgt")
    ks = check_indices(ks, mesh_src.n_vertices, "keypoints_src")
    if ks.size == 0:
        return 0.0
    s = _scale(mesh_src, scale)
    return float(np.mean(_pair_distances(mesh_src, ks, pi[kt]) / s))


def pck_curve(errors, thresholds):
    """Fraction of errors ``<=`` each threshold (thresholds ascending, ``>= 0``)."""
    e = check_vector(errors, name="errors")
    t = check_vector(thresholds, name="thresholds")
    if t.size == 0:
        return np.zeros(0)
    if np.any(np.diff(t) < 0) or np.any(t < 0) or np.any(np.isnan(t)):
        raise UnsortedThresholds("thresholds must be ascending and non-negative")
    if e.size == 0:
        return np.ones(t.size)
    e = np.sort(e)
    return np.searchsorted(e, t, side="right") / e.size


def report(errors, thresholds=None, scale=None, manifest=None, per_vertex=False,
           keypoint_mean=None):
    """JSON-serializable evaluation report."""
    errors = np.asarray(errors, dtype=np.float64)
    out = {"mean": float(errors.mean()) if errors.size else 0.0,
           "median": float(np.median(errors)) if errors.size else 0.0,
           "count": int(errors.size),
           "normalization": NORMALIZATION if scale is None else {"scale": float(scale)}}
    if keypoint_mean is not None:
        out["keypoint_mean"] = float(keypoint_mean)
    if thresholds is not None:
        out["thresholds"] = [float(x) for x in thresholds]
        out["pck"] = [float(x) for x in pck_curve(errors, thresholds)]
    if per_vertex:
        out["errors"] = [float(x) for x in errors]
    if manifest is not None:
        out["manifest"] = manifest
    return out


def report_json(rep):
    return json.dumps(rep, indent=2, sort_keys=True)


def curve_csv(thresholds, values):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "fraction"])
    for t, v in zip(thresholds, values):
        w.writerow([repr(float(t)), repr(float(v))])
    return buf.getvalue()
