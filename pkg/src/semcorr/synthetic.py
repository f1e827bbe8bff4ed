"""Synthetic shape pairs with known ground truth and a simulated feature extractor.

Both shapes of a pair are tubes built over the same ``(angle, t)`` grid, so
vertex ``i`` of one corresponds to vertex ``i`` of the other before the target
is shuffled. Parts are bands along ``t`` named like a four-part animal.

The feature extractor stands in for a pretrained 2D backbone: it renders a
smooth, noisy function of the shared parameterization into every view. It is
deliberately blind to which end of the tube it is looking at (head and tail
look alike), the kind of confusion language cues are meant to resolve.
"""

from __future__ import annotations

import zlib
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .mesh import normalize_unit_sphere
from .semantics import LanguageTable, labels_from_scores
from .shapes import tube
from .view_lift import render_vertex_attribute

REGION_NAMES = ("head", "neck", "torso", "tail")
BAND_CENTERS = np.array([0.08, 0.3, 0.62, 0.94])
CHAIN_PRIORS = (("head", "neck"), ("neck", "torso"), ("torso", "tail"))


@dataclass
class SyntheticPair:
    mesh_x: object
    mesh_y: object
    params_x: np.ndarray
    params_y: np.ndarray
    gt: np.ndarray          # gt[j] = source vertex of target vertex j

    @property
    def perm(self):
        return self.gt


def _pair(mesh_x, px, mesh_y, py, seed):
    mesh_x = normalize_unit_sphere(mesh_x)
    mesh_y = normalize_unit_sphere(mesh_y)
    perm = np.random.default_rng(seed).permutation(mesh_y.n_vertices)
    return SyntheticPair(mesh_x, mesh_y.permuted(perm), px, py[perm], perm)


def cylinder_pair(n_theta=24, n_h=20, bend=np.pi / 2, seed=0):
    """Straight tube (source) against a bent copy (target, vertices shuffled)."""
    mx, px = tube(n_theta, n_h)
    my, py = tube(n_theta, n_h, bend=bend)
    return _pair(mx, px, my, py, seed)


def _profile_x(t):
    return 0.8 + 0.5 * np.exp(-((t - 0.62) / 0.2) ** 2) + 0.3 * np.exp(-((t - 0.05) / 0.08) ** 2)


def _profile_y(t):
    return 0.6 + 0.9 * np.exp(-((t - 0.55) / 0.25) ** 2) + 0.5 * np.exp(-((t - 0.08) / 0.1) ** 2)


def creature_pair(n_theta=24, n_h=20, bend=2.0, seed=0):
    """Non-isometric pair: different radius profiles, target bent and shuffled."""
    mx, px = tube(n_theta, n_h, length=2.2, radius=0.3, profile=_profile_x)
    my, py = tube(n_theta, n_h, length=1.8, radius=0.3, profile=_profile_y, bend=bend)
    return _pair(mx, px, my, py, seed)


def _embed(params, symmetric):
    a, t = params[:, 0], np.clip(params[:, 1], 0.0, 1.0)
    s = np.abs(2.0 * t - 1.0) if symmetric else t
    return np.column_stack([np.cos(a), np.sin(a), 2.0 * s])


def semantic_field(params, positions, dim=32, noise=0.1, symmetric=True, seed=0, noise_seed=None):
    """Per-vertex features a 2D backbone might produce, before rendering.

    A random Fourier map of the shared coordinates (shared across shapes via
    ``seed``) plus smooth shape-specific noise drawn from ``noise_seed``.
    """
    rng = np.random.default_rng(seed)
    e = _embed(params, symmetric)
    Wf = rng.normal(scale=1.2, size=(e.shape[1], dim))
    bf = rng.uniform(0, 2 * np.pi, size=dim)
    feats = np.cos(e @ Wf + bf)
    if noise:
        nrng = np.random.default_rng(noise_seed)
        Wn = nrng.normal(scale=2.0, size=(3, dim))
        bn = nrng.uniform(0, 2 * np.pi, size=dim)
        feats = feats + noise * np.cos(positions @ Wn + bn)
    return feats


class RenderedViews(Sequence):
    """Lazy sequence of feature images, one rendered per access."""

    def __init__(self, mesh, cameras, values, rasters=None):
        self.mesh, self.cameras, self.values, self.rasters = mesh, cameras, values, rasters

    def __len__(self):
        return len(self.cameras)

    def __getitem__(self, k):
        r = None if self.rasters is None else self.rasters[k]
        return render_vertex_attribute(self.mesh, self.cameras[k], self.values, raster=r)


def band_scores(params, noise=0.0, seed=0):
    """Per-vertex scores for the four named bands (higher is more likely)."""
    t = params[:, 1]
    S = -np.abs(t[:, None] - BAND_CENTERS[None, :])
    if noise:
        S = S + noise * np.random.default_rng(seed).normal(size=S.shape)
    return S


def band_partition(params, threshold=-0.12, noise=0.0, seed=0):
    """Partial labelling from :func:`band_scores`; far-from-centre vertices stay unlabelled."""
    return labels_from_scores(band_scores(params, noise, seed), threshold, REGION_NAMES)


def name_embedding(name, dim=16, shared=0.8):
    """Deterministic pseudo text embedding of a prompt string.

    Text encoders place related prompts close together; a shared direction
    gives every pair of prompts an expected cosine similarity of ``shared``.
    """
    common = np.random.default_rng(0).normal(size=dim)
    own = np.random.default_rng(zlib.crc32(name.encode("utf-8"))).normal(size=dim)
    return np.sqrt(shared) * common + np.sqrt(1.0 - shared) * own


def language_table(names=REGION_NAMES, dim=16, shared=0.8):
    return LanguageTable(np.array([name_embedding(n, dim, shared) for n in names]), tuple(names),
                         encoder="hash-normal")
