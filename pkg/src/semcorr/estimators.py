"""Estimator-style wrappers around the functional pipeline.

The objects follow the scikit-learn conventions (constructor arguments are
hyper-parameters, learned state ends with ``_``, ``get_params``/``set_params``
come from :class:`~sklearn.base.BaseEstimator`), but the "samples" are shapes
rather than rows of a design matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .model import ShapeData, TrainConfig, adapter_forward, init_adapter, train_pair
from .refine import RefineConfig, match
from .region_graph import REGION_CAP, build_graph
from .semantics import LanguageTable, complete_partition, fuse_language, labels_from_scores
from .spectral import compute_basis
from .view_lift import lift_features, sample_cameras, visibility_record


@dataclass
class ShapeBundle:
    """Everything known about one shape: mesh, basis, descriptors and semantics."""

    mesh: object
    basis: object = None
    features: np.ndarray = None
    partition: object = None
    graph: object = None

    @classmethod
    def from_mesh(cls, mesh, k=200, **kw):
        return cls(mesh, compute_basis(mesh, min(k, mesh.n_vertices - 1)), **kw)

    def shape_data(self, k=None):
        basis = self.basis if k is None or k >= self.basis.k else self.basis.truncate(k)
        labels = None if self.partition is None else self.partition.labels
        dist = None if self.graph is None else self.graph.distances
        return ShapeData(self.features, basis, labels, dist)


def _check_fitted(est, attr):
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit first")


class FeatureLifter(BaseEstimator, TransformerMixin):
    """Cameras and visibility are fitted to a mesh; images are transformed to vertex features."""

    def __init__(self, n_views=24, image_size=512, fov=60.0, radius=2.2, seed=0):
        self.n_views = n_views
        self.image_size = image_size
        self.fov = fov
        self.radius = radius
        self.seed = seed

    def fit(self, mesh, y=None):
        self.cameras_ = sample_cameras(self.n_views, self.radius, self.fov, self.image_size,
                                       self.image_size, self.seed)
        self.visibility_, self.rasters_ = visibility_record(mesh, self.cameras_)
        self.mesh_ = mesh
        return self

    def transform(self, images):
        _check_fitted(self, "cameras_")
        return lift_features(self.mesh_, self.cameras_, images, self.visibility_, self.rasters_)


class SemanticFuser(BaseEstimator, TransformerMixin):
    """Fits a completed partition (and region graph) from region scores; appends language cues."""

    def __init__(self, embeddings=None, names=None, priors=(), threshold=0.0, language_weight=0.5,
                 region_cap=REGION_CAP, seed=0):
        self.embeddings = embeddings
        self.names = names
        self.priors = priors
        self.threshold = threshold
        self.language_weight = language_weight
        self.region_cap = region_cap
        self.seed = seed

    def fit(self, mesh, scores):
        partial = labels_from_scores(scores, self.threshold, self.names)
        self.partition_ = complete_partition(partial, mesh)
        self.graph_ = build_graph(self.partition_, list(self.priors), mesh, self.region_cap,
                                  self.seed)
        return self

    def transform(self, visual):
        _check_fitted(self, "partition_")
        if self.embeddings is None or self.language_weight == 0:
            return np.asarray(visual, dtype=np.float64)
        table = self.embeddings
        if not isinstance(table, LanguageTable):
            table = LanguageTable(np.asarray(table), tuple(self.names or ()))
        return fuse_language(visual, self.partition_, table, self.language_weight)


class CorrespondenceModel(BaseEstimator):
    """Adapter trained on a shape pair; ``predict`` returns the refined target-to-source map."""

    def __init__(self, hidden=(256, 256, 128), nonlinearity="relu", k_train=128,
                 lambda_reg=1.0, lambda_couple=1.0, lambda_gac=0.01, m_base=1.0, n_pairs=512,
                 lr=1e-3, steps=1000, tau=0.07, ridge=1e-3, seed=0,
                 k_start=20, k_end=200, step=10, soft_init=False):
        self.hidden = hidden
        self.nonlinearity = nonlinearity
        self.k_train = k_train
        self.lambda_reg = lambda_reg
        self.lambda_couple = lambda_couple
        self.lambda_gac = lambda_gac
        self.m_base = m_base
        self.n_pairs = n_pairs
        self.lr = lr
        self.steps = steps
        self.tau = tau
        self.ridge = ridge
        self.seed = seed
        self.k_start = k_start
        self.k_end = k_end
        self.step = step
        self.soft_init = soft_init

    def train_config(self):
        return TrainConfig(self.lambda_reg, self.lambda_couple, self.lambda_gac, self.m_base,
                           self.n_pairs, self.lr, self.steps, self.tau, self.ridge, self.seed)

    def refine_config(self, bundle_x=None, bundle_y=None):
        k_end = self.k_end
        if bundle_x is not None:
            k_end = min(k_end, bundle_x.basis.k, bundle_y.basis.k)
        return RefineConfig(min(self.k_start, k_end), k_end, self.step, self.soft_init, self.tau)

    def fit(self, bundle_x, bundle_y):
        sx = bundle_x.shape_data(self.k_train)
        sy = bundle_y.shape_data(self.k_train)
        widths = [sx.features.shape[1], *self.hidden]
        init = init_adapter(widths, self.seed, self.nonlinearity)
        self.params_, self.history_, self.evaluations_ = train_pair(sx, sy, self.train_config(),
                                                                    params=init)
        return self

    def transform(self, bundle):
        _check_fitted(self, "params_")
        return adapter_forward(self.params_, bundle.features, bundle.basis)

    def predict(self, bundle_x, bundle_y):
        _check_fitted(self, "params_")
        pi, self.map_manifest_ = match(bundle_x.shape_data(), bundle_y.shape_data(), self.params_,
                                       self.refine_config(bundle_x, bundle_y))
        return pi
