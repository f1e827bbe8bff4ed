"""Fixed synthetic experiments used by the acceptance suite.

Each function builds its data from a seed, runs the pipeline end to end and
returns plain numbers, so results can be compared across seeds and reruns.
"""

from __future__ import annotations

import numpy as np

from . import synthetic
from .evaluation import dense_error
from .model import ShapeData, TrainConfig, adapter_forward, train_pair
from .refine import RefineConfig, initial_map, match
from .region_graph import build_graph
from .semantics import complete_partition, fuse_language
from .spectral import compute_basis
from .view_lift import lift_features, sample_cameras, visibility_record

ABLATION_RUNGS = ("geometry", "visual", "language", "gac")


def _lifted_bundle(mesh, params, cameras, noise, noise_seed, label_noise, language_weight, k):
    vis, rasters = visibility_record(mesh, cameras)
    values = synthetic.semantic_field(params, mesh.vertices, noise=noise, noise_seed=noise_seed)
    views = synthetic.RenderedViews(mesh, cameras, values, rasters)
    visual = lift_features(mesh, cameras, views, vis, rasters)
    partial = synthetic.band_partition(params, noise=label_noise, seed=noise_seed)
    part = complete_partition(partial, mesh)
    fused = fuse_language(visual, part, synthetic.language_table(), weight=language_weight)
    graph = build_graph(part, synthetic.CHAIN_PRIORS, mesh)
    return {"geometry": mesh.vertices, "visual": visual, "language": fused, "labels": part.labels,
            "distances": graph.distances, "basis": compute_basis(mesh, k)}


def ablation_errors(seed, steps=200, image_size=256, n_views=24, k_basis=128, k_train=64,
                    k_end=80, noise=0.3, label_noise=0.02, language_weight=0.5, lambda_gac=0.01):
    """Mean normalized geodesic error of each descriptor rung on the creature pair.

    Rungs add one ingredient at a time: vertex positions only, lifted visual
    features, visual plus language fusion, and the last one trained with the
    contrastive graph term switched on. Returns ``{rung: (initial, refined)}``
    errors, the first from the cosine map and the second after refinement.
    """
    pair = synthetic.creature_pair(seed=seed)
    cams = sample_cameras(n_views, H=image_size, W=image_size, seed=seed)
    shapes = [_lifted_bundle(m, p, cams, noise, ns, label_noise, language_weight, k_basis)
              for m, p, ns in ((pair.mesh_x, pair.params_x, 100 + seed),
                               (pair.mesh_y, pair.params_y, 200 + seed))]
    out = {}
    for rung in ABLATION_RUNGS:
        key = "language" if rung == "gac" else rung
        data = [ShapeData(s[key], s["basis"].truncate(k_train), s["labels"], s["distances"])
                for s in shapes]
        cfg = TrainConfig(lambda_gac=lambda_gac if rung == "gac" else 0.0, steps=steps, seed=seed)
        params, _, _ = train_pair(data[0], data[1], cfg)
        full = [ShapeData(s[key], s["basis"]) for s in shapes]
        pi, _ = match(full[0], full[1], params, RefineConfig(k_end=k_end))
        F = [adapter_forward(params, d.features, d.basis) for d in full]
        pi0 = initial_map(F[0], F[1])
        out[rung] = (dense_error(pi0, pair.gt, pair.mesh_x)[1],
                     dense_error(pi, pair.gt, pair.mesh_x)[1])
    return out


def cylinder_errors(seed=0, steps=200, image_size=512, n_views=24, k_basis=200, k_train=128,
                    noise=0.1, language_weight=0.5):
    """Refined error of the full pipeline on the straight-versus-bent tube pair.

    Returns ``(mean_error, manifest)``.
    """
    pair = synthetic.cylinder_pair(seed=seed)
    cams = sample_cameras(n_views, H=image_size, W=image_size, seed=seed)
    shapes = [_lifted_bundle(m, p, cams, noise, ns, 0.0, language_weight, k_basis)
              for m, p, ns in ((pair.mesh_x, pair.params_x, 100 + seed),
                               (pair.mesh_y, pair.params_y, 200 + seed))]
    data = [ShapeData(s["language"], s["basis"].truncate(k_train), s["labels"], s["distances"])
            for s in shapes]
    params, _, _ = train_pair(data[0], data[1], TrainConfig(steps=steps, seed=seed))
    full = [ShapeData(s["language"], s["basis"]) for s in shapes]
    pi, manifest = match(full[0], full[1], params, RefineConfig(k_end=k_basis))
    return float(np.mean(dense_error(pi, pair.gt, pair.mesh_x)[0])), manifest
