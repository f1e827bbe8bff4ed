"""Command-line front end: one subcommand per pipeline stage.

A shape lives in a directory that successive stages fill in::

    preprocess  mesh.off  remap.json  evals.gltn  phi.gltn  mass.gltn
    lift        cameras.json  visibility.gltn  features.gltn
    graph       labels.gltn  graph.json  [fused.gltn]

``train`` and ``match`` take two such directories (source first), ``eval``
scores a map file, and ``plot`` draws the accuracy curve of a report. Every
stage writes ``manifest.json`` next to its outputs.

Exit codes: 1 usage, 2 bad input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import logging
import os
import sys
import warnings

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .errors import InputError, ParseError, SemcorrError
from .evaluation import curve_csv, dense_error, keypoint_error, pck_curve, report, report_json
from .geodesics import normalization_scale
from .mesh import normalize_unit_sphere, read_mesh, remap_json, write_off
from .model import AdapterParams, ShapeData, TrainConfig, init_adapter, train_pair
from .plot import pck_svg
from .refine import RefineConfig, match
from .region_graph import SemanticGraph, build_graph, parse_priors
from .semantics import LanguageTable, complete_partition, fuse_language, labels_from_scores
from .spectral import SpectralBasis, compute_basis
from .tensor_io import file_digest, load_json, load_tensor, save_json, save_tensor
from .view_lift import cameras_from_json, cameras_to_json, lift_features, sample_cameras, \
    visibility_record

logger = logging.getLogger("semcorr")

DEFAULT_THRESHOLDS = [round(0.01 * i, 2) for i in range(26)]


class UsageError(SemcorrError):
    exit_code = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# shape directories

def _mesh_path(path):
    return os.path.join(path, "mesh.off") if os.path.isdir(path) else path


def _load_mesh(path):
    return read_mesh(_mesh_path(path))


def _load_basis(path):
    try:
        return SpectralBasis(load_tensor(os.path.join(path, "evals.gltn")),
                             load_tensor(os.path.join(path, "phi.gltn")),
                             load_tensor(os.path.join(path, "mass.gltn")))
    except FileNotFoundError as exc:
        raise InputError(f"{path} is not a preprocessed shape directory (run preprocess)") from exc


def _descriptors(path, name=None):
    for cand in ([name] if name else ["fused.gltn", "features.gltn"]):
        p = cand if os.path.isabs(cand) or os.path.exists(cand) else os.path.join(path, cand)
        if os.path.exists(p):
            return load_tensor(p), p
    raise InputError(f"no descriptors in {path} (run lift and/or graph)")


def _semantics(path):
    lp, gp = os.path.join(path, "labels.gltn"), os.path.join(path, "graph.json")
    if not (os.path.exists(lp) and os.path.exists(gp)):
        return None, None
    with open(gp, encoding="utf-8") as fh:
        graph = SemanticGraph.from_json(fh.read())
    return load_tensor(lp), graph


def _shape(path, features=None):
    F, fpath = _descriptors(path, features)
    labels, graph = _semantics(path)
    return ShapeData(np.asarray(F, dtype=np.float64), _load_basis(path), labels,
                     None if graph is None else graph.distances), fpath


def _manifest(args, cfg, inputs, outputs, extra=None):
    digests = {}
    for p in inputs:
        if p and os.path.isfile(p):
            digests[p] = file_digest(p)
    out = {
        "tool": "semcorr", "version": __version__, "subcommand": args.command,
        "config": cfg.to_dict(), "seed": cfg.pipeline.seed,
        "inputs": digests, "outputs": sorted(outputs),
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "conventions": {"normalization": "sqrt_area", "elevation_ladder": [-30, 0, 30, 60],
                        "k_basis": cfg.pipeline.k_basis, "k_train": cfg.pipeline.k_train,
                        "map_direction": "target-indexed: map[j] = source vertex"},
    }
    if extra:
        out.update(extra)
    save_json(os.path.join(args.out, "manifest.json"), out)


# ---------------------------------------------------------------------------
# subcommands

def cmd_preprocess(args, cfg):
    mesh = normalize_unit_sphere(_load_mesh(args.mesh[0]))
    k = min(cfg.pipeline.k_basis, mesh.n_vertices - 1)
    basis = compute_basis(mesh, k)
    os.makedirs(args.out, exist_ok=True)
    write_off(mesh, os.path.join(args.out, "mesh.off"))
    with open(os.path.join(args.out, "remap.json"), "w", encoding="utf-8") as fh:
        fh.write(remap_json(mesh))
    save_tensor(os.path.join(args.out, "evals.gltn"), basis.eigenvalues)
    save_tensor(os.path.join(args.out, "phi.gltn"), basis.eigenfunctions)
    save_tensor(os.path.join(args.out, "mass.gltn"), basis.mass)
    save_json(os.path.join(args.out, "preprocess.json"),
              {"n_vertices": mesh.n_vertices, "n_faces": mesh.n_faces, "k": k,
               "scale": normalization_scale(mesh)})
    return [_mesh_path(args.mesh[0])], ["mesh.off", "remap.json", "evals.gltn", "phi.gltn",
                                        "mass.gltn", "preprocess.json"], None


class _ViewFiles:
    """Per-view feature images stored as ``view_XXX.gltn`` files, read lazily."""

    def __init__(self, paths):
        self.paths = paths

    def __len__(self):
        return len(self.paths)

    def __getitem__(self, k):
        return load_tensor(self.paths[k])


def _open_views(path):
    if os.path.isdir(path):
        names = sorted(n for n in os.listdir(path) if n.endswith(".gltn"))
        return _ViewFiles([os.path.join(path, n) for n in names]), [os.path.join(path, n) for n in names]
    t = load_tensor(path)
    if t.ndim != 4:
        raise InputError(f"feature image tensor must be (K, H, W, D), got shape {t.shape}")
    return t, [path]


def cmd_lift(args, cfg):
    mesh = _load_mesh(args.mesh[0])
    p = cfg.pipeline
    if args.cameras:
        with open(args.cameras, encoding="utf-8") as fh:
            cams = cameras_from_json(fh.read())
    else:
        cams = sample_cameras(p.n_views, p.radius, p.fov, p.image_size, p.image_size, p.seed)
    if not args.features:
        raise UsageError("lift needs --features (feature images)")
    images, paths = _open_views(args.features[0])
    vis, rasters = visibility_record(mesh, cams)
    F = lift_features(mesh, cams, images, vis, rasters)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "cameras.json"), "w", encoding="utf-8") as fh:
        fh.write(cameras_to_json(cams, p.seed))
    save_tensor(os.path.join(args.out, "visibility.gltn"), vis.astype(np.int64))
    save_tensor(os.path.join(args.out, "features.gltn"), F)
    return [_mesh_path(args.mesh[0]), args.cameras, *paths], ["cameras.json", "visibility.gltn",
                                                              "features.gltn"], None


def cmd_graph(args, cfg):
    mesh = _load_mesh(args.mesh[0])
    if not args.scores or not args.priors:
        raise UsageError("graph needs --scores and --priors")
    prior_obj = load_json(args.priors)
    names = tuple(prior_obj.get("regions", ()))
    scores = load_tensor(args.scores)
    if not names:
        names = tuple(f"region_{i}" for i in range(scores.shape[1]))
    partial = labels_from_scores(scores, cfg.pipeline.score_threshold, names)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        part = complete_partition(partial, mesh)
        graph = build_graph(part, parse_priors(prior_obj, names), mesh, cfg.pipeline.region_cap,
                            cfg.pipeline.seed)
    os.makedirs(args.out, exist_ok=True)
    save_tensor(os.path.join(args.out, "labels.gltn"), part.labels)
    with open(os.path.join(args.out, "graph.json"), "w", encoding="utf-8") as fh:
        fh.write(graph.to_json() + "\n")
    outputs = ["labels.gltn", "graph.json"]
    inputs = [_mesh_path(args.mesh[0]), args.scores, args.priors]
    if args.embeddings:
        visual_path = args.features[0] if args.features else os.path.join(args.out, "features.gltn")
        table = LanguageTable(load_tensor(args.embeddings), names)
        fused = fuse_language(load_tensor(visual_path), part, table, cfg.pipeline.language_weight)
        save_tensor(os.path.join(args.out, "fused.gltn"), fused)
        outputs.append("fused.gltn")
        inputs += [args.embeddings, visual_path]
    return inputs, outputs, {"warnings": [str(w.message) for w in caught]}


def _params_to_files(params, cfg, out):
    arrays = params.arrays()
    for name, a in zip(params.names(), arrays):
        save_tensor(os.path.join(out, f"param_{name}.gltn"), a)
    save_json(os.path.join(out, "params.json"),
              {"widths": params.widths, "nonlinearity": params.nonlinearity, "seed": params.seed,
               "diffusion_steps": params.n_diffusion, "names": params.names(),
               "config": cfg.to_dict()})


def _params_from_files(path):
    try:
        head = load_json(os.path.join(path, "params.json"))
    except FileNotFoundError as exc:
        raise InputError(f"no adapter checkpoint in {path}") from exc
    arrays = [load_tensor(os.path.join(path, f"param_{n}.gltn")) for n in head["names"]]
    n = len(head["widths"]) - 1
    s = head["diffusion_steps"]
    return AdapterParams(arrays[:n], arrays[n:2 * n], arrays[2 * n:2 * n + s],
                         head["nonlinearity"], head["seed"])


def _two_shapes(args):
    if not args.mesh or len(args.mesh) != 2:
        raise UsageError(f"{args.command} needs --mesh SOURCE_DIR --mesh TARGET_DIR")
    feats = args.features or [None, None]
    if len(feats) != 2:
        raise UsageError("give --features twice (source, target) or not at all")
    (sx, fx), (sy, fy) = _shape(args.mesh[0], feats[0]), _shape(args.mesh[1], feats[1])
    return sx, sy, [fx, fy]


def cmd_train(args, cfg):
    sx, sy, fpaths = _two_shapes(args)
    k = cfg.pipeline.k_train
    sxk = ShapeData(sx.features, sx.basis.truncate(min(k, sx.basis.k)), sx.labels, sx.distances)
    syk = ShapeData(sy.features, sy.basis.truncate(min(k, sy.basis.k)), sy.labels, sy.distances)
    widths = [sx.features.shape[1], *cfg.pipeline.hidden_widths()]
    params = init_adapter(widths, cfg.train.seed, cfg.pipeline.nonlinearity)
    params, history, evals = train_pair(sxk, syk, cfg.train, params=params)
    os.makedirs(args.out, exist_ok=True)
    _params_to_files(params, cfg, args.out)
    with open(os.path.join(args.out, "losses.csv"), "w", encoding="utf-8") as fh:
        fh.write("step,data,reg,couple,gac,total,grad_norm\n")
        for i, r in enumerate(history):
            fh.write(f"{i},{r.data!r},{r.reg!r},{r.couple!r},{r.gac!r},{r.total!r},{r.grad_norm!r}\n")
    extra = {"evaluations": [[s, float(t)] for s, t in evals],
             "k_train": [sxk.basis.k, syk.basis.k]}
    return fpaths, ["params.json", "losses.csv"] + [f"param_{n}.gltn" for n in params.names()], extra


def cmd_match(args, cfg):
    sx, sy, fpaths = _two_shapes(args)
    if not args.params:
        raise UsageError("match needs --params (a train output directory)")
    params = _params_from_files(args.params)
    r = cfg.refine
    k_end = min(r.k_end, sx.basis.k, sy.basis.k)
    rc = RefineConfig(min(r.k_start, k_end), k_end, r.step, r.soft_init, r.tau)
    pi, info = match(sx, sy, params, rc)
    os.makedirs(args.out, exist_ok=True)
    save_tensor(os.path.join(args.out, "map.gltn"), pi)
    return fpaths + [os.path.join(args.params, "params.json")], ["map.gltn"], {"match": info}


def cmd_eval(args, cfg):
    if not args.mesh or not args.map:
        raise UsageError("eval needs --mesh SOURCE and --map")
    mesh = _load_mesh(args.mesh[0])
    pi = load_tensor(args.map)
    inputs = [_mesh_path(args.mesh[0]), args.map]
    scale = normalization_scale(mesh)
    if args.gt:
        gt = load_tensor(args.gt)
        inputs.append(args.gt)
    else:
        # without ground truth the map is scored against the identity
        gt = np.arange(len(pi))
    errors, _ = dense_error(pi, gt, mesh, scale)
    kp = None
    if args.keypoints:
        obj = load_json(args.keypoints)
        kp = keypoint_error(pi, obj["source"], obj["target"], mesh, scale)
        inputs.append(args.keypoints)
    rep = report(errors, DEFAULT_THRESHOLDS, per_vertex=True, keypoint_mean=kp)
    rep["scale"] = scale
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report_json(rep) + "\n")
    with open(os.path.join(args.out, "pck.csv"), "w", encoding="utf-8") as fh:
        fh.write(curve_csv(rep["thresholds"], rep["pck"]))
    return inputs, ["report.json", "pck.csv"], {"mean": rep["mean"]}


def cmd_plot(args, cfg):
    if not args.report:
        raise UsageError("plot needs --report")
    rep = load_json(args.report)
    if "errors" in rep:
        thresholds = rep.get("thresholds", DEFAULT_THRESHOLDS)
        values = pck_curve(rep["errors"], thresholds)
    elif "pck" in rep:
        thresholds, values = rep["thresholds"], rep["pck"]
    else:
        raise ParseError("report has neither per-vertex errors nor a curve")
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "pck.svg"), "w", encoding="utf-8") as fh:
        fh.write(pck_svg(thresholds, values))
    with open(os.path.join(args.out, "pck.csv"), "w", encoding="utf-8") as fh:
        fh.write(curve_csv(thresholds, values))
    return [args.report], ["pck.svg", "pck.csv"], None


def cmd_synth(args, cfg):
    """Write the bundled synthetic pair: meshes, feature images, scores, priors, ground truth."""
    from . import synthetic as syn
    from .view_lift import render_vertex_attribute
    p = cfg.pipeline
    pair = syn.cylinder_pair(seed=p.seed) if args.kind == "cylinder" else syn.creature_pair(seed=p.seed)
    cams = sample_cameras(p.n_views, p.radius, p.fov, p.image_size, p.image_size, p.seed)
    os.makedirs(args.out, exist_ok=True)
    outputs = ["gt.gltn", "priors.json", "embeddings.gltn"]
    save_tensor(os.path.join(args.out, "gt.gltn"), pair.gt)
    save_json(os.path.join(args.out, "priors.json"),
              {"regions": list(syn.REGION_NAMES), "edges": [list(e) for e in syn.CHAIN_PRIORS]})
    save_tensor(os.path.join(args.out, "embeddings.gltn"), syn.language_table().embeddings)
    symmetric = args.kind != "cylinder"
    for tag, mesh, params, noise_seed in (("x", pair.mesh_x, pair.params_x, 2 * p.seed + 1),
                                           ("y", pair.mesh_y, pair.params_y, 2 * p.seed + 2)):
        write_off(mesh, os.path.join(args.out, f"{tag}.off"))
        vals = syn.semantic_field(params, mesh.vertices, symmetric=symmetric, noise_seed=noise_seed)
        vdir = os.path.join(args.out, f"views_{tag}")
        os.makedirs(vdir, exist_ok=True)
        for k, cam in enumerate(cams):
            save_tensor(os.path.join(vdir, f"view_{k:03d}.gltn"),
                        render_vertex_attribute(mesh, cam, vals).astype(np.float32))
        # shifted so the default threshold of 0 keeps vertices near a band centre
        save_tensor(os.path.join(args.out, f"scores_{tag}.gltn"),
                    syn.band_scores(params, noise=0.02, seed=noise_seed) + 0.12)
        outputs += [f"{tag}.off", f"views_{tag}/", f"scores_{tag}.gltn"]
    with open(os.path.join(args.out, "cameras.json"), "w", encoding="utf-8") as fh:
        fh.write(cameras_to_json(cams, p.seed))
    outputs.append("cameras.json")
    return [], outputs, {"kind": args.kind}


COMMANDS = {"preprocess": cmd_preprocess, "lift": cmd_lift, "graph": cmd_graph,
            "train": cmd_train, "match": cmd_match, "eval": cmd_eval, "plot": cmd_plot,
            "synth": cmd_synth}


def build_parser():
    parser = _Parser(prog="semcorr", description="Semantic dense shape correspondence.")
    parser.add_argument("--version", action="version", version=f"semcorr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=(COMMANDS[name].__doc__ or name).splitlines()[0])
        sp.add_argument("--mesh", action="append", help="mesh file or shape directory "
                        "(repeat for source and target)")
        sp.add_argument("--features", action="append", help="feature images (lift), visual "
                        "features (graph) or descriptor files (train/match)")
        sp.add_argument("--scores")
        sp.add_argument("--embeddings")
        sp.add_argument("--priors")
        sp.add_argument("--cameras")
        sp.add_argument("--params")
        sp.add_argument("--map")
        sp.add_argument("--gt")
        sp.add_argument("--keypoints")
        sp.add_argument("--report")
        sp.add_argument("--config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", required=True)
        if name == "synth":
            sp.add_argument("--kind", choices=("cylinder", "creature"), default="cylinder")
        sp.add_argument("-v", "--verbose", action="store_true")
    return parser


def _fail(exc, code):
    err = {"error": type(exc).__name__, "module": type(exc).__module__, "message": str(exc),
           "exit_code": code}
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        return _fail(exc, 1)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config).with_seed(args.seed)
        if args.mesh is None and args.command in ("preprocess", "lift", "graph"):
            raise UsageError(f"{args.command} needs --mesh")
        inputs, outputs, extra = COMMANDS[args.command](args, cfg)
        _manifest(args, cfg, [args.config, *inputs], outputs, extra)
    except SemcorrError as exc:
        return _fail(exc, exc.exit_code)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        return _fail(exc, 2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
