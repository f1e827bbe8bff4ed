import json

import numpy as np
import pytest

from semcorr import shapes
from semcorr.cli import main
from semcorr.mesh import write_off
from semcorr.tensor_io import load_json, load_tensor, save_json, save_tensor

SMALL = """\
n_views = 8
image_size = 128
k_basis = 60
k_train = 32
widths = 32,16
nonlinearity = tanh
steps = 30
refine.k_start = 10
refine.k_end = 60
"""

PRIMARY = {
    "preprocess": ["mesh.off", "remap.json", "evals.gltn", "phi.gltn", "mass.gltn",
                   "preprocess.json"],
    "lift": ["cameras.json", "visibility.gltn", "features.gltn"],
    "graph": ["labels.gltn", "graph.json", "fused.gltn"],
    "train": ["params.json", "losses.csv"],
    "match": ["map.gltn"],
    "eval": ["report.json", "pck.csv"],
}


def run(*argv):
    code = main([str(a) for a in argv])
    assert code == 0, f"exit {code} for {argv}"


def pipeline(root, cfg, kind="cylinder"):
    """synth -> preprocess -> lift -> graph (both shapes) -> train -> match -> eval."""
    d = {k: root / k for k in ("synth", "x", "y", "train", "match", "eval")}
    run("synth", "--kind", kind, "--config", cfg, "--out", d["synth"])
    for tag in "xy":
        s = d[tag]
        run("preprocess", "--mesh", d["synth"] / f"{tag}.off", "--config", cfg, "--out", s)
        run("lift", "--mesh", s, "--features", d["synth"] / f"views_{tag}", "--cameras",
            d["synth"] / "cameras.json", "--config", cfg, "--out", s)
        run("graph", "--mesh", s, "--scores", d["synth"] / f"scores_{tag}.gltn", "--priors",
            d["synth"] / "priors.json", "--embeddings", d["synth"] / "embeddings.gltn",
            "--config", cfg, "--out", s)
    run("train", "--mesh", d["x"], "--mesh", d["y"], "--config", cfg, "--out", d["train"])
    run("match", "--mesh", d["x"], "--mesh", d["y"], "--params", d["train"], "--config", cfg,
        "--out", d["match"])
    run("eval", "--mesh", d["x"], "--map", d["match"] / "map.gltn", "--gt",
        d["synth"] / "gt.gltn", "--config", cfg, "--out", d["eval"])
    return d


def primary_bytes(d):
    out = {}
    for stage, names in PRIMARY.items():
        base = d["x"] if stage in ("preprocess", "lift", "graph") else d[stage]
        for n in names:
            out[f"{stage}/{n}"] = (base / n).read_bytes()
    for p in sorted(d["train"].glob("param_*.gltn")):
        out[f"train/{p.name}"] = p.read_bytes()
    return out


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    p = tmp_path_factory.mktemp("cfg") / "small.cfg"
    p.write_text(SMALL)
    return p


@pytest.fixture(scope="module")
def runs(tmp_path_factory, config_file):
    a = pipeline(tmp_path_factory.mktemp("run_a"), config_file)
    b = pipeline(tmp_path_factory.mktemp("run_b"), config_file)
    return a, b


class TestPipeline:
    def test_outputs_and_manifest(self, runs):
        d, _ = runs
        rep = load_json(d["eval"] / "report.json")
        assert 0 <= rep["mean"] < 0.05 and rep["pck"][-1] <= 1.0
        man = load_json(d["match"] / "manifest.json")
        assert man["subcommand"] == "match" and man["outputs"] == ["map.gltn"]
        assert man["config"]["pipeline"]["k_basis"] == 60 and "created" in man
        assert load_tensor(d["match"] / "map.gltn").dtype == np.int64
        assert load_tensor(d["x"] / "fused.gltn").shape[1] == 32 + 16
        losses = (d["train"] / "losses.csv").read_text().splitlines()
        assert losses[0].startswith("step,data") and len(losses) == 31

    def test_rerun_byte_identical(self, runs):
        a, b = runs
        ba, bb = primary_bytes(a), primary_bytes(b)
        assert ba.keys() == bb.keys()
        assert [k for k in ba if ba[k] != bb[k]] == []
        views_a = sorted((a["synth"] / "views_x").iterdir())
        assert all(p.read_bytes() == (b["synth"] / "views_x" / p.name).read_bytes()
                   for p in views_a)

    def test_self_match_identity(self, runs, tmp_path, config_file):
        d, _ = runs
        run("match", "--mesh", d["x"], "--mesh", d["x"], "--params", d["train"], "--config",
            config_file, "--out", tmp_path / "m")
        run("eval", "--mesh", d["x"], "--map", tmp_path / "m" / "map.gltn", "--config",
            config_file, "--out", tmp_path / "e")
        assert load_json(tmp_path / "e" / "report.json")["mean"] < 1e-3

    def test_plot(self, tmp_path):
        save_json(tmp_path / "r.json", {"errors": [0.0, 0.0, 0.0]})
        run("plot", "--report", tmp_path / "r.json", "--out", tmp_path / "p")
        svg = (tmp_path / "p" / "pck.svg").read_text()
        pts = svg.split('class="curve"')[1].split('points="')[1].split('"')[0].split()
        assert len({p.split(",")[1] for p in pts}) == 1
        rows = (tmp_path / "p" / "pck.csv").read_text().splitlines()[1:]
        assert all(r.endswith(",1.0") for r in rows)


class TestExitCodes:
    def test_usage(self, tmp_path, capsys):
        assert main(["train", "--out", str(tmp_path)]) == 1
        assert main(["frobnicate", "--out", str(tmp_path)]) == 1
        assert main(["plot", "--out", str(tmp_path)]) == 1
        err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert err["exit_code"] == 1 and "report" in err["message"]

    def test_input(self, tmp_path, capsys):
        assert main(["preprocess", "--mesh", str(tmp_path / "missing.off"),
                     "--out", str(tmp_path)]) == 2
        bad = tmp_path / "bad.off"
        bad.write_text("OFF\n3 1 0\n0 0 0\n1 0\n")
        assert main(["preprocess", "--mesh", str(bad), "--out", str(tmp_path / "o")]) == 2
        cfg = tmp_path / "c.cfg"
        cfg.write_text("nonsense = 1\n")
        assert main(["plot", "--report", "x", "--config", str(cfg), "--out", str(tmp_path)]) == 2

    def test_numerical(self, tmp_path):
        # constant features make every descriptor identical, so the ridge-free solve is singular
        d = tmp_path / "s"
        off = tmp_path / "t.off"
        write_off(shapes.icosphere(1), str(off))
        assert main(["preprocess", "--mesh", str(off), "--out", str(d)]) == 0
        save_tensor(d / "features.gltn", np.ones((42, 3)))
        cfg = tmp_path / "r.cfg"
        cfg.write_text("ridge = 0\nsteps = 2\nwidths = 4\nk_train = 10\n")
        assert main(["train", "--mesh", str(d), "--mesh", str(d), "--config", str(cfg),
                     "--out", str(tmp_path / "t")]) == 3
