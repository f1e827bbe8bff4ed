"""Plain ``key = value`` run configuration covering every pipeline default."""

from __future__ import annotations

import configparser
from dataclasses import asdict, dataclass, field, fields

from .errors import ParseError
from .model import TrainConfig
from .refine import RefineConfig


@dataclass
class PipelineConfig:
    """Stage defaults outside training and refinement."""

    n_views: int = 24
    image_size: int = 512
    fov: float = 60.0
    radius: float = 2.2
    k_basis: int = 200
    k_train: int = 128
    language_weight: float = 0.5
    score_threshold: float = 0.0
    region_cap: int = 256
    widths: str = "256,256,128"
    nonlinearity: str = "relu"
    seed: int = 0

    def hidden_widths(self):
        return [int(w) for w in self.widths.split(",") if w.strip()]


@dataclass
class RunConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)

    def to_dict(self):
        return {"pipeline": asdict(self.pipeline), "train": self.train.to_dict(),
                "refine": self.refine.to_dict()}

    def with_seed(self, seed):
        if seed is None:
            return self
        p = PipelineConfig(**{**asdict(self.pipeline), "seed": int(seed)})
        t = TrainConfig(**{**self.train.to_dict(), "seed": int(seed)})
        return RunConfig(p, t, self.refine)


def _coerce(kind, key, value):
    try:
        if kind in ("int", int):
            return int(value)
        if kind in ("float", float):
            return float(value)
        if kind in ("bool", bool):
            low = value.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(value)
            return low in ("1", "true", "yes")
        return value.strip()
    except ValueError as exc:
        raise ParseError(f"bad value for {key}: {value!r}") from exc


def parse_config(text):
    """Parse ``key = value`` lines (``#`` comments) into a :class:`RunConfig`.

    Keys are unique across the three groups; a ``train.`` / ``refine.`` /
    ``pipeline.`` prefix may be used to be explicit (``seed`` sets both the
    pipeline and training seeds unless prefixed).
    """
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise ParseError(str(exc).splitlines()[0]) from exc
    groups = {"pipeline": PipelineConfig, "train": TrainConfig, "refine": RefineConfig}
    values = {g: {} for g in groups}
    kinds = {g: {f.name: f.type for f in fields(c)} for g, c in groups.items()}
    for key, raw in cp["run"].items():
        prefix, _, name = key.rpartition(".")
        targets = [prefix] if prefix else [g for g in groups if name in kinds[g]]
        if not targets or any(t not in groups or name not in kinds[t] for t in targets):
            raise ParseError(f"unknown config key {key!r}")
        for g in targets:
            values[g][name] = _coerce(kinds[g][name], key, raw)
    try:
        return RunConfig(PipelineConfig(**values["pipeline"]), TrainConfig(**values["train"]),
                         RefineConfig(**values["refine"]))
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def load_config(path=None):
    if path is None:
        return RunConfig()
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def format_config(cfg):
    lines = []
    for group, values in cfg.to_dict().items():
        lines.append(f"# {group}")
        for k, v in values.items():
            lines.append(f"{group}.{k} = {str(v).lower() if isinstance(v, bool) else v}")
    return "\n".join(lines) + "\n"
