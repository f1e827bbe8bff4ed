"""Point maps from descriptors, and iterative spectral upsampling of a map.

Maps are target-indexed (``pi[j]`` is the source vertex for target ``j``).
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, fields

import numpy as np

from ._validation import check_features, check_indices, row_normalize
from .errors import BasisTooSmall
from .model import adapter_forward, soft_correspondence
from .spectral import nearest_rows, pointmap_to_fmap

logger = logging.getLogger(__name__)

# slack on the per-round residual check, relative to the residual magnitude
RESIDUAL_TOL = 1e-9


@dataclass
class RefineConfig:
    k_start: int = 20
    k_end: int = 200
    step: int = 10
    soft_init: bool = False
    tau: float = 0.07

    def schedule(self):
        if self.k_start > self.k_end:
            raise BasisTooSmall(f"k_start={self.k_start} exceeds k_end={self.k_end}")
        if self.step < 1:
            raise ValueError("step must be positive")
        ks = list(range(self.k_start, self.k_end + 1, self.step))
        if ks[-1] != self.k_end:
            ks.append(self.k_end)
        return ks

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        kinds = {f.name: f.type for f in fields(cls)}
        out = {}
        for k, v in d.items():
            if k not in kinds:
                continue
            if kinds[k] == "bool":
                out[k] = v if isinstance(v, bool) else str(v).lower() in ("1", "true", "yes")
            elif kinds[k] == "int":
                out[k] = int(v)
            else:
                out[k] = float(v)
        return cls(**out)


def initial_map(F_x, F_y, chunk=512):
    """Source vertex of maximal cosine similarity for every target vertex.

    Ties resolve to the smallest source index.
    """
    F_x = check_features(F_x, name="F_x")
    F_y = check_features(F_y, n_cols=F_x.shape[1], name="F_y")
    X = row_normalize(F_x)
    Y = row_normalize(F_y)
    out = np.empty(len(Y), dtype=np.int64)
    for start in range(0, len(Y), chunk):
        out[start:start + chunk] = np.argmax(Y[start:start + chunk] @ X.T, axis=1)
    return out


def _residual(phi_y_C, pulled):
    return float(np.linalg.norm(phi_y_C - pulled))


def spectral_refine(pi, basis_x, basis_y, k_start=20, k_end=200, step=10, history=None):
    """Alternate map-to-fmap projection and nearest-neighbour recovery while growing ``k``.

    At each ``k`` the current map is projected to ``C = Phi_y^+ Pi Phi_x`` and
    replaced by ``NN(Phi_y C, Phi_x)``. Each round records the reconstruction
    residual ``||Phi_y C - Pi Phi_x||`` before and after the update in
    ``history`` (a list, if given); the update never increases it.

    ``pi`` may be a hard ``(n_y,)`` map or a soft ``(n_y, n_x)`` matrix.
    """
    ks = RefineConfig(k_start, k_end, step).schedule()
    if k_end > basis_x.k or k_end > basis_y.k:
        raise BasisTooSmall(f"k_end={k_end} exceeds basis sizes ({basis_x.k}, {basis_y.k})")
    if k_start < 1:
        raise BasisTooSmall("k_start must be at least 1")
    pi = np.asarray(pi)
    if pi.ndim == 1:
        pi = check_indices(pi, basis_x.n_vertices, "point map")
    for k in ks:
        bx = basis_x.truncate(k)
        by = basis_y.truncate(k)
        C = pointmap_to_fmap(pi, bx, by)
        target = by.eigenfunctions @ C
        before_pull = pi @ bx.eigenfunctions if pi.ndim == 2 else bx.eigenfunctions[pi]
        new = nearest_rows(target, bx.eigenfunctions)
        before = _residual(target, before_pull)
        after = _residual(target, bx.eigenfunctions[new])
        if after > before + RESIDUAL_TOL * max(1.0, before):
            raise AssertionError(f"residual increased at k={k}: {before} -> {after}")
        if history is not None:
            history.append({"k": k, "residual_before": before, "residual_after": after})
        pi = new
    return pi


def match(bundle_x, bundle_y, params, config=None):
    """Adapter descriptors, cosine initial map, then spectral refinement.

    Bundles need ``features`` and ``basis`` attributes. Returns the target-indexed
    map and a provenance dictionary.
    """
    cfg = config if config is not None else RefineConfig()
    F_x = adapter_forward(params, bundle_x.features, bundle_x.basis)
    F_y = adapter_forward(params, bundle_y.features, bundle_y.basis)
    if cfg.soft_init:
        pi0 = soft_correspondence(F_x, F_y, cfg.tau)
    else:
        pi0 = initial_map(F_x, F_y)
    history = []
    pi = spectral_refine(pi0, bundle_x.basis, bundle_y.basis, cfg.k_start, cfg.k_end, cfg.step,
                         history=history)
    manifest = {
        "refine": cfg.to_dict(),
        "schedule": cfg.schedule(),
        "basis_sizes": [int(bundle_x.basis.k), int(bundle_y.basis.k)],
        "adapter": {"widths": params.widths, "nonlinearity": params.nonlinearity,
                    "seed": params.seed, "diffusion_steps": params.n_diffusion},
        "initial": "soft" if cfg.soft_init else "hard",
        "residuals": history,
    }
    return pi, manifest
