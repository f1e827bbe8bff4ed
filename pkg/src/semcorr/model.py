"""Trainable descriptor adapter, functional-map and graph-contrastive objectives.

The adapter is a per-vertex MLP whose hidden layers are each followed by a
learnable spectral diffusion step::

    a' = a + Phi ((exp(-lambda t) - 1) * (Phi^T M a))

with one diffusion time ``t = s**2`` per channel. A zero time leaves the
signal untouched; large times damp every in-basis frequency except the
constant. Output rows are L2-normalized.

All gradients are computed in closed form (reverse mode by hand), including
the derivative of the ridge least-squares functional map.

Functional maps follow :mod:`semcorr.spectral`: ``C_xy`` has shape
``(k_y, k_x)`` and carries coefficients on X to Y, ``C_yx`` the reverse.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from ._validation import check_features, row_normalize
from .errors import (DimensionMismatch, DivergenceDetected, EmptyPairSet, NonFiniteGradient,
                     SingularSystem)

logger = logging.getLogger(__name__)

ACTIVATIONS = ("relu", "tanh", "identity")


# ---------------------------------------------------------------------------
# parameters and configuration

@dataclass
class AdapterParams:
    weights: list
    biases: list
    diffusion: list          # free parameters s per hidden layer; time = s**2
    nonlinearity: str = "relu"
    seed: int = 0

    @property
    def widths(self):
        return [self.weights[0].shape[0]] + [W.shape[1] for W in self.weights]

    @property
    def n_diffusion(self):
        return len(self.diffusion)

    def diffusion_times(self):
        return [s ** 2 for s in self.diffusion]

    def arrays(self):
        return list(self.weights) + list(self.biases) + list(self.diffusion)

    def names(self):
        n = len(self.weights)
        return ([f"W{i}" for i in range(n)] + [f"b{i}" for i in range(n)]
                + [f"s{i}" for i in range(len(self.diffusion))])

    def with_arrays(self, arrays):
        n, s = len(self.weights), len(self.diffusion)
        return AdapterParams(list(arrays[:n]), list(arrays[n:2 * n]), list(arrays[2 * n:2 * n + s]),
                             self.nonlinearity, self.seed)

    def copy(self):
        return self.with_arrays([a.copy() for a in self.arrays()])


def init_adapter(widths, seed=0, nonlinearity="relu", init="he", diffusion_time=0.0025):
    """Create adapter parameters for layer widths ``[d_in, h_1, ..., d_out]``.

    ``init="identity"`` requires equal widths and produces identity weights,
    zero biases and zero diffusion times when ``diffusion_time=0``.
    """
    if nonlinearity not in ACTIVATIONS:
        raise ValueError(f"unknown nonlinearity {nonlinearity!r}")
    widths = [int(w) for w in widths]
    if len(widths) < 2:
        raise ValueError("need at least input and output widths")
    rng = np.random.default_rng(seed)
    Ws, bs, ss = [], [], []
    for li, (a, b) in enumerate(zip(widths[:-1], widths[1:])):
        if init == "identity":
            if a != b:
                raise ValueError("identity init needs equal widths")
            W = np.eye(a)
        else:
            gain = 2.0 if nonlinearity == "relu" else 1.0
            W = rng.normal(scale=np.sqrt(gain / a), size=(a, b))
        Ws.append(W)
        bs.append(np.zeros(b))
        if li < len(widths) - 2:
            ss.append(np.full(b, np.sqrt(diffusion_time)))
    return AdapterParams(Ws, bs, ss, nonlinearity, int(seed))


@dataclass
class TrainConfig:
    """Training hyper-parameters; every field is echoed into run manifests."""

    lambda_reg: float = 1.0
    lambda_couple: float = 1.0
    lambda_gac: float = 0.01
    m_base: float = 1.0
    n_pairs: int = 512
    lr: float = 1e-3
    steps: int = 1000
    tau: float = 0.07
    ridge: float = 1e-3
    seed: int = 0
    eval_every: int = 10

    def __post_init__(self):
        for name in ("lambda_reg", "lambda_couple", "lambda_gac", "m_base", "ridge", "lr"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.tau > 0:
            raise ValueError("tau must be > 0")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        known = {f.name: f.type for f in fields(cls)}
        out = {}
        for k, v in d.items():
            if k in known:
                out[k] = int(v) if known[k] == "int" else float(v)
        return cls(**out)


@dataclass
class LossReport:
    data: float
    reg: float
    couple: float
    gac: float
    total: float
    weights: dict = field(default_factory=dict)
    grad_norm: float = float("nan")

    @property
    def fm(self):
        return self.data + self.weights["lambda_reg"] * self.reg + self.weights["lambda_couple"] * self.couple


def total_loss(data, reg, couple, gac, lambda_reg=1.0, lambda_couple=1.0, lambda_gac=0.01):
    """``L_fm + lambda_gac * L_gac`` with ``L_fm = data + lambda_reg reg + lambda_couple couple``."""
    return data + lambda_reg * reg + lambda_couple * couple + lambda_gac * gac


# ---------------------------------------------------------------------------
# adapter

def _act(name, a):
    if name == "relu":
        return np.maximum(a, 0.0)
    if name == "tanh":
        return np.tanh(a)
    return a


def _act_grad(name, a, h):
    if name == "relu":
        return (a > 0).astype(a.dtype)
    if name == "tanh":
        return 1.0 - h ** 2
    return np.ones_like(a)


def _diffusion_gain(evals, s):
    t = s ** 2
    return np.exp(-np.outer(evals, t)) - 1.0


def _forward(params, X, basis):
    phi = basis.eigenfunctions
    P = basis.pinv
    evals = basis.eigenvalues
    cache = {"h": [X], "a": [], "z": [], "g": [], "post": []}
    h = X
    L = len(params.weights)
    for li in range(L):
        a = h @ params.weights[li] + params.biases[li]
        if li < L - 1:
            if li < len(params.diffusion):
                Z = P @ a
                G = _diffusion_gain(evals, params.diffusion[li])
                a = a + phi @ (G * Z)
                cache["z"].append(Z)
                cache["g"].append(G)
            h = _act(params.nonlinearity, a)
        else:
            h = a
        cache["a"].append(a)
        cache["h"].append(h)
    norms = np.linalg.norm(h, axis=1, keepdims=True)
    norms = np.maximum(norms, 1e-12)
    out = h / norms
    cache["norms"] = norms
    cache["out"] = out
    return out, cache


def _backward(params, basis, cache, g_out):
    phi = basis.eigenfunctions
    P = basis.pinv
    evals = basis.eigenvalues
    L = len(params.weights)
    out, norms = cache["out"], cache["norms"]
    gh = (g_out - out * np.sum(g_out * out, axis=1, keepdims=True)) / norms
    gW = [None] * L
    gb = [None] * L
    gs = [np.zeros_like(s) for s in params.diffusion]
    for li in reversed(range(L)):
        a = cache["a"][li]
        if li < L - 1:
            ga = gh * _act_grad(params.nonlinearity, a, cache["h"][li + 1])
            if li < len(params.diffusion):
                Z, G = cache["z"][li], cache["g"][li]
                back = phi.T @ ga
                s = params.diffusion[li]
                gG = back * Z
                # dG/dt = -lambda exp(-lambda t)
                gt = np.sum(gG * (-evals[:, None]) * (G + 1.0), axis=0)
                gs[li] = 2.0 * s * gt
                ga = ga + P.T @ (G * back)
        else:
            ga = gh
        h_prev = cache["h"][li]
        gW[li] = h_prev.T @ ga
        gb[li] = ga.sum(axis=0)
        gh = ga @ params.weights[li].T
    return gW, gb, gs, gh


def adapter_forward(params, features, basis):
    """Descriptor field ``F_out`` (unit rows) for the input features on a shape."""
    X = check_features(features, n_rows=basis.n_vertices, n_cols=params.widths[0],
                       name="adapter input")
    return _forward(params, X, basis)[0]


# ---------------------------------------------------------------------------
# correspondences and functional maps

def _softmax_rows(S):
    S = S - S.max(axis=1, keepdims=True)
    E = np.exp(S)
    return E / E.sum(axis=1, keepdims=True)


def soft_correspondence(F_x, F_y, tau=0.07):
    """Row-stochastic ``(n_y, n_x)`` map: softmax over X of cosine similarity / tau."""
    F_x = check_features(F_x, name="F_x")
    F_y = check_features(F_y, n_cols=F_x.shape[1], name="F_y")
    if not tau > 0:
        raise ValueError("tau must be > 0")
    return _softmax_rows(row_normalize(F_y) @ row_normalize(F_x).T / tau)


def _ridge_solve(A, B, ridge):
    """``C = B A^T (A A^T + ridge I)^-1`` and the inverse Gram matrix."""
    G = A @ A.T + ridge * np.eye(A.shape[0])
    cond = np.linalg.cond(G)
    if not np.isfinite(cond) or cond > 1e12:
        raise SingularSystem(f"descriptor Gram matrix condition number {cond:.3e}")
    Ginv = np.linalg.inv(G)
    Ginv = 0.5 * (Ginv + Ginv.T)
    return B @ A.T @ Ginv, Ginv


def solve_fmap(F_x, F_y, basis_x, basis_y, ridge=1e-3):
    """Ridge least-squares ``C_xy`` aligning projected descriptors (``C_xy A ~ B``)."""
    F_x = check_features(F_x, n_rows=basis_x.n_vertices, name="F_x")
    F_y = check_features(F_y, n_rows=basis_y.n_vertices, n_cols=F_x.shape[1], name="F_y")
    A = basis_x.pinv @ F_x
    B = basis_y.pinv @ F_y
    return _ridge_solve(A, B, ridge)[0]


def _fm_terms(C_xy, C_yx, A, B, Q_yx, Q_xy):
    """Values and gradients of the data, regularity and coupling terms."""
    ky, kx = C_xy.shape
    D = A.shape[1]
    vals = {}
    grads = {}
    # data: descriptor preservation in both directions
    E1 = C_xy @ A - B
    E2 = C_yx @ B - A
    vals["data"] = np.sum(E1 ** 2) / (ky * D) + np.sum(E2 ** 2) / (kx * D)
    grads["data"] = {
        "C_xy": 2 * E1 @ A.T / (ky * D), "C_yx": 2 * E2 @ B.T / (kx * D),
        "A": 2 * C_xy.T @ E1 / (ky * D) - 2 * E2 / (kx * D),
        "B": 2 * C_yx.T @ E2 / (kx * D) - 2 * E1 / (ky * D),
    }
    # reg: bijectivity and orthogonality
    R1 = C_xy @ C_yx - np.eye(ky)
    R2 = C_yx @ C_xy - np.eye(kx)
    R3 = C_yx.T @ C_yx - np.eye(ky)
    R4 = C_xy.T @ C_xy - np.eye(kx)
    vals["reg"] = (np.sum(R1 ** 2) / ky ** 2 + np.sum(R2 ** 2) / kx ** 2
                   + np.sum(R3 ** 2) / ky ** 2 + np.sum(R4 ** 2) / kx ** 2)
    grads["reg"] = {
        "C_xy": 2 * R1 @ C_yx.T / ky ** 2 + 2 * C_yx.T @ R2 / kx ** 2 + 4 * C_xy @ R4 / kx ** 2,
        "C_yx": 2 * C_xy.T @ R1 / ky ** 2 + 2 * R2 @ C_xy.T / kx ** 2 + 4 * C_yx @ R3 / ky ** 2,
    }
    # couple: spectral maps agree with the soft spatial maps
    E3 = C_xy - Q_yx
    E4 = C_yx - Q_xy
    vals["couple"] = np.sum(E3 ** 2) / (kx * ky) + np.sum(E4 ** 2) / (kx * ky)
    grads["couple"] = {
        "C_xy": 2 * E3 / (kx * ky), "C_yx": 2 * E4 / (kx * ky),
        "Q_yx": -2 * E3 / (kx * ky), "Q_xy": -2 * E4 / (kx * ky),
    }
    return vals, grads


def fm_loss(C_xy, C_yx, Pi_xy, Pi_yx, basis_x, basis_y, A, B):
    """Data, regularity and coupling terms, each normalized by its element count.

    ``Pi_yx`` is the ``(n_y, n_x)`` soft map (rows over X), ``Pi_xy`` the reverse;
    ``A`` and ``B`` are the spectral coefficients of the descriptors on X and Y.
    """
    C_xy = np.asarray(C_xy, dtype=np.float64)
    C_yx = np.asarray(C_yx, dtype=np.float64)
    kx, ky = basis_x.k, basis_y.k
    if C_xy.shape != (ky, kx) or C_yx.shape != (kx, ky):
        raise DimensionMismatch(f"functional maps must be {(ky, kx)} and {(kx, ky)}")
    Pi_xy = np.asarray(Pi_xy, dtype=np.float64)
    Pi_yx = np.asarray(Pi_yx, dtype=np.float64)
    if Pi_yx.shape != (basis_y.n_vertices, basis_x.n_vertices) or Pi_xy.shape != Pi_yx.shape[::-1]:
        raise DimensionMismatch("soft map shapes do not match the bases")
    A = np.asarray(A, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    if A.shape[0] != kx or B.shape[0] != ky or A.shape[1] != B.shape[1]:
        raise DimensionMismatch("descriptor coefficients do not match the bases")
    Q_yx = basis_y.pinv @ Pi_yx @ basis_x.eigenfunctions
    Q_xy = basis_x.pinv @ Pi_xy @ basis_y.eigenfunctions
    vals, _ = _fm_terms(C_xy, C_yx, A, B, Q_yx, Q_xy)
    return vals


# ---------------------------------------------------------------------------
# graph-assisted contrastive loss

def sample_pairs(labels, n_pairs, rng):
    """``n_pairs`` within-region and ``n_pairs`` cross-region vertex pairs.

    Regions are drawn uniformly first, vertices uniformly inside them.
    Returns an ``(m, 2)`` integer array.
    """
    labels = np.asarray(labels)
    regions = [np.flatnonzero(labels == r) for r in np.unique(labels[labels >= 0])]
    if not regions:
        raise EmptyPairSet("no labelled vertices to sample from")
    out = []
    r = rng.integers(len(regions), size=n_pairs)
    for ri in r:
        out.append(rng.choice(regions[ri], size=2, replace=True))
    if len(regions) > 1:
        for _ in range(n_pairs):
            i, j = rng.choice(len(regions), size=2, replace=False)
            out.append([rng.choice(regions[i]), rng.choice(regions[j])])
    return np.asarray(out, dtype=np.int64).reshape(-1, 2)


def _gac(F, labels, margins, m_base, pairs):
    if len(pairs) == 0:
        raise EmptyPairSet("no vertex pairs to evaluate")
    u, v = pairs[:, 0], pairs[:, 1]
    diff = F[u] - F[v]
    dist = np.linalg.norm(diff, axis=1)
    lu, lv = labels[u], labels[v]
    same = lu == lv
    margin = m_base * margins[lu, lv]
    hinge = margin - dist
    per = np.where(same, dist, np.maximum(hinge, 0.0))
    # subgradient 0 at coincident features
    unit = np.where(dist[:, None] > 0, diff / np.where(dist > 0, dist, 1.0)[:, None], 0.0)
    coef = np.where(same, 1.0, np.where(hinge > 0, -1.0, 0.0)) / len(pairs)
    g = np.zeros_like(F)
    np.add.at(g, u, coef[:, None] * unit)
    np.add.at(g, v, -coef[:, None] * unit)
    return float(per.mean()), g


def gac_loss(F, labels, D_sem, m_base, pairs):
    """Mean graph-assisted contrastive loss over vertex pairs.

    Same region: ``||F_u - F_v||``. Different regions:
    ``relu(m_base * D_sem[l_u, l_v] - ||F_u - F_v||)``. Unreachable region pairs
    (``inf``) use the finite diameter of ``D_sem`` as their distance.
    """
    F = check_features(F, name="features")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape[0] != F.shape[0]:
        raise DimensionMismatch("one label per feature row required")
    if np.any(labels < 0):
        raise DimensionMismatch("labels must be complete")
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    return _gac(F, labels, _finite_margins(D_sem), m_base, pairs)[0]


def _finite_margins(D):
    D = np.array(D, dtype=np.float64)
    finite = D[np.isfinite(D)]
    D[~np.isfinite(D)] = finite.max() if finite.size else 0.0
    return D


# ---------------------------------------------------------------------------
# full pair objective

@dataclass
class ShapeData:
    """What the trainer needs from one shape."""

    features: np.ndarray
    basis: object
    labels: np.ndarray | None = None
    distances: np.ndarray | None = None

    def margins(self):
        return None if self.distances is None else _finite_margins(self.distances)


def pair_objective(params, sx, sy, config, pairs_x=None, pairs_y=None, grad=True):
    """Total loss on one shape pair and (optionally) its gradient w.r.t. the adapter.

    Returns ``(LossReport, grads)`` where ``grads`` is a list aligned with
    ``params.arrays()`` (``None`` when ``grad=False``).
    """
    cfg = config
    fx, cx = _forward(params, sx.features, sx.basis)
    fy, cy = _forward(params, sy.features, sy.basis)
    bx, by = sx.basis, sy.basis
    A = bx.pinv @ fx
    B = by.pinv @ fy
    C_xy, GAinv = _ridge_solve(A, B, cfg.ridge)
    C_yx, GBinv = _ridge_solve(B, A, cfg.ridge)
    Pi_yx = _softmax_rows(fy @ fx.T / cfg.tau)
    Pi_xy = _softmax_rows(fx @ fy.T / cfg.tau)
    Q_yx = by.pinv @ Pi_yx @ bx.eigenfunctions
    Q_xy = bx.pinv @ Pi_xy @ by.eigenfunctions
    vals, tgrads = _fm_terms(C_xy, C_yx, A, B, Q_yx, Q_xy)

    use_gac = cfg.lambda_gac > 0 and pairs_x is not None and sx.labels is not None
    gac = 0.0
    g_gac_x = g_gac_y = 0.0
    if use_gac:
        gx_val, g_gac_x = _gac(fx, sx.labels, sx.margins(), cfg.m_base, pairs_x)
        gy_val, g_gac_y = _gac(fy, sy.labels, sy.margins(), cfg.m_base, pairs_y)
        gac = 0.5 * (gx_val + gy_val)
        g_gac_x = 0.5 * g_gac_x
        g_gac_y = 0.5 * g_gac_y

    weights = {"lambda_reg": cfg.lambda_reg, "lambda_couple": cfg.lambda_couple,
               "lambda_gac": cfg.lambda_gac}
    total = total_loss(vals["data"], vals["reg"], vals["couple"], gac, **weights)
    report = LossReport(float(vals["data"]), float(vals["reg"]), float(vals["couple"]),
                        float(gac), float(total), weights)
    if not np.isfinite(total):
        raise DivergenceDetected(f"total loss is {total}")
    if not grad:
        return report, None

    scale = {"data": 1.0, "reg": cfg.lambda_reg, "couple": cfg.lambda_couple}
    acc = {k: 0.0 for k in ("C_xy", "C_yx", "A", "B", "Q_yx", "Q_xy")}
    for term, gd in tgrads.items():
        for key, val in gd.items():
            acc[key] = acc[key] + scale[term] * val
    gA, gB = acc["A"], acc["B"]
    # ridge solves: C_xy = B A^T GAinv and C_yx = A B^T GBinv
    for gC, left, right, Ginv, which in ((acc["C_xy"], B, A, GAinv, "xy"),
                                         (acc["C_yx"], A, B, GBinv, "yx")):
        if np.isscalar(gC):
            continue
        P = right.T @ Ginv
        g_left = gC @ P.T
        gP = left.T @ gC
        g_right = Ginv @ gP.T
        gGinv = right @ gP
        gG = -Ginv @ gGinv @ Ginv
        g_right = g_right + (gG + gG.T) @ right
        if which == "xy":
            gB = gB + g_left
            gA = gA + g_right
        else:
            gA = gA + g_left
            gB = gB + g_right
    g_fx = bx.pinv.T @ gA if not np.isscalar(gA) else np.zeros_like(fx)
    g_fy = by.pinv.T @ gB if not np.isscalar(gB) else np.zeros_like(fy)
    if not np.isscalar(acc["Q_yx"]):
        gPi_yx = by.pinv.T @ acc["Q_yx"] @ bx.eigenfunctions.T
        gS = Pi_yx * (gPi_yx - np.sum(gPi_yx * Pi_yx, axis=1, keepdims=True)) / cfg.tau
        g_fy = g_fy + gS @ fx
        g_fx = g_fx + gS.T @ fy
    if not np.isscalar(acc["Q_xy"]):
        gPi_xy = bx.pinv.T @ acc["Q_xy"] @ by.eigenfunctions.T
        gS = Pi_xy * (gPi_xy - np.sum(gPi_xy * Pi_xy, axis=1, keepdims=True)) / cfg.tau
        g_fx = g_fx + gS @ fy
        g_fy = g_fy + gS.T @ fx
    if use_gac:
        g_fx = g_fx + cfg.lambda_gac * g_gac_x
        g_fy = g_fy + cfg.lambda_gac * g_gac_y

    gWx, gbx, gsx, _ = _backward(params, bx, cx, g_fx)
    gWy, gby, gsy, _ = _backward(params, by, cy, g_fy)
    grads = ([a + b for a, b in zip(gWx, gWy)] + [a + b for a, b in zip(gbx, gby)]
             + [a + b for a, b in zip(gsx, gsy)])
    norm = float(np.sqrt(sum(np.sum(g ** 2) for g in grads)))
    if not np.isfinite(norm):
        raise NonFiniteGradient("gradient has non-finite entries")
    report.grad_norm = norm
    return report, grads


# ---------------------------------------------------------------------------
# training

class Adam:
    """Adaptive-moment gradient descent over a list of arrays."""

    def __init__(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, arrays, grads):
        if self.m is None:
            self.m = [np.zeros_like(a) for a in arrays]
            self.v = [np.zeros_like(a) for a in arrays]
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        out = []
        for i, (a, g) in enumerate(zip(arrays, grads)):
            self.m[i] = b1 * self.m[i] + (1 - b1) * g
            self.v[i] = b2 * self.v[i] + (1 - b2) * g * g
            mh = self.m[i] / (1 - b1 ** self.t)
            vh = self.v[i] / (1 - b2 ** self.t)
            out.append(a - self.lr * mh / (np.sqrt(vh) + self.eps))
        return out


def train_pair(sx, sy, config, params=None, widths=None, nonlinearity="relu", callback=None):
    """Fit the adapter on one shape pair.

    Every ``config.eval_every`` steps the total loss is evaluated on a fixed,
    seeded pair set; the parameters with the lowest evaluated loss are
    returned, so the returned loss never exceeds the initial one.

    Returns ``(params, history, evaluations)`` where ``history`` holds the
    per-step :class:`LossReport` and ``evaluations`` the ``(step, total)``
    checkpoints.
    """
    cfg = config
    if params is None:
        w = list(widths) if widths is not None else [sx.features.shape[1], 256, 256, 128]
        params = init_adapter(w, seed=cfg.seed, nonlinearity=nonlinearity)
    if params.widths[0] != sx.features.shape[1] or params.widths[0] != sy.features.shape[1]:
        raise DimensionMismatch("adapter input width does not match the features")
    rng = np.random.default_rng(cfg.seed)
    use_gac = cfg.lambda_gac > 0 and sx.labels is not None and sy.labels is not None

    def draw(generator):
        if not use_gac:
            return None, None
        return (sample_pairs(sx.labels, cfg.n_pairs, generator),
                sample_pairs(sy.labels, cfg.n_pairs, generator))

    eval_pairs = draw(np.random.default_rng(cfg.seed + 7919))

    def evaluate(p):
        return pair_objective(p, sx, sy, cfg, *eval_pairs, grad=False)[0].total

    best = params.copy()
    best_total = evaluate(params)
    evaluations = [(0, best_total)]
    history = []
    opt = Adam(lr=cfg.lr)
    arrays = params.arrays()
    for step in range(cfg.steps):
        px, py = draw(rng)
        report, grads = pair_objective(params, sx, sy, cfg, px, py, grad=True)
        history.append(report)
        if callback is not None:
            callback(step, report)
        arrays = opt.step(arrays, grads)
        params = params.with_arrays(arrays)
        if (step + 1) % max(cfg.eval_every, 1) == 0 or step + 1 == cfg.steps:
            total = evaluate(params)
            if not np.isfinite(total):
                raise DivergenceDetected(f"evaluated loss is {total} at step {step + 1}")
            evaluations.append((step + 1, total))
            if total < best_total:
                best, best_total = params.copy(), total
    logger.debug("training finished: best total %.6g", best_total)
    return best, history, evaluations


def clone_params(params):
    return copy.deepcopy(params)
