"""Truncated Laplace-Beltrami eigenbases and point map / functional map conversion.

Conventions
-----------
A point map ``pi`` from shape X (source) to shape Y (target) is stored
target-indexed: ``pi[j]`` is the source vertex matched to target vertex ``j``.
As a matrix it is the ``(n_y, n_x)`` selection matrix ``Pi_yx``.

The functional map ``C_xy`` carries spectral coefficients on X to coefficients
on Y and has shape ``(k_y, k_x)``: ``C_xy = Phi_y^+ Pi_yx Phi_x`` with the
mass-weighted pseudo-inverse ``Phi^+ = Phi^T M``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from ._validation import check_features, check_indices, check_vector
from .errors import ConvergenceFailure, DimensionMismatch, NotConnected
from .mesh import cotangent_stiffness, lumped_mass

DENSE_LIMIT = 600


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """First ``k`` eigenpairs of ``-W phi = lambda M phi`` with lumped ``M``."""

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        for name in ("eigenvalues", "eigenfunctions", "mass"):
            arr = np.array(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n, k = self.eigenfunctions.shape
        if self.eigenvalues.shape != (k,) or self.mass.shape != (n,):
            raise DimensionMismatch("inconsistent basis shapes")

    @property
    def k(self):
        return self.eigenvalues.shape[0]

    @property
    def n_vertices(self):
        return self.eigenfunctions.shape[0]

    @cached_property
    def pinv(self):
        """``Phi^T M`` of shape ``(k, n)``."""
        p = self.eigenfunctions.T * self.mass[None, :]
        p.setflags(write=False)
        return p

    def truncate(self, k):
        if k > self.k:
            raise DimensionMismatch(f"basis has {self.k} functions, asked for {k}")
        return SpectralBasis(self.eigenvalues[:k], self.eigenfunctions[:, :k], self.mass)

    def permuted(self, perm):
        """Basis of the vertex-relabelled mesh (new vertex ``i`` = old ``perm[i]``)."""
        perm = np.asarray(perm)
        return SpectralBasis(self.eigenvalues, self.eigenfunctions[perm], self.mass[perm])


def _fix_signs(phi):
    idx = np.argmax(np.abs(phi), axis=0)
    signs = np.sign(phi[idx, np.arange(phi.shape[1])])
    signs[signs == 0] = 1.0
    return phi * signs[None, :]


def compute_basis(mesh, k):
    """Solve ``-W phi = lambda M phi`` for the ``k`` smallest eigenpairs.

    The problem is symmetrized as ``M^-1/2 (-W) M^-1/2`` (valid because ``M``
    is diagonal). Meshes with at most ``DENSE_LIMIT`` vertices use a dense
    solver, larger ones shift-invert Lanczos. Each eigenfunction is signed so
    that its entry of largest magnitude is positive.
    """
    n = mesh.n_vertices
    k = int(k)
    if not 1 <= k <= n:
        raise DimensionMismatch(f"k must be in [1, {n}], got {k}")
    n_comp, _ = csgraph.connected_components(mesh.adjacency, directed=False)
    if n_comp != 1:
        raise NotConnected(f"mesh has {n_comp} connected components")
    L = -cotangent_stiffness(mesh)
    m = lumped_mass(mesh).diagonal()
    s = 1.0 / np.sqrt(m)
    S = sparse.diags(s) @ L @ sparse.diags(s)
    S = 0.5 * (S + S.T)
    if n <= DENSE_LIMIT or k >= n - 1:
        evals, psi = scipy.linalg.eigh(S.toarray(), subset_by_index=[0, k - 1])
    else:
        v0 = np.sqrt(m) / np.linalg.norm(np.sqrt(m))
        try:
            evals, psi = eigsh(S.tocsc(), k=k, sigma=-1e-8, which="LM", v0=v0, tol=0,
                               maxiter=max(2000, 20 * n))
        except ArpackNoConvergence as exc:
            raise ConvergenceFailure(f"Lanczos did not converge: {exc}") from exc
        order = np.argsort(evals)
        evals, psi = evals[order], psi[:, order]
    evals = np.clip(evals, 0.0, None)
    phi = _fix_signs(psi * s[:, None])
    return SpectralBasis(evals, phi, m)


def project(basis, f):
    """Spectral coefficients ``Phi^T M f`` of a per-vertex signal (or matrix)."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape[0] != basis.n_vertices:
        raise DimensionMismatch(f"signal has {f.shape[0]} entries, basis {basis.n_vertices}")
    return basis.pinv @ f


def reconstruct(basis, coefs):
    return basis.eigenfunctions @ np.asarray(coefs, dtype=np.float64)


def pointmap_matrix(pi, n_source):
    """Sparse ``(n_target, n_source)`` selection matrix of a hard point map."""
    pi = np.asarray(pi, dtype=np.int64)
    n_t = len(pi)
    return sparse.csr_matrix((np.ones(n_t), (np.arange(n_t), pi)), shape=(n_t, n_source))


def pointmap_to_fmap(pi, basis_src, basis_tgt):
    """``C = Phi_tgt^+ Pi Phi_src`` for a hard ``(n_tgt,)`` or soft ``(n_tgt, n_src)`` map."""
    pi = np.asarray(pi)
    if pi.ndim == 1:
        if pi.shape[0] != basis_tgt.n_vertices:
            raise DimensionMismatch("point map length must equal target vertex count")
        idx = check_indices(pi, basis_src.n_vertices, "point map")
        pulled = basis_src.eigenfunctions[idx]
    elif pi.ndim == 2:
        if pi.shape != (basis_tgt.n_vertices, basis_src.n_vertices):
            raise DimensionMismatch(f"soft map shape {pi.shape} does not match the bases")
        pulled = pi @ basis_src.eigenfunctions
    else:
        raise DimensionMismatch("point map must be 1-D (hard) or 2-D (soft)")
    return basis_tgt.pinv @ pulled


def nearest_rows(queries, points, chunk=256):
    """Index of the nearest row of ``points`` for each row of ``queries``.

    Euclidean distance, ties resolved to the smallest index.
    """
    queries = np.asarray(queries, dtype=np.float64)
    points = np.asarray(points, dtype=np.float64)
    if queries.shape[1] != points.shape[1]:
        raise DimensionMismatch("query and point dimensions differ")
    sq = np.einsum("ij,ij->i", points, points)
    out = np.empty(len(queries), dtype=np.int64)
    for start in range(0, len(queries), chunk):
        q = queries[start:start + chunk]
        d = sq[None, :] - 2.0 * (q @ points.T)
        out[start:start + chunk] = np.argmin(d, axis=1)
    return out


def fmap_to_pointmap(C, basis_src, basis_tgt):
    """Hard map by nearest-neighbour search of ``Phi_tgt C`` among rows of ``Phi_src``."""
    C = check_features(C, n_rows=basis_tgt.k, n_cols=basis_src.k, name="functional map")
    return nearest_rows(basis_tgt.eigenfunctions @ C, basis_src.eigenfunctions)
