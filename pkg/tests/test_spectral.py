import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semcorr import shapes, spectral
from semcorr.errors import DimensionMismatch, NotConnected
from semcorr.mesh import TriangleMesh
from semcorr.spectral import (compute_basis, fmap_to_pointmap, nearest_rows, pointmap_to_fmap,
                              project, reconstruct)

SPHERE = np.array([0, 2, 2, 2, 6, 6, 6, 6, 6, 12], dtype=float)


def check_invariants(b):
    assert b.eigenvalues[0] < 1e-8
    assert np.all(np.diff(b.eigenvalues) >= -1e-12)
    gram = b.pinv @ b.eigenfunctions
    assert np.abs(gram - np.eye(b.k)).max() < 1e-6
    phi0 = b.eigenfunctions[:, 0]
    assert np.ptp(phi0) < 1e-5


class TestBasis:
    def test_sphere_spectrum(self, ico3):
        t = time.perf_counter()
        b = compute_basis(ico3, 10)
        assert time.perf_counter() - t < 10
        check_invariants(b)
        assert abs(b.eigenvalues[0]) < 1e-8
        assert np.all(np.abs(b.eigenvalues[1:] / SPHERE[1:] - 1) < 0.03)

    def test_k1_constant(self, ico2):
        b = compute_basis(ico2, 1)
        assert abs(b.eigenvalues[0]) < 1e-8
        assert np.allclose(b.eigenfunctions[:, 0], 1 / np.sqrt(b.mass.sum()), atol=1e-8)

    def test_flat_square_two_triangulations(self):
        exact = np.pi ** 2 * np.array([0, 1, 1, 2, 4, 4])
        vals = []
        for pattern in ("uniform", "alternating"):
            b = compute_basis(shapes.square_grid(24, pattern), 6)
            check_invariants(b)
            assert np.all(np.abs(b.eigenvalues[1:] / exact[1:] - 1) < 0.05)
            vals.append(b.eigenvalues)
        assert np.all(np.abs(vals[0][1:] / vals[1][1:] - 1) < 0.05)

    def test_sparse_path_matches_dense(self, ico3, monkeypatch):
        sparse_b = compute_basis(ico3, 12)  # above the dense limit
        check_invariants(sparse_b)
        monkeypatch.setattr(spectral, "DENSE_LIMIT", 10_000)
        dense_b = compute_basis(ico3, 12)
        assert np.abs(sparse_b.eigenvalues - dense_b.eigenvalues).max() < 1e-8

    def test_extending_k_reproduces_prefix(self, uv500):
        a = compute_basis(uv500, 10)
        b = compute_basis(uv500, 16)
        assert np.abs(a.eigenvalues - b.eigenvalues[:10]).max() < 1e-8

    def test_sign_convention(self, uv500):
        b = compute_basis(uv500, 12)
        phi = b.eigenfunctions
        idx = np.argmax(np.abs(phi), axis=0)
        assert np.all(phi[idx, np.arange(b.k)] > 0)

    def test_disconnected(self):
        t = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float)
        m = TriangleMesh(np.vstack([t, t + 3]), np.array([[0, 1, 2], [3, 4, 5]]))
        with pytest.raises(NotConnected):
            compute_basis(m, 2)

    def test_k_too_large(self, sphere40):
        with pytest.raises(DimensionMismatch):
            compute_basis(sphere40, 41)


class TestProjection:
    def test_eigenfunction_projects_to_unit_vector(self, uv500):
        b = compute_basis(uv500, 8)
        c = project(b, b.eigenfunctions[:, 3])
        assert np.allclose(c, np.eye(8)[3], atol=1e-6)
        assert np.allclose(project(b, np.zeros(b.n_vertices)), 0.0)

    def test_full_basis_completeness(self):
        m = shapes.random_sphere_mesh(20, seed=2)
        b = compute_basis(m, 20)
        f = np.random.default_rng(0).normal(size=20)
        assert np.allclose(reconstruct(b, project(b, f)), f, atol=1e-6)

    def test_wrong_length(self, sphere40):
        b = compute_basis(sphere40, 5)
        with pytest.raises(DimensionMismatch):
            project(b, np.zeros(3))

    def test_projection_identity_on_span(self, uv500):
        b = compute_basis(uv500, 10)
        c = np.random.default_rng(3).normal(size=10)
        assert np.allclose(project(b, reconstruct(b, c)), c, atol=1e-6)


class TestConversions:
    def test_identity_map(self, uv500):
        b = compute_basis(uv500, 20)
        C = pointmap_to_fmap(np.arange(uv500.n_vertices), b, b)
        assert np.abs(C - np.eye(20)).max() < 1e-6
        assert np.array_equal(fmap_to_pointmap(np.eye(20), b, b), np.arange(uv500.n_vertices))

    def test_constant_to_constant(self):
        a = shapes.icosphere(2)
        big = a.with_vertices(a.vertices * 2.0)
        ba, bb = compute_basis(a, 4), compute_basis(big, 4)
        C = pointmap_to_fmap(np.arange(a.n_vertices), ba, bb)
        ratio = ba.eigenfunctions[0, 0] / bb.eigenfunctions[0, 0]
        assert np.isclose(C[0, 0], ratio, rtol=1e-10)

    def test_rotated_copy_near_orthogonal(self, uv500):
        rng = np.random.default_rng(1)
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        perm = rng.permutation(uv500.n_vertices)
        rot = uv500.with_vertices(uv500.vertices @ q.T).permuted(perm)
        bx = compute_basis(uv500, 20)
        by = compute_basis(rot, 20)
        C = pointmap_to_fmap(perm, bx, by)
        assert np.abs(C.T @ C - np.eye(20)).max() < 0.05

    def test_permuted_target_basis(self, uv500):
        b = compute_basis(uv500, 20)
        perm = np.random.default_rng(5).permutation(uv500.n_vertices)
        assert np.array_equal(fmap_to_pointmap(np.eye(20), b, b.permuted(perm)), perm)

    def test_random_C_matches_bruteforce(self):
        mx = shapes.random_sphere_mesh(30, seed=1)
        my = shapes.random_sphere_mesh(30, seed=2)
        bx, by = compute_basis(mx, 6), compute_basis(my, 6)
        C = np.random.default_rng(0).normal(size=(6, 6))
        q = by.eigenfunctions @ C
        oracle = [int(np.argmin([np.sum((q[j] - bx.eigenfunctions[i]) ** 2) for i in range(30)]))
                  for j in range(30)]
        assert fmap_to_pointmap(C, bx, by).tolist() == oracle

    def test_round_trip(self, uv500):
        b = compute_basis(uv500, 60)
        perm = np.random.default_rng(7).permutation(uv500.n_vertices)
        by = b.permuted(perm)
        C = pointmap_to_fmap(perm, b, by)
        back = fmap_to_pointmap(C, b, by)
        assert np.mean(back == perm) >= 0.95

    def test_soft_map_equals_hard(self, sphere40):
        b = compute_basis(sphere40, 6)
        pi = np.random.default_rng(0).integers(40, size=40)
        P = np.zeros((40, 40))
        P[np.arange(40), pi] = 1
        assert np.allclose(pointmap_to_fmap(P, b, b), pointmap_to_fmap(pi, b, b))

    def test_shape_errors(self, sphere40):
        b = compute_basis(sphere40, 6)
        with pytest.raises(DimensionMismatch):
            pointmap_to_fmap(np.arange(10), b, b)
        with pytest.raises(DimensionMismatch):
            fmap_to_pointmap(np.eye(5), b, b)

    def test_nearest_rows_ties(self):
        pts = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
        assert nearest_rows(np.array([[1.0, 0.0], [0.5, 0.5]]), pts).tolist() == [0, 0]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 40), st.integers(1, 40), st.integers(1, 5), st.integers(0, 10_000))
    def test_nearest_rows_oracle(self, nq, npts, d, seed):
        rng = np.random.default_rng(seed)
        q = rng.integers(-3, 4, size=(nq, d)).astype(float)
        p = rng.integers(-3, 4, size=(npts, d)).astype(float)
        d2 = ((q[:, None, :] - p[None, :, :]) ** 2).sum(-1)
        assert nearest_rows(q, p, chunk=7).tolist() == np.argmin(d2, axis=1).tolist()
