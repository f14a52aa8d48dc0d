"""Tests for the complex linear algebra kernel.

The SVD is cross-checked against an independent power-iteration
eigensolver (no LAPACK involved) so the two routes never share code.
"""

import numpy as np
import pytest

from jamnull import linalg
from jamnull.errors import (
    IllConditionedError,
    NotPSDError,
    NumericInputError,
    ShapeError,
)


def random_complex(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def power_iteration_eigs(a, n_eigs, iters=8000):
    """Dominant eigenpairs of a Hermitian PSD matrix by power iteration
    with deflation.  Deliberately naive: the oracle for the SVD tests."""
    a = a.copy()
    vals, vecs = [], []
    v0 = np.ones(a.shape[0], dtype=complex)
    for _ in range(n_eigs):
        v = v0 / np.linalg.norm(v0)
        for _ in range(iters):
            w = a @ v
            nw = np.linalg.norm(w)
            if nw == 0.0:
                break
            v = w / nw
        lam = float(np.real(v.conj() @ a @ v))
        vals.append(lam)
        vecs.append(v)
        a = a - lam * np.outer(v, v.conj())
    return np.array(vals), np.column_stack(vecs)


class TestSvd:
    def test_identity(self):
        res = linalg.svd(np.eye(3, dtype=complex))
        np.testing.assert_allclose(res.u, np.eye(3), atol=1e-12)
        np.testing.assert_allclose(res.s, np.ones(3), atol=1e-12)
        np.testing.assert_allclose(res.v, np.eye(3), atol=1e-12)

    def test_reconstruction_random_sizes(self):
        rng = np.random.default_rng(7)
        for rows, cols in [(4, 4), (8, 3), (3, 8), (12, 12), (32, 32)]:
            m = random_complex(rng, rows, cols)
            res = linalg.svd(m)
            assert np.max(np.abs(res.reconstruct() - m)) < 1e-10
            k = min(rows, cols)
            np.testing.assert_allclose(res.u.conj().T @ res.u, np.eye(k), atol=1e-10)
            np.testing.assert_allclose(res.v.conj().T @ res.v, np.eye(k), atol=1e-10)
            assert np.all(np.diff(res.s) <= 1e-12)
            assert np.all(res.s >= 0)

    def test_sign_convention(self):
        rng = np.random.default_rng(3)
        m = random_complex(rng, 6, 6)
        res = linalg.svd(m)
        for j in range(6):
            col = res.u[:, j]
            nz = np.flatnonzero(np.abs(col) > 1e-12)
            pivot = col[nz[0]]
            assert abs(pivot.imag) < 1e-12
            assert pivot.real >= 0

    def test_matches_power_iteration_oracle(self):
        # Singular values of m equal sqrt eigenvalues of m^H m; the oracle
        # computes the latter without any shared code path.
        rng = np.random.default_rng(11)
        m = random_complex(rng, 8, 5)
        res = linalg.svd(m)
        gram = m.conj().T @ m
        vals, _ = power_iteration_eigs(gram, 5)
        np.testing.assert_allclose(res.s, np.sqrt(np.abs(vals)), rtol=1e-7)

    def test_rejects_non_finite(self):
        m = np.eye(3, dtype=complex)
        m[1, 1] = np.nan
        with pytest.raises(NumericInputError):
            linalg.svd(m)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        m = random_complex(rng, 7, 7)
        a = linalg.svd(m)
        b = linalg.svd(m.copy())
        assert np.array_equal(a.u, b.u)
        assert np.array_equal(a.s, b.s)
        assert np.array_equal(a.v, b.v)


class TestPsdFactor:
    def test_identity(self):
        L = linalg.psd_factor(np.eye(4, dtype=complex))
        np.testing.assert_allclose(L, np.eye(4), atol=1e-12)

    def test_random_psd_roundtrip(self):
        rng = np.random.default_rng(13)
        for dim in (2, 3, 8):
            b = random_complex(rng, dim, dim)
            m = b @ b.conj().T
            L = linalg.psd_factor(m)
            np.testing.assert_allclose(L @ L.conj().T, m, atol=1e-10 * np.abs(m).max())

    def test_clamps_tiny_negative(self):
        m = np.diag([1.0, -1e-14]).astype(complex)
        L = linalg.psd_factor(m)
        assert np.all(np.isfinite(L))

    def test_rejects_negative(self):
        with pytest.raises(NotPSDError):
            linalg.psd_factor(np.diag([1.0, -0.5]).astype(complex))

    def test_rejects_non_hermitian(self):
        m = np.array([[1.0, 2.0], [0.0, 1.0]], dtype=complex)
        with pytest.raises(ShapeError):
            linalg.psd_factor(m)

    def test_zero_matrix(self):
        L = linalg.psd_factor(np.zeros((3, 3), dtype=complex))
        np.testing.assert_allclose(L, 0.0)


class TestPinv:
    def test_moore_penrose_identities(self):
        rng = np.random.default_rng(17)
        m = random_complex(rng, 8, 8)
        p = linalg.pinv(m)
        np.testing.assert_allclose(m @ p @ m, m, atol=1e-8)
        np.testing.assert_allclose(p @ m @ p, p, atol=1e-8)
        np.testing.assert_allclose((m @ p).conj().T, m @ p, atol=1e-8)
        np.testing.assert_allclose((p @ m).conj().T, p @ m, atol=1e-8)

    def test_tall_full_rank_equals_left_inverse(self):
        rng = np.random.default_rng(19)
        m = random_complex(rng, 8, 3)
        p = linalg.pinv(m)
        np.testing.assert_allclose(p @ m, np.eye(3), atol=1e-10)
        direct = np.linalg.solve(m.conj().T @ m, m.conj().T)
        np.testing.assert_allclose(p, direct, atol=1e-9)

    def test_zero_matrix(self):
        p = linalg.pinv(np.zeros((4, 2), dtype=complex))
        assert p.shape == (2, 4)
        np.testing.assert_allclose(p, 0.0)

    def test_rank_deficient(self):
        v = np.array([[1.0], [1.0]], dtype=complex)
        m = v @ v.conj().T  # rank 1
        p = linalg.pinv(m)
        np.testing.assert_allclose(m @ p @ m, m, atol=1e-10)


class TestSolveZf:
    def test_left_inverse(self):
        rng = np.random.default_rng(23)
        h = random_complex(rng, 6, 3)
        a = linalg.solve_zf(h)
        np.testing.assert_allclose(a @ h, np.eye(3), atol=1e-8)

    def test_ill_conditioned_raises(self):
        h = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-12], [0.0, 0.0]], dtype=complex)
        with pytest.raises(IllConditionedError):
            linalg.solve_zf(h)


class TestComplexGaussian:
    def test_moments(self):
        rng = linalg.make_rng(29)
        cov = np.array([[2.0, 0.5], [0.5, 1.0]], dtype=complex)
        L = linalg.psd_factor(cov)
        draws = linalg.sample_complex_gaussian(rng, np.zeros(2), L, 200_000)
        emp = draws @ draws.conj().T / draws.shape[1]
        np.testing.assert_allclose(emp, cov, atol=0.02)

    def test_mean_offset(self):
        rng = linalg.make_rng(31)
        mean = np.array([1.0 + 1j, -2.0])
        draws = linalg.sample_complex_gaussian(rng, mean, np.eye(2, dtype=complex), 50_000)
        np.testing.assert_allclose(draws.mean(axis=1), mean, atol=0.02)

    def test_seeded_reproducibility(self):
        a = linalg.sample_complex_gaussian(
            linalg.make_rng(4), np.zeros(3), np.eye(3, dtype=complex), 10
        )
        b = linalg.sample_complex_gaussian(
            linalg.make_rng(4), np.zeros(3), np.eye(3, dtype=complex), 10
        )
        assert np.array_equal(a, b)


class TestEighDesc:
    def test_descending_and_reconstructs(self):
        rng = np.random.default_rng(37)
        b = random_complex(rng, 6, 6)
        m = b @ b.conj().T
        w, v = linalg.eigh_desc(m)
        assert np.all(np.diff(w) <= 1e-10)
        np.testing.assert_allclose((v * w) @ v.conj().T, m, atol=1e-9)
