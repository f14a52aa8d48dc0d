"""Complex linear algebra kernel used by every other module.

Thin, contract-checked wrappers around numpy's LAPACK-backed routines.
All decompositions are made deterministic: a fixed phase convention is
applied to singular/eigen vectors so that repeated calls on identical
inputs (and identically seeded runs) are bit-for-bit reproducible.

Matrices are plain ``numpy.ndarray`` of dtype complex128 throughout; a
vector is a 1-D array.  Randomness always flows through an explicit
``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    IllConditionedError,
    NotPSDError,
    NumericInputError,
    ShapeError,
)

Rng = np.random.Generator

# Relative tolerance for Hermitian symmetry checks.
_HERM_RTOL = 1e-10


def make_rng(seed: int) -> Rng:
    """Return a PCG64 generator; identical seeds give identical streams."""
    return np.random.Generator(np.random.PCG64(seed))


def require_finite(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Raise NumericInputError if ``m`` contains NaN or Inf entries."""
    m = np.asarray(m)
    if not np.all(np.isfinite(m)):
        raise NumericInputError(f"{name} contains non-finite entries")
    return m


def require_matrix(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ShapeError(f"{name} must be a 2-D array, got shape {m.shape}")
    require_finite(m, name)
    return m


def fro_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, "fro"))


def is_hermitian(m: np.ndarray, rtol: float = _HERM_RTOL) -> bool:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = max(fro_norm(m), 1e-300)
    return fro_norm(m - m.conj().T) <= rtol * scale


def require_hermitian(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = require_matrix(m, name)
    if m.shape[0] != m.shape[1] or not is_hermitian(m):
        raise ShapeError(f"{name} must be square Hermitian")
    # fold residual asymmetry from accumulated float error
    return 0.5 * (m + m.conj().T)


def _fix_phases(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotate paired columns of (u, v) so the first non-negligible entry
    of each column of ``u`` is real nonnegative.  Leaves u @ diag(s) @ v^H
    unchanged and makes the decomposition deterministic."""
    u = u.copy()
    v = v.copy()
    for j in range(u.shape[1]):
        col = u[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12 * max(np.abs(col).max(), 1e-300))
        if nz.size == 0:
            continue
        pivot = col[nz[0]]
        phase = pivot / abs(pivot)
        u[:, j] *= phase.conj()
        v[:, j] *= phase.conj()
    return u, v


@dataclass
class SvdResult:
    """Reduced SVD ``m = U diag(S) V^H`` with S descending and real."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.conj().T


def svd(m: np.ndarray) -> SvdResult:
    """Singular value decomposition with a deterministic sign convention.

    Returns the reduced factorization: for an (r, c) input, ``u`` is
    (r, k), ``s`` is (k,) descending, ``v`` is (c, k), k = min(r, c).
    The first nonzero entry of each left singular vector is made real
    nonnegative (the paired right vector absorbs the phase).
    """
    m = require_matrix(m, "svd input")
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    u, v = _fix_phases(u, vh.conj().T)
    return SvdResult(u=u, s=s.astype(np.float64), v=v)


def eigh_desc(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian eigendecomposition, eigenvalues descending.

    Returns ``(w, V)`` with columns of V the eigenvectors, phase-fixed
    the same way as :func:`svd` so degenerate reruns stay deterministic.
    """
    m = require_hermitian(m, "eigh input")
    w, vec = np.linalg.eigh(m)
    w = w[::-1].copy()
    vec = vec[:, ::-1]
    vec, _ = _fix_phases(vec, vec)
    return w, vec


def psd_factor(m: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Return L with ``L @ L^H == m`` for Hermitian PSD ``m``.

    Eigenvalues in [-tol * max_eig, 0) are clamped to zero; anything
    more negative raises NotPSDError.  Non-Hermitian input raises
    ShapeError.
    """
    m = require_hermitian(m, "psd_factor input")
    w, vec = np.linalg.eigh(m)
    w_max = max(float(w[-1]), 0.0)
    floor = -tol * max(w_max, 1e-300)
    if np.any(w < floor):
        raise NotPSDError(f"eigenvalue {w.min():.3e} below PSD tolerance {floor:.3e}")
    w = np.clip(w, 0.0, None)
    return vec * np.sqrt(w)


def pinv(m: np.ndarray, rcond: float = 1e-10) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via the package SVD.

    Singular values at or below ``rcond * s_max`` are treated as zero;
    an all-zero matrix maps to the all-zero pseudo-inverse.
    """
    m = require_matrix(m, "pinv input")
    res = svd(m)
    s_max = res.s[0] if res.s.size else 0.0
    if s_max == 0.0:
        return np.zeros((m.shape[1], m.shape[0]), dtype=np.complex128)
    inv_s = np.where(res.s > rcond * s_max, 1.0 / np.where(res.s > 0, res.s, 1.0), 0.0)
    return (res.v * inv_s) @ res.u.conj().T


def cond(m: np.ndarray) -> float:
    """2-norm condition number; Inf when the smallest singular value is 0."""
    s = svd(m).s
    if s[-1] == 0.0:
        return float("inf")
    return float(s[0] / s[-1])


def solve_zf(h: np.ndarray, max_cond: float = 1e8) -> np.ndarray:
    """Left inverse (H^H H)^{-1} H^H of a tall full-rank matrix.

    Raises IllConditionedError when cond(h) exceeds ``max_cond``.
    """
    h = require_matrix(h, "equalizer channel")
    if h.shape[0] < h.shape[1]:
        raise ShapeError(f"need rows >= cols for a left inverse, got {h.shape}")
    res = svd(h)
    if res.s[-1] <= 0.0 or res.s[0] / res.s[-1] > max_cond:
        raise IllConditionedError(
            f"channel condition number {res.s[0] / max(res.s[-1], 1e-300):.3e} "
            f"exceeds {max_cond:.1e}"
        )
    return (res.v * (1.0 / res.s)) @ res.u.conj().T


def sample_complex_gaussian(
    rng: Rng, mean: np.ndarray, cov_factor: np.ndarray, n: int
) -> np.ndarray:
    """Draw ``n`` circularly-symmetric complex Gaussian column vectors.

    ``cov_factor`` is any L with L L^H equal to the desired covariance
    (see :func:`psd_factor`).  Returns a (dim, n) array whose columns
    are mean + L z, z ~ CN(0, I).
    """
    if n < 1:
        raise ShapeError(f"need n >= 1 draws, got {n}")
    mean = np.asarray(mean, dtype=np.complex128).reshape(-1)
    cov_factor = require_matrix(cov_factor, "cov_factor")
    dim = cov_factor.shape[0]
    if mean.shape[0] != dim:
        raise ShapeError(f"mean length {mean.shape[0]} != factor rows {dim}")
    z = (
        rng.standard_normal((cov_factor.shape[1], n))
        + 1j * rng.standard_normal((cov_factor.shape[1], n))
    ) / np.sqrt(2.0)
    return mean[:, None] + cov_factor @ z


def standard_complex_noise(rng: Rng, shape: tuple[int, ...], var: float) -> np.ndarray:
    """I.i.d. CN(0, var) array of the given shape."""
    scale = np.sqrt(var / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def random_semiunitary(rng: Rng, rows: int, cols: int) -> np.ndarray:
    """Haar-ish (rows, cols) matrix with orthonormal columns, rows >= cols."""
    if rows < cols:
        raise ShapeError(f"need rows >= cols, got ({rows}, {cols})")
    g = standard_complex_noise(rng, (rows, cols), 1.0)
    q, r = np.linalg.qr(g)
    # fix the QR phase ambiguity so the draw is a deterministic function
    # of the generator stream
    d = np.diagonal(r)
    phase = d / np.where(np.abs(d) > 0, np.abs(d), 1.0)
    return q * phase.conj()
