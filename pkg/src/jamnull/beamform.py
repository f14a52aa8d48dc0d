"""Receive nullspace beamforming, zero-forcing equalization, and the
closed-form spectral-efficiency bounds.

The receiver estimates the jammers' spatial subspace from a silent
window: the sample covariance R of the received block has its weakest
(n_rx - n_jammers) left singular directions orthogonal to the jamming,
and stacking them as rows gives the beamformer F.  Applying F removes
the jamming subspace (up to estimation error), after which a standard
ZF equalizer recovers the per-stream symbols.

Closed forms for the post-equalization SINR follow from the mean of the
inverse Wishart matrix (H^H H)^{-1}: without receive beamforming an
(n_rx, M) i.i.d. CN(0, 1/eta) channel gives eta/(n_rx - M) per stream,
and projecting out n_j jamming dimensions first replaces n_rx by
n_rx - n_j.  The three spectral-efficiency references are

    c_lb  = log2(1 + P (N - NJ - M) / (eta (s_w + s_jam)))
    c_ub  = log2(1 + P (N - NJ - M) / (eta s_w))
    c_wbf = log2(1 + P (N - M)      / (eta (s_w + s_jam)))

where s_jam is the received jamming power per antenna, i.e. the jammer
transmit variances divided by their own link path losses.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericInputError, ShapeError
from .linalg import (
    eigh_desc,
    require_finite,
    require_matrix,
    solve_zf,
)

SINR_CAP_DB = 80.0
SINR_CAP_LINEAR = 10.0 ** (SINR_CAP_DB / 10.0)

# 16-QAM with unit average symbol energy
_QAM_LEVELS = np.array([-3.0, -1.0, 1.0, 3.0]) / np.sqrt(10.0)
QAM16 = (_QAM_LEVELS[:, None] + 1j * _QAM_LEVELS[None, :]).ravel()


def qam16_symbols(rng, shape) -> np.ndarray:
    """Uniform i.i.d. draw from the unit-energy 16-QAM alphabet."""
    return QAM16[rng.integers(0, 16, size=shape)]


def qam16_nearest(x: np.ndarray) -> np.ndarray:
    """Map each entry to the nearest 16-QAM constellation point."""

    def snap(v):
        idx = np.clip(
            np.round((v * np.sqrt(10.0) + 3.0) / 2.0).astype(int), 0, 3
        )
        return _QAM_LEVELS[idx]

    return snap(np.real(x)) + 1j * snap(np.imag(x))


def sample_covariance(y: np.ndarray, n: int) -> np.ndarray:
    """R = Y Y^H / n over an (n_rx, n) block of received samples."""
    y = require_matrix(y, "received block")
    if n < 1:
        raise NumericInputError(f"need >= 1 sample, got {n}")
    if y.shape[1] != n:
        raise ShapeError(f"block has {y.shape[1]} columns, expected {n}")
    r = y @ y.conj().T / n
    return 0.5 * (r + r.conj().T)


@dataclass
class NullspaceEstimate:
    """Estimated jamming-free receive subspace for one UE."""

    g_hat: np.ndarray           # (n_rx - n_jammers, n_rx), orthonormal rows
    singular_values: np.ndarray  # all n_rx values, descending
    n_samples_used: int = 0


def estimate_nullspace(
    r: np.ndarray, n_jammers: int, n_samples: int = 0
) -> NullspaceEstimate:
    """Weakest-subspace beamformer from a sample covariance.

    Keeps the (n_rx - n_jammers) weakest singular directions of R; their
    conjugate transposes form the rows of g_hat, so g_hat @ z vanishes
    for any z inside the estimated jamming subspace.
    """
    r = require_matrix(r, "sample covariance")
    n_rx = r.shape[0]
    if r.shape[1] != n_rx:
        raise ShapeError("sample covariance must be square")
    if not 0 <= n_jammers < n_rx:
        raise ConfigError(
            f"n_jammers must lie in [0, {n_rx - 1}], got {n_jammers}"
        )
    w, v = eigh_desc(r)
    weak = v[:, n_jammers:]
    return NullspaceEstimate(
        g_hat=weak.conj().T,
        singular_values=np.clip(w, 0.0, None),
        n_samples_used=n_samples,
    )


def zf_equalizer(h_tilde: np.ndarray, max_cond: float = 1e8) -> np.ndarray:
    """Zero-forcing equalizer A = (H^H H)^{-1} H^H for the equivalent
    beamformed channel.  Raises IllConditionedError past ``max_cond``."""
    return solve_zf(h_tilde, max_cond=max_cond)


def estimate_sinr_db(ideal: np.ndarray, actual: np.ndarray) -> float:
    """Constellation-referenced SINR estimate in dB.

    10 log10( sum |ideal|^2 / sum |actual - ideal|^2 ), capped at +80 dB
    when the error energy underflows (and clamped at -80 dB, a guard the
    caller never reaches with sane powers).
    """
    ideal = np.asarray(ideal).ravel()
    actual = np.asarray(actual).ravel()
    if ideal.size == 0 or ideal.size != actual.size:
        raise ShapeError("ideal and actual symbol blocks must match and be non-empty")
    require_finite(ideal, "ideal symbols")
    require_finite(actual, "actual symbols")
    num = float(np.sum(np.abs(ideal) ** 2))
    den = float(np.sum(np.abs(actual - ideal) ** 2))
    if num <= 0.0:
        raise NumericInputError("ideal symbol block has zero energy")
    if den <= num * 1e-8:
        return SINR_CAP_DB
    return float(np.clip(10.0 * np.log10(num / den), -SINR_CAP_DB, SINR_CAP_DB))


@dataclass(frozen=True)
class LinkBudget:
    """Everything the closed-form bounds need, in linear units."""

    p_t: float                       # BS transmit power per stream symbol, W
    noise_var: float                 # receiver noise power, W
    eta_ue: float                    # BS->UE path loss, linear >= 1-ish
    eta_jammer_ue: tuple[float, ...]  # per-jammer jammer->UE path losses
    jammer_var: tuple[float, ...]    # per-jammer transmit variances, W
    n_rx: int = 8
    n_streams: int = 3

    def __post_init__(self):
        if self.p_t <= 0 or self.noise_var <= 0 or self.eta_ue <= 0:
            raise ConfigError("powers and path losses must be positive")
        if len(self.eta_jammer_ue) != len(self.jammer_var):
            raise ConfigError("per-jammer loss and variance lists must match")
        if any(e <= 0 for e in self.eta_jammer_ue):
            raise ConfigError("jammer path losses must be positive")
        if any(v < 0 for v in self.jammer_var):
            raise ConfigError("jammer variances must be nonnegative")
        if self.n_rx - self.n_jammers - self.n_streams < 1:
            raise ConfigError(
                "need n_rx - n_jammers - n_streams >= 1 for ZF after nulling"
            )

    @property
    def n_jammers(self) -> int:
        return len(self.eta_jammer_ue)

    @property
    def jam_rx_power(self) -> float:
        """Total received jamming power per antenna, W."""
        return float(
            sum(v / e for v, e in zip(self.jammer_var, self.eta_jammer_ue))
        )


@dataclass(frozen=True)
class SpectralBounds:
    c_lb: float
    c_ub: float
    c_wbf: float


def spectral_bounds(budget: LinkBudget) -> SpectralBounds:
    """Evaluate the three closed-form per-stream spectral efficiencies."""
    n, nj, m = budget.n_rx, budget.n_jammers, budget.n_streams
    sig = budget.noise_var
    jam = budget.jam_rx_power
    rx = budget.p_t / budget.eta_ue
    c_lb = np.log2(1.0 + rx * (n - nj - m) / (sig + jam))
    c_ub = np.log2(1.0 + rx * (n - nj - m) / sig)
    c_wbf = np.log2(1.0 + rx * (n - m) / (sig + jam))
    return SpectralBounds(float(c_lb), float(c_ub), float(c_wbf))


@dataclass
class EqualizedFrame:
    """Output of beamforming + equalization over one data block."""

    symbols: np.ndarray        # (n_streams, n_sym) equalized, unit scale
    decisions: np.ndarray      # (n_streams, n_sym) nearest QAM points
    sinr_est_db: np.ndarray    # (n_streams,) reference-symbol estimates
    sinr_dd_db: np.ndarray     # (n_streams,) decision-directed estimates
    residual_jam_power: float  # mean ||F z||^2 over the block, W


def apply_beamforming_and_equalize(
    y: np.ndarray,
    f_hat: np.ndarray,
    h_tilde: np.ndarray,
    tx_symbols: np.ndarray,
    p_t: float,
    jam_component: np.ndarray | None = None,
    max_cond: float = 1e8,
) -> EqualizedFrame:
    """Run one data block through F, then ZF, then SINR estimation.

    ``y`` is the raw (n_rx, n_sym) received block, ``jam_component`` the
    jamming-only part of it when the caller wants the residual tracked.
    Estimated SINRs come in two flavors: referenced to the true
    transmitted symbols, and decision-directed (referenced to the
    nearest constellation point, all a real receiver can do).
    """
    y = require_matrix(y, "received block")
    f_hat = require_matrix(f_hat, "beamformer")
    h_tilde = require_matrix(h_tilde, "equivalent channel")
    tx_symbols = require_matrix(tx_symbols, "transmitted symbols")
    if p_t <= 0:
        raise ConfigError("transmit power must be positive")
    n_rx, n_sym = y.shape
    if f_hat.shape[1] != n_rx:
        raise ShapeError("beamformer width must match receive antennas")
    if h_tilde.shape[0] != f_hat.shape[0]:
        raise ShapeError("equivalent channel rows must match beamformer rows")
    m = h_tilde.shape[1]
    if tx_symbols.shape != (m, n_sym):
        raise ShapeError("transmitted symbol block shape mismatch")

    a = zf_equalizer(h_tilde, max_cond=max_cond)
    s = (a @ (f_hat @ y)) / np.sqrt(p_t)
    decisions = qam16_nearest(s)
    sinr_ref = np.array(
        [estimate_sinr_db(tx_symbols[i], s[i]) for i in range(m)]
    )
    sinr_dd = np.array(
        [estimate_sinr_db(decisions[i], s[i]) for i in range(m)]
    )
    residual = 0.0
    if jam_component is not None:
        jam_component = require_matrix(jam_component, "jamming component")
        if jam_component.shape != y.shape:
            raise ShapeError("jamming component must match the received block")
        residual = float(np.mean(np.abs(f_hat @ jam_component) ** 2) * f_hat.shape[0])
    return EqualizedFrame(
        symbols=s,
        decisions=decisions,
        sinr_est_db=sinr_ref,
        sinr_dd_db=sinr_dd,
        residual_jam_power=residual,
    )


def stream_sinrs_true(
    a_zf: np.ndarray,
    f_hat: np.ndarray,
    z: np.ndarray,
    sigma_j: np.ndarray,
    noise_var: float,
    p_t: float,
) -> np.ndarray:
    """Exact per-stream SINRs given the frame's matrices.

    Conditional on the channel draw, the post-equalization error of
    stream m has variance [B (Z Sigma_J Z^H + s_w I) B^H]_mm with
    B = A F, so the true SINR is p_t over that.  Capped at +80 dB.
    """
    b = a_zf @ f_hat
    cov = z @ sigma_j @ z.conj().T + noise_var * np.eye(z.shape[0])
    denom = np.real(np.einsum("ij,jk,ik->i", b, cov, b.conj()))
    denom = np.maximum(denom, p_t / SINR_CAP_LINEAR)
    return p_t / denom
