"""Correlated multi-jammer signal model.

The jammers transmit zero-mean (optionally offset) complex Gaussian
samples whose pairwise correlation follows a deterministic schedule over
the global sample clock.  The default schedule ramps the correlation
linearly from 1.0 down to 0.8 over a 5000-sample period and repeats; a
strategy switch flips the ramp direction from a configurable sample
onward.  The schedule is evaluated per sample, so a covariance estimated
over any window sees the window-averaged correlation.

The virtual-change factor D quantifies the mismatch between the
covariance seen while estimating the nullspace and the covariance in
force during the data phase:

    D = V_d sqrt(S_d S_e^+) V_e^H

from the eigendecompositions Sigma = V S V^H of the two covariances.
Equal covariances give D = I; entries of D blow up as the estimation
correlation approaches +/-1 while the data correlation stays away.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NotPSDError, ScheduleError, ShapeError
from .linalg import Rng, eigh_desc, psd_factor, require_hermitian

# correlation magnitude used when factoring a schedule value of exactly 1
RHO_SAMPLING_CAP = 0.9999

SCHEDULE_KINDS = ("constant", "sawtooth-down", "sawtooth-up", "table")


@dataclass(frozen=True)
class CorrelationSchedule:
    """Deterministic pairwise-correlation trajectory rho(p).

    kind 'constant' holds rho_max forever.  The sawtooth kinds ramp
    linearly between rho_max and rho_min over ``period_samples`` and
    repeat.  From ``switch_sample`` (if set) the ramp direction flips,
    restarting its period at the switch.  kind 'table' cycles through an
    explicit per-sample list.
    """

    kind: str = "sawtooth-down"
    period_samples: int = 5000
    rho_max: float = 1.0
    rho_min: float = 0.8
    switch_sample: int | None = None
    table: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "table":
            if not self.table:
                raise ConfigError("table schedule needs a non-empty table")
            if any(abs(v) > 1.0 for v in self.table):
                raise ConfigError("table correlations must lie in [-1, 1]")
        else:
            if self.period_samples < 1:
                raise ConfigError("schedule period must be >= 1 sample")
            for v in (self.rho_max, self.rho_min):
                if abs(v) > 1.0:
                    raise ConfigError(f"correlation {v} outside [-1, 1]")


def rho_at(schedule: CorrelationSchedule, p) -> np.ndarray | float:
    """Correlation at sample index p (scalar or integer array)."""
    p = np.asarray(p)
    if np.any(p < 0):
        raise ConfigError("sample index must be nonnegative")
    if schedule.kind == "constant":
        out = np.full(p.shape, schedule.rho_max)
        return float(out) if out.ndim == 0 else out

    if schedule.kind == "table":
        tab = np.asarray(schedule.table)
        period = len(tab)
        fwd = tab[p % period]
        if schedule.switch_sample is None:
            out = fwd
        else:
            rev = tab[::-1][(p - schedule.switch_sample) % period]
            out = np.where(p >= schedule.switch_sample, rev, fwd)
        return float(out) if out.ndim == 0 else out

    span = schedule.rho_max - schedule.rho_min
    period = schedule.period_samples

    def ramp(idx, downward):
        frac = (idx % period) / period
        if downward:
            return schedule.rho_max - span * frac
        return schedule.rho_min + span * frac

    down = schedule.kind == "sawtooth-down"
    fwd = ramp(p, down)
    if schedule.switch_sample is None:
        out = fwd
    else:
        flipped = ramp(p - schedule.switch_sample, not down)
        out = np.where(p >= schedule.switch_sample, flipped, fwd)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class JammerModel:
    """Static jammer population: powers, mean offset, and the schedule."""

    variances: tuple[float, ...] = (1.0, 1.0)
    mean: tuple[complex, ...] | None = None
    schedule: CorrelationSchedule = field(default_factory=CorrelationSchedule)

    def __post_init__(self):
        if len(self.variances) < 1:
            raise ConfigError("need at least one jammer")
        if any(v < 0 for v in self.variances):
            raise ConfigError("jammer variances must be nonnegative")
        if self.mean is not None and len(self.mean) != len(self.variances):
            raise ConfigError("mean length must match jammer count")

    @property
    def n_jammers(self) -> int:
        return len(self.variances)

    def mean_vector(self) -> np.ndarray:
        if self.mean is None:
            return np.zeros(self.n_jammers, dtype=np.complex128)
        return np.asarray(self.mean, dtype=np.complex128)


def _sigma_from_rho(variances: np.ndarray, rho) -> np.ndarray:
    """Covariance stack for scalar or per-sample rho: all off-diagonal
    pairs share the schedule correlation."""
    sig = np.sqrt(variances)
    base = np.outer(sig, sig)
    rho = np.asarray(rho)
    n_j = len(variances)
    eye = np.eye(n_j, dtype=bool)
    if rho.ndim == 0:
        out = base * np.where(eye, 1.0, float(rho))
    else:
        shape = rho.shape + (n_j, n_j)
        out = np.broadcast_to(base, shape) * np.where(
            eye, 1.0, rho[..., None, None]
        )
    return out


def build_sigma_j(model: JammerModel, p: int) -> np.ndarray:
    """Jammer covariance Sigma_J at sample p, validated PSD."""
    sigma = _sigma_from_rho(np.asarray(model.variances, dtype=float), rho_at(model.schedule, p))
    w = np.linalg.eigvalsh(sigma)
    if w.size and w[0] < -1e-8 * max(float(w[-1]), 1e-300):
        raise ScheduleError(
            f"correlation set at p={p} gives a non-PSD covariance (min eig {w[0]:.3e})"
        )
    return sigma.astype(np.complex128)


def average_sigma_j(model: JammerModel, p_start: int, n: int, stride: int = 1) -> np.ndarray:
    """Mean of Sigma_J(p) over samples p_start, p_start+stride, ..."""
    if n < 1:
        raise ConfigError("need >= 1 sample in the averaging window")
    p = p_start + stride * np.arange(n)
    rho_bar = float(np.mean(rho_at(model.schedule, p)))
    return _sigma_from_rho(np.asarray(model.variances, dtype=float), rho_bar).astype(
        np.complex128
    )


def sample_jamming_block(
    rng: Rng, model: JammerModel, p_start: int, n: int, stride: int = 1
) -> np.ndarray:
    """Draw an (n_jammers, n) block of jammer samples.

    Column c is CN(mu, Sigma_J(p_start + stride*c)).  Correlation values
    are capped at +/-0.9999 before factoring so schedule values of
    exactly 1 stay factorable; columns are independent across samples.
    """
    if n < 1:
        raise ConfigError("need >= 1 sample in the block")
    variances = np.asarray(model.variances, dtype=float)
    p = p_start + stride * np.arange(n)
    rho = np.clip(np.asarray(rho_at(model.schedule, p), dtype=float), -RHO_SAMPLING_CAP, RHO_SAMPLING_CAP)
    sigmas = _sigma_from_rho(variances, rho)  # (n, nj, nj)
    try:
        factors = np.linalg.cholesky(sigmas)
    except np.linalg.LinAlgError:
        # zero-variance jammers or borderline PSD: fall back per sample
        factors = np.stack(
            [psd_factor(s.astype(np.complex128)) for s in sigmas], axis=0
        )
    n_j = model.n_jammers
    z = (rng.standard_normal((n, n_j)) + 1j * rng.standard_normal((n, n_j))) / np.sqrt(2.0)
    cols = np.einsum("nij,nj->ni", factors, z)
    return (model.mean_vector()[None, :] + cols).T


@dataclass(frozen=True)
class VirtualChange:
    """Virtual channel-change factor between two jamming covariances."""

    d: np.ndarray
    max_abs_entry: float


def virtual_change_factor(sigma_e: np.ndarray, sigma_d: np.ndarray) -> VirtualChange:
    """D = V_d sqrt(S_d S_e^+) V_e^H from the two eigendecompositions.

    Both inputs must be Hermitian PSD of equal size.  Zero estimation
    eigenvalues are pseudo-inverted (term dropped), mirroring the
    blow-up that a vanishing estimation-window eigenvalue causes.
    """
    sigma_e = require_hermitian(sigma_e, "estimation covariance")
    sigma_d = require_hermitian(sigma_d, "data covariance")
    if sigma_e.shape != sigma_d.shape:
        raise ShapeError(
            f"covariance shapes differ: {sigma_e.shape} vs {sigma_d.shape}"
        )
    s_e, v_e = eigh_desc(sigma_e)
    s_d, v_d = eigh_desc(sigma_d)
    for name, s in (("estimation", s_e), ("data", s_d)):
        if s[-1] < -1e-10 * max(float(s[0]), 1e-300):
            raise NotPSDError(f"{name} covariance has negative eigenvalue {s[-1]:.3e}")
    s_e = np.clip(s_e, 0.0, None)
    s_d = np.clip(s_d, 0.0, None)
    cutoff = 1e-14 * max(float(s_e[0]), 1e-300)
    inv_e = np.where(s_e > cutoff, 1.0 / np.where(s_e > 0, s_e, 1.0), 0.0)
    d = (v_d * np.sqrt(s_d * inv_e)) @ v_e.conj().T
    return VirtualChange(d=d, max_abs_entry=float(np.abs(d).max()))
