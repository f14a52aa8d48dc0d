"""Physical channel models: ULA steering, COST 231 Hata path loss, and
multipath Rayleigh fading with sum-of-sinusoids Doppler evolution.

A channel between two terminals is a superposition of discrete paths,

    H(t) = eta^{-1/2} * sum_p alpha_p(t) a_rx(phi_p^a) a_tx(phi_p^d)^T,

with per-path gains alpha_p of variance 1/n_paths so each entry of H has
variance 1/eta.  Time evolution replaces the static gains with
sum-of-sinusoids processes: each path gain is an equal-power sum of 16
complex sinusoids at Doppler shifts F_d*cos(psi) with random psi and
phases, which reproduces the Jakes/Bessel autocorrelation in expectation
and makes evolution a pure function of the integer sample clock.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError, NumericInputError
from .linalg import Rng

N_SINUSOIDS = 16


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: element count and spacing in wavelengths."""

    n_elements: int
    spacing_wavelengths: float = 0.5

    def __post_init__(self):
        if self.n_elements < 1:
            raise ConfigError(f"array needs >= 1 element, got {self.n_elements}")
        if self.spacing_wavelengths <= 0:
            raise ConfigError("element spacing must be positive")


@dataclass(frozen=True)
class LinkGeometry:
    """Terminal heights, separation and carrier for one propagation link."""

    freq_mhz: float
    h_base_m: float
    h_mobile_m: float
    distance_m: float
    environment: str = "suburban"


def steering_vector(angle_rad: float, geom: ArrayGeometry) -> np.ndarray:
    """ULA response a(phi), element i = exp(-j 2 pi (d/lambda) i sin phi).

    The first element is exactly 1 by construction.
    """
    if not np.isfinite(angle_rad):
        raise NumericInputError("steering angle is not finite")
    i = np.arange(geom.n_elements)
    return np.exp(-2j * np.pi * geom.spacing_wavelengths * i * np.sin(angle_rad))


def cost231_pathloss_db(link: LinkGeometry) -> float:
    """COST 231 Hata path loss in dB.

    Uses the Okumura-Hata closed form below 1500 MHz and the COST 231
    extension above it, with small/medium-city mobile-antenna correction
    and environment offsets for suburban and open areas.  Frequencies
    outside the 150..2000 MHz validity range only warn.
    """
    f = link.freq_mhz
    if link.distance_m <= 0:
        raise NumericInputError(f"distance must be positive, got {link.distance_m}")
    if link.h_base_m <= 0 or link.h_mobile_m <= 0:
        raise NumericInputError("antenna heights must be positive")
    if not 150.0 <= f <= 2000.0:
        warnings.warn(
            f"carrier {f} MHz outside COST 231 Hata validity (150..2000 MHz)",
            stacklevel=2,
        )
    d_km = link.distance_m / 1000.0
    lf = np.log10(f)
    lhb = np.log10(link.h_base_m)
    a_hm = (1.1 * lf - 0.7) * link.h_mobile_m - (1.56 * lf - 0.8)
    if f <= 1500.0:
        base = (
            69.55 + 26.16 * lf - 13.82 * lhb - a_hm
            + (44.9 - 6.55 * lhb) * np.log10(d_km)
        )
        if link.environment == "urban":
            loss = base
        elif link.environment == "suburban":
            loss = base - 2.0 * np.log10(f / 28.0) ** 2 - 5.4
        elif link.environment == "open":
            loss = base - 4.78 * lf**2 + 18.33 * lf - 40.94
        else:
            raise ConfigError(f"unknown environment {link.environment!r}")
    else:
        base = (
            46.3 + 33.9 * lf - 13.82 * lhb - a_hm
            + (44.9 - 6.55 * lhb) * np.log10(d_km)
        )
        if link.environment in ("urban", "suburban", "open"):
            loss = base
        elif link.environment == "metropolitan":
            loss = base + 3.0
        else:
            raise ConfigError(f"unknown environment {link.environment!r}")
    return float(loss)


@dataclass
class FadingState:
    """Drawn multipath state for one link plus its Doppler clock.

    alpha_p(t) = n_paths^{-1/2} * n_sin^{-1/2}
                 * sum_s exp(j(2 pi F_d (t/f_s) cos(psi_{p,s}) + phi_{p,s}))
    """

    eta: float
    doppler_hz: float
    sample_rate_hz: float
    aoa: np.ndarray
    aod: np.ndarray | None
    sos_cos: np.ndarray    # (n_paths, n_sin) Doppler direction cosines
    sos_phase: np.ndarray  # (n_paths, n_sin) initial phases
    t_samples: int = 0
    # angles never change after the draw, so steering stacks are memoized
    # per array geometry; evolved copies share the dict
    steering_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_paths(self) -> int:
        return self.aoa.shape[0]

    def steering_stack(self, geom: "ArrayGeometry", departure: bool = False):
        angles = self.aod if departure else self.aoa
        if angles is None:
            raise ConfigError("fading state was drawn without departure angles")
        key = (departure, geom.n_elements, geom.spacing_wavelengths)
        got = self.steering_cache.get(key)
        if got is None:
            got = np.stack([steering_vector(p, geom) for p in angles], axis=1)
            self.steering_cache[key] = got
        return got

    def path_gains(self) -> np.ndarray:
        """Current per-path complex gains alpha_p(t), shape (n_paths,)."""
        n_p, n_s = self.sos_cos.shape
        t_sec = self.t_samples / self.sample_rate_hz
        phase = 2.0 * np.pi * self.doppler_hz * t_sec * self.sos_cos + self.sos_phase
        return np.exp(1j * phase).sum(axis=1) / np.sqrt(n_s * n_p)


def draw_fading_state(
    rng: Rng,
    n_paths: int,
    eta: float,
    doppler_hz: float,
    sample_rate_hz: float,
    has_tx_array: bool = True,
) -> FadingState:
    """Draw path angles and sum-of-sinusoid parameters for one link."""
    if n_paths < 1:
        raise ConfigError(f"need >= 1 path, got {n_paths}")
    if eta <= 0:
        raise ConfigError("path loss eta must be positive linear")
    aoa = rng.uniform(-np.pi / 2, np.pi / 2, size=n_paths)
    aod = rng.uniform(-np.pi / 2, np.pi / 2, size=n_paths) if has_tx_array else None
    sos_cos = np.cos(rng.uniform(0.0, 2.0 * np.pi, size=(n_paths, N_SINUSOIDS)))
    sos_phase = rng.uniform(0.0, 2.0 * np.pi, size=(n_paths, N_SINUSOIDS))
    return FadingState(
        eta=eta,
        doppler_hz=doppler_hz,
        sample_rate_hz=sample_rate_hz,
        aoa=aoa,
        aod=aod,
        sos_cos=sos_cos,
        sos_phase=sos_phase,
    )


def channel_matrix(
    state: FadingState,
    rx_geom: ArrayGeometry,
    tx_geom: ArrayGeometry | None = None,
) -> np.ndarray:
    """Channel at the state's current clock.

    Returns (n_rx, n_tx) for an array-to-array link, or an (n_rx, 1)
    column when the transmitter is a single-antenna terminal.
    """
    gains = state.path_gains()
    a_rx = state.steering_stack(rx_geom)
    scale = 1.0 / np.sqrt(state.eta)
    if tx_geom is None:
        return scale * (a_rx @ gains)[:, None]
    a_tx = state.steering_stack(tx_geom, departure=True)
    return scale * (a_rx * gains) @ a_tx.T


def evolve_fading(state: FadingState, n_samples: int) -> FadingState:
    """Advance the Doppler clock by ``n_samples``.

    Pure bookkeeping on an integer clock, so evolving by a then b equals
    evolving by a+b exactly, and F_d = 0 leaves the gains bit-identical.
    """
    if n_samples < 0:
        raise ConfigError("cannot evolve the channel backwards")
    return replace(state, t_samples=state.t_samples + n_samples)


def sample_channel(
    rng: Rng,
    state: FadingState,
    rx_geom: ArrayGeometry,
    tx_geom: ArrayGeometry | None = None,
) -> np.ndarray:
    """Draw an independent channel realization with the state's settings.

    Fresh path angles and sinusoid parameters each call; the passed-in
    state is not modified.
    """
    fresh = draw_fading_state(
        rng,
        n_paths=state.n_paths,
        eta=state.eta,
        doppler_hz=state.doppler_hz,
        sample_rate_hz=state.sample_rate_hz,
        has_tx_array=tx_geom is not None,
    )
    fresh.t_samples = state.t_samples
    return channel_matrix(fresh, rx_geom, tx_geom)
