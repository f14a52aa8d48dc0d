"""Frame-level downlink simulator with adaptive jamming nullification.

Each frame has three phases: the base station stays silent for ``n_est``
samples while every UE estimates the jamming subspace from a sample
covariance, a fixed-length preamble reveals the equivalent channel
exactly, and ``n_data`` samples carry 16-QAM payload through the
beamformed, zero-forcing-equalized link.  The controller picks
(n_est, n_data) once per frame from a small grid; the tension is duty
cycle versus nullification quality under a jammer whose correlation
drifts over time.

The environment is partially observable: the controller sees only the
previous frame's decision-directed SINR estimates and the jamming
covariance spectrum, never the true channel or the true SINRs.  True
SINRs (known to the simulator alone) decide outage and reward.
"""

from dataclasses import dataclass, field

import numpy as np

from . import beamform, channel, jamming
from .errors import (
    ConfigError,
    IllConditionedError,
    NumericInputError,
)
from .linalg import (
    Rng,
    make_rng,
    random_semiunitary,
    standard_complex_noise,
)

DELTA_MIN_DB = 11.8
SINR_FLOOR_DB = -80.0


def frame_reward(n_payload: int, sinr_linear, delta_min_linear: float) -> float:
    """Data volume proxy: n_payload * sum of per-stream log2(1 + SINR).

    All-or-nothing: zero whenever any stream falls under the SINR floor,
    since an uncoded stream below the floor corrupts the whole frame.
    """
    sinr_linear = np.asarray(sinr_linear, dtype=float)
    if n_payload < 0:
        raise NumericInputError("n_payload must be >= 0")
    if sinr_linear.size == 0:
        raise NumericInputError("need at least one stream SINR")
    if np.any(sinr_linear < delta_min_linear):
        return 0.0
    return float(n_payload * np.log2(1.0 + sinr_linear).sum())


@dataclass(frozen=True)
class ActionSpace:
    """Grid of (estimation length, data length) choices, both in samples.

    Action indices are 1-based.  Index 1 maps to the first entry of both
    grids; the estimation index advances fastest.
    """

    ne_candidates: tuple = (10, 20, 30, 40)
    nd_candidates: tuple = (200, 250, 300, 350)

    def __post_init__(self):
        for name, cands in (
            ("ne_candidates", self.ne_candidates),
            ("nd_candidates", self.nd_candidates),
        ):
            if len(cands) == 0:
                raise ConfigError(f"{name} must be nonempty")
            if any(int(c) != c or c <= 0 for c in cands):
                raise ConfigError(f"{name} must hold positive integers")
        if any(c % 2 for c in self.nd_candidates):
            raise ConfigError(
                "nd_candidates must be even (two samples per symbol)"
            )

    @property
    def size(self) -> int:
        return len(self.ne_candidates) * len(self.nd_candidates)

    def decode(self, a: int) -> tuple:
        if int(a) != a or not 1 <= a <= self.size:
            raise NumericInputError(
                f"action must be an integer in [1, {self.size}], got {a!r}"
            )
        i = int(a) - 1
        n_e = len(self.ne_candidates)
        return (self.ne_candidates[i % n_e], self.nd_candidates[i // n_e])

    def encode(self, n_est: int, n_data: int) -> int:
        try:
            i = self.ne_candidates.index(n_est)
            j = self.nd_candidates.index(n_data)
        except ValueError as exc:
            raise NumericInputError(
                f"({n_est}, {n_data}) is not on the action grid"
            ) from exc
        return 1 + i + j * len(self.ne_candidates)


@dataclass(frozen=True)
class ApproxState:
    """FIFO ring of the last H (observation, previous action) pairs.

    Flattened oldest-to-newest; slots before the first push are zero.
    Real actions are 1-based, so a zero action slot always means
    "no history yet".
    """

    history_length: int
    obs_dim: int
    entries: tuple = ()

    def __post_init__(self):
        if self.history_length < 1:
            raise ConfigError("history_length must be >= 1")
        if self.obs_dim < 1:
            raise ConfigError("obs_dim must be >= 1")

    def push(self, obs, action: int) -> "ApproxState":
        obs = np.asarray(obs, dtype=float)
        if obs.shape != (self.obs_dim,):
            raise NumericInputError(
                f"observation must have shape ({self.obs_dim},), got {obs.shape}"
            )
        new = self.entries + ((tuple(obs.tolist()), int(action)),)
        return ApproxState(
            history_length=self.history_length,
            obs_dim=self.obs_dim,
            entries=new[-self.history_length:],
        )

    def sequence(self) -> np.ndarray:
        """(H, obs_dim + 1) array, oldest row first, zero-padded at the front."""
        out = np.zeros((self.history_length, self.obs_dim + 1))
        offset = self.history_length - len(self.entries)
        for i, (obs, action) in enumerate(self.entries):
            out[offset + i, : self.obs_dim] = obs
            out[offset + i, self.obs_dim] = action
        return out

    def flatten(self) -> np.ndarray:
        return self.sequence().reshape(-1)


@dataclass(frozen=True)
class FrameResult:
    action: int
    n_est: int
    n_preamble: int
    n_data: int
    mu: float
    outage: bool
    reward: float
    true_sinr_db: np.ndarray       # (K, M)
    spec_eff: np.ndarray           # (K, M) bits/s/Hz from true SINRs
    est_sinr_db: np.ndarray        # (K, M) decision-directed estimates
    below_min: np.ndarray          # (K, M) bool, true SINR under the floor
    singular_values: np.ndarray    # (K, n_rx) descending covariance spectra
    residual_jam_power: float      # mean over UEs, beamformed-domain
    noise_floor: float             # expected beamformed noise power


@dataclass(frozen=True)
class EnvParams:
    noise_var: float
    eta_ue: float
    eta_jammer_ue: float
    jammers: jamming.JammerModel = field(
        default_factory=lambda: jamming.JammerModel(
            variances=(1.0, 1.0),
            schedule=jamming.CorrelationSchedule(kind="sawtooth-down"),
        )
    )
    actions: ActionSpace = field(default_factory=ActionSpace)
    n_ue: int = 4
    n_rx: int = 8
    n_streams: int = 3
    n_bs_antennas: int = 12
    p_total: float = 25.119
    preamble_samples: int = 20
    delta_min_db: float = DELTA_MIN_DB
    n_paths: int = 8
    doppler_hz: float = 8.28
    sample_rate_hz: float = 400e3
    iid_channels: bool = False

    def __post_init__(self):
        if self.noise_var <= 0 or self.eta_ue <= 0 or self.eta_jammer_ue <= 0:
            raise ConfigError("noise_var and path losses must be positive")
        if self.p_total <= 0:
            raise ConfigError("p_total must be positive")
        for name in ("n_ue", "n_rx", "n_streams", "n_bs_antennas", "n_paths"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.preamble_samples < 0:
            raise ConfigError("preamble_samples must be >= 0")
        if self.n_rx - self.n_jammers - self.n_streams < 1:
            raise ConfigError(
                "need n_rx > n_jammers + n_streams for zero-forcing headroom"
            )
        if self.n_bs_antennas < self.n_streams:
            raise ConfigError("n_bs_antennas must be >= n_streams")
        if self.doppler_hz < 0 or self.sample_rate_hz <= 0:
            raise ConfigError("bad doppler or sample rate")

    @property
    def n_jammers(self) -> int:
        return self.jammers.n_jammers

    @property
    def p_stream(self) -> float:
        """Transmit power per spatial stream (equal split across K UEs x M)."""
        return self.p_total / (self.n_ue * self.n_streams)

    @property
    def delta_min_linear(self) -> float:
        return 10.0 ** (self.delta_min_db / 10.0)

    @property
    def obs_dim(self) -> int:
        return self.n_ue + self.n_jammers

    def budget(self) -> beamform.LinkBudget:
        return beamform.LinkBudget(
            p_t=self.p_stream,
            noise_var=self.noise_var,
            eta_ue=self.eta_ue,
            eta_jammer_ue=(self.eta_jammer_ue,) * self.n_jammers,
            jammer_var=tuple(self.jammers.variances),
            n_rx=self.n_rx,
            n_streams=self.n_streams,
        )


class LinkEnv:
    """Sequential frame simulator; one instance per seed, stepped forever."""

    def __init__(self, params: EnvParams, seed: int = 0):
        self.params = params
        self._rng = make_rng(seed)
        p = params
        self._precoders = [
            random_semiunitary(self._rng, p.n_bs_antennas, p.n_streams)
            for _ in range(p.n_ue)
        ]
        self._rx_geom = channel.ArrayGeometry(p.n_rx)
        self._tx_geom = channel.ArrayGeometry(p.n_bs_antennas)
        if not p.iid_channels:
            self._bs_states = [
                channel.draw_fading_state(
                    self._rng, p.n_paths, p.eta_ue, p.doppler_hz,
                    p.sample_rate_hz,
                )
                for _ in range(p.n_ue)
            ]
            self._jam_states = [
                [
                    channel.draw_fading_state(
                        self._rng, p.n_paths, p.eta_jammer_ue, p.doppler_hz,
                        p.sample_rate_hz, has_tx_array=False,
                    )
                    for _ in range(p.n_jammers)
                ]
                for _ in range(p.n_ue)
            ]
        self._sample_clock = 0
        self._frame_index = 0
        self._last_obs = np.zeros(p.obs_dim)
        self._last_frame = None
        # policy hooks
        self.oracle_nullspace = False
        self.monitor_samples = 0

    @property
    def sample_clock(self) -> int:
        return self._sample_clock

    @property
    def frame_index(self) -> int:
        return self._frame_index

    @property
    def last_frame(self):
        return self._last_frame

    @property
    def noise_floor(self) -> float:
        """Expected beamformed noise power: variance times kept dimensions."""
        p = self.params
        return p.noise_var * (p.n_rx - p.n_jammers)

    @property
    def reward_scale(self) -> float:
        """Largest achievable frame reward; divides rewards for learning."""
        p = self.params
        return (
            p.n_ue * p.n_streams * max(p.actions.nd_candidates)
            * np.log2(1.0 + beamform.SINR_CAP_LINEAR)
        )

    def observe(self) -> np.ndarray:
        """Previous frame's [mean est. SINR per UE, mean top singular values]."""
        return self._last_obs.copy()

    def _frame_channels(self):
        p = self.params
        if p.iid_channels:
            h = [
                standard_complex_noise(
                    self._rng, (p.n_rx, p.n_bs_antennas), 1.0 / p.eta_ue
                )
                for _ in range(p.n_ue)
            ]
            z = [
                standard_complex_noise(
                    self._rng, (p.n_rx, p.n_jammers), 1.0 / p.eta_jammer_ue
                )
                for _ in range(p.n_ue)
            ]
            return h, z
        h = [
            channel.channel_matrix(s, self._rx_geom, self._tx_geom)
            for s in self._bs_states
        ]
        z = [
            np.hstack([
                channel.channel_matrix(s, self._rx_geom) for s in states
            ])
            for states in self._jam_states
        ]
        return h, z

    def step(self, a: int):
        """Simulate one frame; returns (next observation, reward, FrameResult)."""
        p = self.params
        n_est, n_data = p.actions.decode(a)
        n_pre = p.preamble_samples
        monitor = int(self.monitor_samples)
        if not 0 <= monitor < n_data:
            raise ConfigError(
                f"monitor_samples must lie in [0, {n_data}), got {monitor}"
            )
        n_payload = n_data - monitor
        frame_len = n_est + n_pre + n_data
        p0 = self._sample_clock
        p_data = p0 + n_est + n_pre
        n_sym = n_data // 2

        h_all, z_all = self._frame_channels()

        # --- estimation phase: BS silent, jamming plus noise only
        xj_est = jamming.sample_jamming_block(
            self._rng, p.jammers, p0, n_est
        )
        f_hats = []
        sing_vals = np.zeros((p.n_ue, p.n_rx))
        sigma_data = jamming.average_sigma_j(p.jammers, p_data, n_sym, stride=2)
        for k in range(p.n_ue):
            y_est = z_all[k] @ xj_est + standard_complex_noise(
                self._rng, (p.n_rx, n_est), p.noise_var
            )
            r_hat = beamform.sample_covariance(y_est, n_est)
            est = beamform.estimate_nullspace(
                r_hat, p.n_jammers, n_samples=n_est
            )
            sing_vals[k] = est.singular_values
            if self.oracle_nullspace:
                r_true = (
                    z_all[k] @ sigma_data @ z_all[k].conj().T
                    + p.noise_var * np.eye(p.n_rx)
                )
                f_hats.append(
                    beamform.estimate_nullspace(r_true, p.n_jammers).g_hat
                )
            else:
                f_hats.append(est.g_hat)

        # --- data phase: one jamming vector per symbol (2 samples/symbol)
        xj_data = jamming.sample_jamming_block(
            self._rng, p.jammers, p_data, n_sym, stride=2
        )
        true_lin = np.zeros((p.n_ue, p.n_streams))
        est_db = np.zeros((p.n_ue, p.n_streams))
        residual = 0.0
        floor_lin = 10.0 ** (SINR_FLOOR_DB / 10.0)
        for k in range(p.n_ue):
            syms = beamform.qam16_symbols(self._rng, (p.n_streams, n_sym))
            noise = standard_complex_noise(
                self._rng, (p.n_rx, n_sym), p.noise_var
            )
            h_eff = h_all[k] @ self._precoders[k]
            jam_rx = z_all[k] @ xj_data
            y = np.sqrt(p.p_stream) * h_eff @ syms + jam_rx + noise
            h_tilde = f_hats[k] @ h_eff
            try:
                a_zf = beamform.zf_equalizer(h_tilde)
            except IllConditionedError:
                true_lin[k] = floor_lin
                est_db[k] = SINR_FLOOR_DB
                residual += float(
                    np.mean(np.abs(f_hats[k] @ jam_rx) ** 2)
                    * f_hats[k].shape[0]
                )
                continue
            eq = beamform.apply_beamforming_and_equalize(
                y, f_hats[k], h_tilde, syms, p.p_stream, jam_component=jam_rx
            )
            true_lin[k] = beamform.stream_sinrs_true(
                a_zf, f_hats[k], z_all[k], sigma_data, p.noise_var, p.p_stream
            )
            est_db[k] = eq.sinr_dd_db
            residual += eq.residual_jam_power
        residual /= p.n_ue

        below = true_lin < p.delta_min_linear
        outage = bool(below.any())
        spec_eff = np.log2(1.0 + true_lin)
        reward = frame_reward(n_payload, true_lin, p.delta_min_linear)
        mu = n_payload / frame_len

        obs = np.concatenate([
            est_db.mean(axis=1),
            sing_vals[:, : p.n_jammers].mean(axis=0),
        ])
        frame = FrameResult(
            action=int(a),
            n_est=n_est,
            n_preamble=n_pre,
            n_data=n_data,
            mu=mu,
            outage=outage,
            reward=reward,
            true_sinr_db=10.0 * np.log10(true_lin),
            spec_eff=spec_eff,
            est_sinr_db=est_db,
            below_min=below,
            singular_values=sing_vals,
            residual_jam_power=residual,
            noise_floor=self.noise_floor,
        )

        # advance both clocks by the whole frame
        if not p.iid_channels:
            self._bs_states = [
                channel.evolve_fading(s, frame_len) for s in self._bs_states
            ]
            self._jam_states = [
                [channel.evolve_fading(s, frame_len) for s in states]
                for states in self._jam_states
            ]
        self._sample_clock = p0 + frame_len
        self._frame_index += 1
        self._last_obs = obs
        self._last_frame = frame
        return obs.copy(), reward, frame


def metrics(frames) -> tuple:
    """(mean effective spectral efficiency, outage fraction) over stream-frames."""
    frames = list(frames)
    if not frames:
        raise NumericInputError("metrics needs at least one frame")
    eff = np.concatenate([
        (f.mu * f.spec_eff).reshape(-1) for f in frames
    ])
    out = np.concatenate([f.below_min.reshape(-1) for f in frames])
    return float(eff.mean()), float(out.mean())
