"""Action policies for the frame simulator.

Four kinds share one interface: a fixed grid point, a privileged
upper-bound oracle that nullifies from the true data-window covariance,
a residual-monitoring heuristic that re-estimates when beamformed
jamming leaks above a threshold, and a greedy learned policy driven by
a trained Q-network checkpoint.
"""

import numpy as np

from . import agent
from .env import ApproxState, LinkEnv
from .errors import CheckpointError, ConfigError
from .linalg import make_rng


class Policy:
    """Base interface: attach once to an environment, then act per frame."""

    def attach(self, link_env: LinkEnv):
        pass

    def act(self, link_env: LinkEnv) -> int:
        raise NotImplementedError


class FixedPolicy(Policy):
    def __init__(self, action: int):
        self.action = int(action)

    def attach(self, link_env: LinkEnv):
        if not 1 <= self.action <= link_env.params.actions.size:
            raise ConfigError(
                f"fixed action {self.action} outside the grid"
            )

    def act(self, link_env: LinkEnv) -> int:
        return self.action


class UpperBoundPolicy(Policy):
    """Perfect-nullification oracle; the action only sets the duty cycle.

    The nominal action pairs the shortest estimation window with the
    longest data window, since the oracle needs no estimation quality.
    """

    def __init__(self, nominal_action: int = None):
        self.nominal_action = nominal_action

    def attach(self, link_env: LinkEnv):
        link_env.oracle_nullspace = True
        if self.nominal_action is None:
            space = link_env.params.actions
            self.nominal_action = space.encode(
                min(space.ne_candidates), max(space.nd_candidates)
            )

    def act(self, link_env: LinkEnv) -> int:
        return self.nominal_action


class HeuristicPolicy(Policy):
    """Monitor-and-reestimate baseline.

    Spends n_monitor data samples per frame measuring residual jamming
    power after beamforming (charged against the duty cycle).  When the
    residual exceeds the noise floor by tau_db, the next frame uses the
    largest estimation window.
    """

    def __init__(self, tau_db: float = 3.0, n_monitor: int = 20):
        if not np.isfinite(tau_db):
            raise ConfigError("tau_db must be finite")
        if n_monitor < 0:
            raise ConfigError("n_monitor must be >= 0")
        self.tau_db = float(tau_db)
        self.n_monitor = int(n_monitor)
        self.n_triggers = 0
        self._base = None
        self._trigger = None

    def attach(self, link_env: LinkEnv):
        space = link_env.params.actions
        if self.n_monitor >= min(space.nd_candidates):
            raise ConfigError(
                "n_monitor must be smaller than the shortest data window"
            )
        link_env.monitor_samples = self.n_monitor
        mid_ne = space.ne_candidates[(len(space.ne_candidates) - 1) // 2]
        mid_nd = space.nd_candidates[(len(space.nd_candidates) - 1) // 2]
        self._base = space.encode(mid_ne, mid_nd)
        self._trigger = space.encode(max(space.ne_candidates), mid_nd)

    def act(self, link_env: LinkEnv) -> int:
        frame = link_env.last_frame
        if frame is not None:
            threshold = frame.noise_floor * 10.0 ** (self.tau_db / 10.0)
            if frame.residual_jam_power > threshold:
                self.n_triggers += 1
                return self._trigger
        return self._base


class LearnedPolicy(Policy):
    """Greedy argmax over a trained Q-network.

    Feeds the same normalized (observation, previous action) history the
    trainer used; the checkpoint carries the normalizer state so
    evaluation continues from the training-time scales.
    """

    def __init__(self, checkpoint_path=None, params=None, normalizer=None,
                 history: int = None):
        if checkpoint_path is not None:
            params, normalizer, meta = agent.load_checkpoint(checkpoint_path)
            history = history or int(meta.get("history", 0))
        if params is None or normalizer is None:
            raise ConfigError(
                "learned policy needs a checkpoint or explicit params"
            )
        if not history:
            raise CheckpointError(
                "checkpoint does not record the history length"
            )
        self.params = params
        self.normalizer = normalizer
        self.history = int(history)
        self._rng = make_rng(0)
        self._state = None
        self._last_action = 0

    def attach(self, link_env: LinkEnv):
        p = link_env.params
        if self.params.sizes.n_input != p.obs_dim + 1:
            raise CheckpointError(
                "checkpoint input width does not match the environment"
            )
        if self.params.sizes.n_actions != p.actions.size:
            raise CheckpointError(
                "checkpoint action count does not match the environment"
            )
        self._state = ApproxState(
            history_length=self.history, obs_dim=p.obs_dim
        )
        self._last_action = 0

    def act(self, link_env: LinkEnv) -> int:
        obs = self.normalizer.update_and_normalize(link_env.observe())
        self._state = self._state.push(obs, self._last_action)
        a = agent.select_action(self.params, self._state, 0.0, self._rng)
        self._last_action = a
        return a


def make_policy(kind: str, **kwargs) -> Policy:
    kinds = {
        "fixed": FixedPolicy,
        "upper-bound": UpperBoundPolicy,
        "heuristic": HeuristicPolicy,
        "learned": LearnedPolicy,
    }
    if kind not in kinds:
        raise ConfigError(
            f"unknown policy kind {kind!r}; expected one of {sorted(kinds)}"
        )
    return kinds[kind](**kwargs)
