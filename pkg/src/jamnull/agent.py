"""Recurrent dueling Q-network and its training loop, in plain numpy.

The network is a single peephole LSTM layer that consumes the H history
entries of the approximate state as a length-H sequence, a linear
projection to a wider feature layer, and two ReLU streams: a scalar
state-value head and a per-action advantage head, combined by
mean-subtraction.  Forward and backward passes are written out
analytically (backpropagation through time included) and are validated
against finite differences in the test suite.

All parameters are float64; training is plain minibatch SGD with global
gradient-norm clipping, an epsilon-greedy behaviour policy, a FIFO
replay memory, and a periodically synced target copy of the weights.
"""

import copy
import hashlib
import json
from collections import deque
from dataclasses import dataclass, fields

import numpy as np

from .env import ApproxState
from .errors import CheckpointError, ConfigError, ShapeError
from .linalg import Rng, make_rng


@dataclass(frozen=True)
class NetworkSizes:
    n_input: int = 7
    n_cells: int = 6
    n_project: int = 128
    n_value_hidden: int = 16
    n_adv_hidden: int = 16
    n_actions: int = 16

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 1:
                raise ConfigError(f"{f.name} must be >= 1")

    def key(self) -> str:
        blob = json.dumps([getattr(self, f.name) for f in fields(self)])
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def param_count(
    n_input: int,
    n_cells: int,
    n_project: int = 128,
    n_value_hidden: int = 16,
    n_adv_hidden: int = 16,
    n_actions: int = 16,
) -> tuple:
    """(weights-only count, true count including biases).

    The first number follows the usual bias-free accounting: four gate
    input matrices, four recurrent matrices, three diagonal peephole
    vectors, the projection, and the two head stacks.
    """
    lstm = (
        4 * n_input * n_cells
        + 4 * n_cells * n_cells
        + n_cells * n_project
        + 3 * n_cells
    )
    heads = (
        n_project * n_value_hidden
        + n_project * n_adv_hidden
        + n_adv_hidden * n_actions
        + n_value_hidden
    )
    biases = 4 * n_cells + n_project + n_value_hidden + 1 + n_adv_hidden + n_actions
    return lstm + heads, lstm + heads + biases


# canonical field order for the flat-vector view
_FIELDS = (
    "w_i", "u_i", "p_i", "b_i",
    "w_f", "u_f", "p_f", "b_f",
    "w_g", "u_g", "b_g",
    "w_o", "u_o", "p_o", "b_o",
    "w_proj", "b_proj",
    "w_v1", "b_v1", "w_v2", "b_v2",
    "w_a1", "b_a1", "w_a2", "b_a2",
)


class QNetworkParams:
    """Named weight arrays with a lossless flat-vector view."""

    def __init__(self, sizes: NetworkSizes, arrays: dict):
        self.sizes = sizes
        missing = set(_FIELDS) - set(arrays)
        if missing:
            raise ShapeError(f"missing parameter arrays: {sorted(missing)}")
        for name in _FIELDS:
            setattr(self, name, np.asarray(arrays[name], dtype=float))
        ni, nc = sizes.n_input, sizes.n_cells
        if self.w_i.shape != (nc, ni) or self.u_i.shape != (nc, nc):
            raise ShapeError("gate matrices do not match the configured sizes")

    def named_arrays(self):
        for name in _FIELDS:
            yield name, getattr(self, name)

    def pack(self) -> np.ndarray:
        return np.concatenate([a.reshape(-1) for _, a in self.named_arrays()])

    def unpack_from(self, flat: np.ndarray) -> "QNetworkParams":
        flat = np.asarray(flat, dtype=float)
        expected = sum(a.size for _, a in self.named_arrays())
        if flat.shape != (expected,):
            raise ShapeError(
                f"flat vector has shape {flat.shape}, expected ({expected},)"
            )
        arrays = {}
        pos = 0
        for name, a in self.named_arrays():
            n = a.size
            arrays[name] = flat[pos:pos + n].reshape(a.shape).copy()
            pos += n
        return QNetworkParams(self.sizes, arrays)

    def clone(self) -> "QNetworkParams":
        return QNetworkParams(
            self.sizes, {name: a.copy() for name, a in self.named_arrays()}
        )

    def zeros_like(self) -> dict:
        return {name: np.zeros_like(a) for name, a in self.named_arrays()}


def init_params(rng: Rng, sizes: NetworkSizes) -> QNetworkParams:
    """Uniform +-1/sqrt(fan_in) weights, zero biases."""
    ni, nc = sizes.n_input, sizes.n_cells
    nol = sizes.n_project
    nv, na, nact = sizes.n_value_hidden, sizes.n_adv_hidden, sizes.n_actions

    def u(shape, fan_in):
        lim = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-lim, lim, size=shape)

    arrays = {}
    for gate in "ifgo":
        arrays[f"w_{gate}"] = u((nc, ni), ni)
        arrays[f"u_{gate}"] = u((nc, nc), nc)
        arrays[f"b_{gate}"] = np.zeros(nc)
    for gate in "ifo":
        arrays[f"p_{gate}"] = u((nc,), nc)
    arrays["w_proj"] = u((nol, nc), nc)
    arrays["b_proj"] = np.zeros(nol)
    arrays["w_v1"] = u((nv, nol), nol)
    arrays["b_v1"] = np.zeros(nv)
    arrays["w_v2"] = u((1, nv), nv)
    arrays["b_v2"] = np.zeros(1)
    arrays["w_a1"] = u((na, nol), nol)
    arrays["b_a1"] = np.zeros(na)
    arrays["w_a2"] = u((nact, na), na)
    arrays["b_a2"] = np.zeros(nact)
    return QNetworkParams(sizes, arrays)


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def dueling_combine(v, adv):
    adv = np.asarray(adv, dtype=float)
    if adv.size == 0:
        raise ShapeError("advantage vector must be nonempty")
    return v + adv - adv.mean(axis=-1, keepdims=True)


def network_input(state: ApproxState, n_actions: int) -> np.ndarray:
    """(H, obs_dim+1) network-ready sequence; action slot scaled to [0, 1]."""
    seq = state.sequence()
    seq[:, -1] /= float(n_actions)
    return seq


def forward(params: QNetworkParams, seqs: np.ndarray, want_cache: bool = False):
    """Batched forward pass.

    seqs: (B, H, n_input) or (H, n_input).  Returns (q, v, adv[, cache]);
    q has shape (B, n_actions) (squeezed to (n_actions,) for a single
    unbatched sequence).
    """
    seqs = np.asarray(seqs, dtype=float)
    single = seqs.ndim == 2
    if single:
        seqs = seqs[None]
    if seqs.ndim != 3 or seqs.shape[2] != params.sizes.n_input:
        raise ShapeError(
            f"expected (*, H, {params.sizes.n_input}) input, got {seqs.shape}"
        )
    b, h_steps, _ = seqs.shape
    nc = params.sizes.n_cells
    cache = {
        "x": [], "i": [], "f": [], "g": [], "o": [],
        "c": [], "c_prev": [], "tanh_c": [], "h_prev": [],
    }
    h = np.zeros((b, nc))
    c = np.zeros((b, nc))
    for t in range(h_steps):
        x = seqs[:, t, :]
        i = _sigmoid(x @ params.w_i.T + h @ params.u_i.T + c * params.p_i + params.b_i)
        f = _sigmoid(x @ params.w_f.T + h @ params.u_f.T + c * params.p_f + params.b_f)
        g = np.tanh(x @ params.w_g.T + h @ params.u_g.T + params.b_g)
        c_new = f * c + i * g
        o = _sigmoid(x @ params.w_o.T + h @ params.u_o.T + c_new * params.p_o + params.b_o)
        tanh_c = np.tanh(c_new)
        h_new = o * tanh_c
        if want_cache:
            cache["x"].append(x)
            cache["i"].append(i)
            cache["f"].append(f)
            cache["g"].append(g)
            cache["o"].append(o)
            cache["c"].append(c_new)
            cache["c_prev"].append(c)
            cache["tanh_c"].append(tanh_c)
            cache["h_prev"].append(h)
        h, c = h_new, c_new

    u_pre = h @ params.w_proj.T + params.b_proj
    u = np.maximum(u_pre, 0.0)
    vh_pre = u @ params.w_v1.T + params.b_v1
    vh = np.maximum(vh_pre, 0.0)
    v = vh @ params.w_v2.T + params.b_v2
    ah_pre = u @ params.w_a1.T + params.b_a1
    ah = np.maximum(ah_pre, 0.0)
    adv = ah @ params.w_a2.T + params.b_a2
    q = dueling_combine(v, adv)
    if want_cache:
        cache.update(
            h_last=h, u_pre=u_pre, u=u, vh_pre=vh_pre, vh=vh,
            ah_pre=ah_pre, ah=ah, n_steps=h_steps,
        )
        out_cache = cache
    if single:
        q, v, adv = q[0], float(v[0, 0]), adv[0]
    else:
        v = v[:, 0]
    if want_cache:
        return q, v, adv, out_cache
    return q, v, adv


def backward(
    params: QNetworkParams, cache: dict, action_idx: np.ndarray, dq: np.ndarray
) -> dict:
    """Gradients of sum_b dq_b * Q_b(a_b) for every parameter array.

    action_idx is 0-based into the q vector.  For the squared TD loss
    L = 1/(2B) * sum (Q(a) - y)^2, pass dq = (Q(a) - y)/B.
    """
    grads = params.zeros_like()
    b = dq.shape[0]
    nact = params.sizes.n_actions

    # dueling combination: dQ_a/dadv_j = delta_aj - 1/|A|, dQ_a/dv = 1
    dadv = np.full((b, nact), -1.0 / nact) * dq[:, None]
    dadv[np.arange(b), action_idx] += dq
    dv = dq.copy()

    vh, ah, u = cache["vh"], cache["ah"], cache["u"]
    grads["w_v2"] = dv[None, :] @ vh
    grads["b_v2"] = np.array([dv.sum()])
    dvh = dv[:, None] * params.w_v2
    dvh_pre = dvh * (cache["vh_pre"] > 0)
    grads["w_v1"] = dvh_pre.T @ u
    grads["b_v1"] = dvh_pre.sum(axis=0)

    grads["w_a2"] = dadv.T @ ah
    grads["b_a2"] = dadv.sum(axis=0)
    dah = dadv @ params.w_a2
    dah_pre = dah * (cache["ah_pre"] > 0)
    grads["w_a1"] = dah_pre.T @ u
    grads["b_a1"] = dah_pre.sum(axis=0)

    du = dvh_pre @ params.w_v1 + dah_pre @ params.w_a1
    du_pre = du * (cache["u_pre"] > 0)
    grads["w_proj"] = du_pre.T @ cache["h_last"]
    grads["b_proj"] = du_pre.sum(axis=0)
    dh = du_pre @ params.w_proj

    dc_next = np.zeros_like(dh)
    for t in range(cache["n_steps"] - 1, -1, -1):
        i, f, g, o = cache["i"][t], cache["f"][t], cache["g"][t], cache["o"][t]
        c, c_prev, tanh_c = cache["c"][t], cache["c_prev"][t], cache["tanh_c"][t]
        x, h_prev = cache["x"][t], cache["h_prev"][t]

        do_pre = dh * tanh_c * o * (1.0 - o)
        dc = dc_next + dh * o * (1.0 - tanh_c ** 2) + do_pre * params.p_o
        di_pre = dc * g * i * (1.0 - i)
        df_pre = dc * c_prev * f * (1.0 - f)
        dg_pre = dc * i * (1.0 - g ** 2)

        grads["w_i"] += di_pre.T @ x
        grads["u_i"] += di_pre.T @ h_prev
        grads["p_i"] += (di_pre * c_prev).sum(axis=0)
        grads["b_i"] += di_pre.sum(axis=0)
        grads["w_f"] += df_pre.T @ x
        grads["u_f"] += df_pre.T @ h_prev
        grads["p_f"] += (df_pre * c_prev).sum(axis=0)
        grads["b_f"] += df_pre.sum(axis=0)
        grads["w_g"] += dg_pre.T @ x
        grads["u_g"] += dg_pre.T @ h_prev
        grads["b_g"] += dg_pre.sum(axis=0)
        grads["w_o"] += do_pre.T @ x
        grads["u_o"] += do_pre.T @ h_prev
        grads["p_o"] += (do_pre * c).sum(axis=0)
        grads["b_o"] += do_pre.sum(axis=0)

        dc_next = dc * f + di_pre * params.p_i + df_pre * params.p_f
        dh = (
            di_pre @ params.u_i + df_pre @ params.u_f
            + dg_pre @ params.u_g + do_pre @ params.u_o
        )
    return grads


def select_action(
    params: QNetworkParams, state: ApproxState, epsilon: float, rng: Rng
) -> int:
    """Epsilon-greedy 1-based action; greedy ties go to the lowest index."""
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError(f"epsilon must be in [0, 1], got {epsilon}")
    n_actions = params.sizes.n_actions
    if rng.random() < epsilon:
        return int(rng.integers(1, n_actions + 1))
    q, _, _ = forward(params, network_input(state, n_actions))
    return int(np.argmax(q)) + 1


@dataclass(frozen=True)
class Transition:
    state: ApproxState
    action: int
    reward: float
    next_state: ApproxState


class ReplayBuffer:
    """FIFO memory pool of fixed capacity."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigError("replay capacity must be >= 1")
        self.capacity = capacity
        self._items = deque(maxlen=capacity)

    def push(self, item: Transition):
        self._items.append(item)

    def __len__(self):
        return len(self._items)

    def sample(self, rng: Rng, n: int):
        if n > len(self._items):
            raise ConfigError(
                f"cannot sample {n} transitions from {len(self._items)}"
            )
        idx = rng.choice(len(self._items), size=n, replace=False)
        return [self._items[int(i)] for i in idx]


class ObservationNormalizer:
    """Maps raw observations to bounded network inputs.

    SINR estimates (dB, capped at +-80) are divided by a fixed scale;
    singular values span many orders of magnitude so they are divided by
    the running maximum seen so far.
    """

    def __init__(self, n_sinr: int, sinr_scale: float = 40.0):
        if n_sinr < 0:
            raise ConfigError("n_sinr must be >= 0")
        self.n_sinr = n_sinr
        self.sinr_scale = sinr_scale
        self.running_max = 0.0

    def update_and_normalize(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=float)
        out = obs.copy()
        out[: self.n_sinr] = obs[: self.n_sinr] / self.sinr_scale
        tail = obs[self.n_sinr:]
        if tail.size:
            self.running_max = max(self.running_max, float(tail.max()))
            denom = self.running_max if self.running_max > 0 else 1.0
            out[self.n_sinr:] = tail / denom
        return out

    def state(self) -> np.ndarray:
        return np.array([self.n_sinr, self.sinr_scale, self.running_max])

    @classmethod
    def from_state(cls, arr) -> "ObservationNormalizer":
        norm = cls(int(arr[0]), float(arr[1]))
        norm.running_max = float(arr[2])
        return norm


@dataclass(frozen=True)
class TrainerConfig:
    epsilon_start: float = 1.0
    epsilon_floor: float = 0.1
    epsilon_decay: float = 0.99
    learning_rate: float = 0.01
    minibatch: int = 32
    memory: int = 10_000
    target_sync: int = 1000
    gamma: float = 0.9
    history: int = 6
    grad_clip: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError("gamma must be in (0, 1)")
        if not 0.0 <= self.epsilon_floor <= self.epsilon_start <= 1.0:
            raise ConfigError("need 0 <= epsilon_floor <= epsilon_start <= 1")
        if not 0.0 < self.epsilon_decay <= 1.0:
            raise ConfigError("epsilon_decay must be in (0, 1]")
        if self.minibatch < 1 or self.memory < self.minibatch:
            raise ConfigError("memory must hold at least one minibatch")
        if self.target_sync < 1 or self.history < 1:
            raise ConfigError("target_sync and history must be >= 1")
        if self.learning_rate <= 0 or self.grad_clip <= 0:
            raise ConfigError("learning_rate and grad_clip must be positive")


def clip_gradients(grads: dict, max_norm: float) -> float:
    """Scales all arrays in place to cap the global l2 norm; returns it."""
    total = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm and total > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


class Trainer:
    """One-step Q-learning driver tying the network to the environment."""

    def __init__(self, link_env, config: TrainerConfig, seed: int = 0,
                 sizes: NetworkSizes = None):
        self.env = link_env
        self.config = config
        p = link_env.params
        if sizes is None:
            sizes = NetworkSizes(
                n_input=p.obs_dim + 1,
                n_cells=config.history,
                n_actions=p.actions.size,
            )
        if sizes.n_input != p.obs_dim + 1 or sizes.n_actions != p.actions.size:
            raise ConfigError("network sizes do not match the environment")
        self.rng = make_rng(seed)
        self.params = init_params(self.rng, sizes)
        self.target = self.params.clone()
        self.normalizer = ObservationNormalizer(n_sinr=p.n_ue)
        self.replay = ReplayBuffer(config.memory)
        self.state = ApproxState(
            history_length=config.history, obs_dim=p.obs_dim
        )
        self.epsilon = config.epsilon_start
        self.iteration = 0

    def train_step(self) -> dict:
        cfg = self.config
        state = self.state
        a = select_action(self.params, state, self.epsilon, self.rng)
        obs, reward, frame = self.env.step(a)
        scaled = reward / self.env.reward_scale
        next_state = state.push(
            self.normalizer.update_and_normalize(obs), a
        )
        self.replay.push(Transition(state, a, scaled, next_state))

        loss = None
        if len(self.replay) >= cfg.minibatch:
            loss = self._update(self.replay.sample(self.rng, cfg.minibatch))

        self.state = next_state
        self.epsilon = max(cfg.epsilon_floor, self.epsilon * cfg.epsilon_decay)
        self.iteration += 1
        if self.iteration % cfg.target_sync == 0:
            self.target = self.params.clone()
        return {
            "iteration": self.iteration,
            "action": a,
            "reward": reward,
            "reward_scaled": scaled,
            "epsilon": self.epsilon,
            "loss": loss,
            "frame": frame,
        }

    def _update(self, batch) -> float:
        cfg = self.config
        n_actions = self.params.sizes.n_actions
        seqs = np.stack([
            network_input(t.state, n_actions) for t in batch
        ])
        next_seqs = np.stack([
            network_input(t.next_state, n_actions) for t in batch
        ])
        rewards = np.array([t.reward for t in batch])
        actions0 = np.array([t.action - 1 for t in batch])

        q_next, _, _ = forward(self.target, next_seqs)
        targets = rewards + cfg.gamma * q_next.max(axis=1)
        q, _, _, cache = forward(self.params, seqs, want_cache=True)
        picked = q[np.arange(len(batch)), actions0]
        td = picked - targets
        loss = 0.5 * float(np.mean(td ** 2))

        grads = backward(self.params, cache, actions0, td / len(batch))
        clip_gradients(grads, cfg.grad_clip)
        for name, g in grads.items():
            getattr(self.params, name)[...] -= cfg.learning_rate * g
        return loss


CHECKPOINT_VERSION = 1


def save_checkpoint(path, params: QNetworkParams,
                    normalizer: ObservationNormalizer, extra: dict = None):
    s = params.sizes
    meta = dict(extra or {})
    np.savez(
        path,
        version=CHECKPOINT_VERSION,
        sizes=np.array([
            s.n_input, s.n_cells, s.n_project,
            s.n_value_hidden, s.n_adv_hidden, s.n_actions,
        ]),
        key=np.array(s.key()),
        flat=params.pack(),
        normalizer=normalizer.state(),
        meta=np.array(json.dumps(meta)),
    )


def load_checkpoint(path, expect_sizes: NetworkSizes = None):
    try:
        data = np.load(path, allow_pickle=False)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if int(data["version"]) != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint version {data['version']}"
        )
    sizes = NetworkSizes(*(int(v) for v in data["sizes"]))
    if str(data["key"]) != sizes.key():
        raise CheckpointError("checkpoint key does not match stored sizes")
    if expect_sizes is not None and sizes != expect_sizes:
        raise CheckpointError(
            f"checkpoint sizes {sizes} do not match expected {expect_sizes}"
        )
    template = init_params(make_rng(0), sizes)
    params = template.unpack_from(np.asarray(data["flat"], dtype=float))
    normalizer = ObservationNormalizer.from_state(data["normalizer"])
    meta = json.loads(str(data["meta"]))
    return params, normalizer, meta
