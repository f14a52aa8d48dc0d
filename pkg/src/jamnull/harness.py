"""Experiment orchestration: config loading, seeded runs, and CSV output.

The config file is YAML with a fixed schema; unknown keys are rejected
with their full path.  Radio quantities carry units in the schema
("44 dBm", "200 kHz") and are converted to linear exactly once at load,
so feeding an already-converted number back in is an error rather than
a silent double conversion.
"""

import copy
import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import yaml

from . import agent, beamform, channel, jamming, policies
from .env import ActionSpace, EnvParams, LinkEnv, metrics
from .errors import ConfigError, NumericInputError

DEFAULTS = {
    "system": {
        "n_bs_antennas": 12,
        "n_ue": 4,
        "n_rx": 8,
        "n_streams": 3,
        "n_jammers": 2,
    },
    "radio": {
        "carrier": "447 MHz",
        "p_total": "44 dBm",
        "bandwidth": "200 kHz",
        "sample_rate": "400 kHz",
        "doppler": "8.28 Hz",
        "n_paths": 8,
        "noise_figure": "7 dB",
        "noise_power": None,
    },
    "geometry": {
        "h_base": 50.0,
        "h_jammer": 2.0,
        "h_ue": 2.0,
        "distance_bs": 100.0,
        "distance_jammer": 100.0,
        "environment": "suburban",
    },
    "frame": {
        "preamble_samples": 20,
        "ne_candidates": [10, 20, 30, 40],
        "nd_candidates": [200, 250, 300, 350],
        "delta_min": "11.8 dB",
    },
    "jamming": {
        "power": "30 dBm",
        "schedule": {
            "kind": "sawtooth-down",
            "period_samples": 5000,
            "rho_max": 1.0,
            "rho_min": 0.8,
            "switch_sample": None,
        },
    },
    "trainer": {
        "iterations": 20000,
        "history": 6,
        "n_cells": None,
        "gamma": 0.9,
        "learning_rate": 0.01,
        "minibatch": 32,
        "memory": 10000,
        "target_sync": 1000,
        "epsilon_start": 1.0,
        "epsilon_floor": 0.1,
        "epsilon_decay": 0.99,
        "grad_clip": 1.0,
    },
    "evaluation": {
        "frames": 5000,
        "seeds": [0, 1, 2],
    },
    "channel_mode": "physical",
}

SWEEP_POWERS_DBM = (10.0, 15.0, 20.0, 25.0, 30.0, 35.0)


def _parse_suffixed(value, field, suffixes):
    """Parses '<number> <unit>' with a unit from `suffixes` (a dict of
    unit -> converter)."""
    if not isinstance(value, str):
        raise ConfigError(
            f"{field}: expected a unit-suffixed string like "
            f"'<value> {next(iter(suffixes))}', got {value!r} "
            "(bare numbers are rejected so values cannot be converted twice)"
        )
    parts = value.split()
    if len(parts) != 2:
        raise ConfigError(f"{field}: cannot parse quantity {value!r}")
    num, unit = parts
    if unit not in suffixes:
        raise ConfigError(
            f"{field}: unknown unit {unit!r}; expected one of {sorted(suffixes)}"
        )
    try:
        x = float(num)
    except ValueError as exc:
        raise ConfigError(f"{field}: bad number in {value!r}") from exc
    return suffixes[unit](x)


def parse_power_w(value, field):
    return _parse_suffixed(value, field, {
        "dBm": lambda x: 10.0 ** ((x - 30.0) / 10.0),
        "W": lambda x: x,
        "mW": lambda x: x * 1e-3,
    })


def parse_db(value, field):
    return _parse_suffixed(value, field, {"dB": lambda x: x})


def parse_freq_hz(value, field):
    return _parse_suffixed(value, field, {
        "Hz": lambda x: x,
        "kHz": lambda x: x * 1e3,
        "MHz": lambda x: x * 1e6,
        "GHz": lambda x: x * 1e9,
    })


def thermal_noise_w(bandwidth_hz: float, noise_figure_db: float) -> float:
    """Thermal floor at 290 K plus receiver noise figure, in watts."""
    if bandwidth_hz <= 0:
        raise ConfigError("bandwidth must be positive")
    dbm = -174.0 + 10.0 * math.log10(bandwidth_hz) + noise_figure_db
    return 10.0 ** ((dbm - 30.0) / 10.0)


def _merge_checked(defaults, user, path=""):
    if not isinstance(user, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping")
    out = copy.deepcopy(defaults)
    for key, val in user.items():
        here = f"{path}.{key}" if path else str(key)
        if key not in defaults:
            raise ConfigError(f"{here}: unknown key")
        if isinstance(defaults[key], dict) and defaults[key]:
            out[key] = _merge_checked(defaults[key], val, here)
        else:
            out[key] = val
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    n_bs_antennas: int
    n_ue: int
    n_rx: int
    n_streams: int
    n_jammers: int
    carrier_mhz: float
    p_total_w: float
    bandwidth_hz: float
    sample_rate_hz: float
    doppler_hz: float
    n_paths: int
    noise_var_w: float
    eta_ue: float
    eta_jammer_ue: float
    preamble_samples: int
    ne_candidates: tuple
    nd_candidates: tuple
    delta_min_db: float
    jammer_power_w: float
    schedule: jamming.CorrelationSchedule
    trainer: agent.TrainerConfig
    n_cells: int
    iterations: int
    eval_frames: int
    seeds: tuple
    channel_mode: str

    def action_space(self) -> ActionSpace:
        return ActionSpace(self.ne_candidates, self.nd_candidates)

    def jammer_model(self, power_w: float = None) -> jamming.JammerModel:
        p = self.jammer_power_w if power_w is None else power_w
        return jamming.JammerModel(
            variances=(p,) * self.n_jammers, schedule=self.schedule
        )

    def env_params(self, jam_power_w: float = None,
                   iid: bool = None) -> EnvParams:
        mode_iid = (self.channel_mode == "iid") if iid is None else iid
        return EnvParams(
            noise_var=self.noise_var_w,
            eta_ue=self.eta_ue,
            eta_jammer_ue=self.eta_jammer_ue,
            jammers=self.jammer_model(jam_power_w),
            actions=self.action_space(),
            n_ue=self.n_ue,
            n_rx=self.n_rx,
            n_streams=self.n_streams,
            n_bs_antennas=self.n_bs_antennas,
            p_total=self.p_total_w,
            preamble_samples=self.preamble_samples,
            delta_min_db=self.delta_min_db,
            n_paths=self.n_paths,
            doppler_hz=self.doppler_hz,
            sample_rate_hz=self.sample_rate_hz,
            iid_channels=mode_iid,
        )

    def network_sizes(self) -> agent.NetworkSizes:
        return agent.NetworkSizes(
            n_input=self.n_ue + self.n_jammers + 1,
            n_cells=self.n_cells,
            n_actions=len(self.ne_candidates) * len(self.nd_candidates),
        )


def _build_config(tree: dict) -> ExperimentConfig:
    sy, ra, ge = tree["system"], tree["radio"], tree["geometry"]
    fr, ja, tr = tree["frame"], tree["jamming"], tree["trainer"]
    ev = tree["evaluation"]

    carrier_mhz = parse_freq_hz(ra["carrier"], "radio.carrier") / 1e6
    bandwidth_hz = parse_freq_hz(ra["bandwidth"], "radio.bandwidth")
    nf_db = parse_db(ra["noise_figure"], "radio.noise_figure")
    if ra["noise_power"] is None:
        noise_var = thermal_noise_w(bandwidth_hz, nf_db)
    else:
        noise_var = parse_power_w(ra["noise_power"], "radio.noise_power")

    try:
        pl_bs = channel.cost231_pathloss_db(channel.LinkGeometry(
            freq_mhz=carrier_mhz,
            h_base_m=float(ge["h_base"]),
            h_mobile_m=float(ge["h_ue"]),
            distance_m=float(ge["distance_bs"]),
            environment=ge["environment"],
        ))
        pl_jam = channel.cost231_pathloss_db(channel.LinkGeometry(
            freq_mhz=carrier_mhz,
            h_base_m=float(ge["h_jammer"]),
            h_mobile_m=float(ge["h_ue"]),
            distance_m=float(ge["distance_jammer"]),
            environment=ge["environment"],
        ))
    except NumericInputError as exc:
        raise ConfigError(f"geometry: {exc}") from exc

    sched_cfg = ja["schedule"]
    schedule = jamming.CorrelationSchedule(
        kind=sched_cfg["kind"],
        period_samples=int(sched_cfg["period_samples"]),
        rho_max=float(sched_cfg["rho_max"]),
        rho_min=float(sched_cfg["rho_min"]),
        switch_sample=(
            None if sched_cfg["switch_sample"] is None
            else int(sched_cfg["switch_sample"])
        ),
    )

    trainer = agent.TrainerConfig(
        epsilon_start=float(tr["epsilon_start"]),
        epsilon_floor=float(tr["epsilon_floor"]),
        epsilon_decay=float(tr["epsilon_decay"]),
        learning_rate=float(tr["learning_rate"]),
        minibatch=int(tr["minibatch"]),
        memory=int(tr["memory"]),
        target_sync=int(tr["target_sync"]),
        gamma=float(tr["gamma"]),
        history=int(tr["history"]),
        grad_clip=float(tr["grad_clip"]),
    )
    n_cells = tr["n_cells"]
    n_cells = trainer.history if n_cells is None else int(n_cells)

    mode = tree["channel_mode"]
    if mode not in ("physical", "iid"):
        raise ConfigError(
            f"channel_mode: expected 'physical' or 'iid', got {mode!r}"
        )

    if int(ev["frames"]) < 1:
        raise ConfigError("evaluation.frames must be >= 1")

    config = ExperimentConfig(
        n_bs_antennas=int(sy["n_bs_antennas"]),
        n_ue=int(sy["n_ue"]),
        n_rx=int(sy["n_rx"]),
        n_streams=int(sy["n_streams"]),
        n_jammers=int(sy["n_jammers"]),
        carrier_mhz=carrier_mhz,
        p_total_w=parse_power_w(ra["p_total"], "radio.p_total"),
        bandwidth_hz=bandwidth_hz,
        sample_rate_hz=parse_freq_hz(ra["sample_rate"], "radio.sample_rate"),
        doppler_hz=parse_freq_hz(ra["doppler"], "radio.doppler"),
        n_paths=int(ra["n_paths"]),
        noise_var_w=noise_var,
        eta_ue=10.0 ** (pl_bs / 10.0),
        eta_jammer_ue=10.0 ** (pl_jam / 10.0),
        preamble_samples=int(fr["preamble_samples"]),
        ne_candidates=tuple(int(v) for v in fr["ne_candidates"]),
        nd_candidates=tuple(int(v) for v in fr["nd_candidates"]),
        delta_min_db=parse_db(fr["delta_min"], "frame.delta_min"),
        jammer_power_w=parse_power_w(ja["power"], "jamming.power"),
        schedule=schedule,
        trainer=trainer,
        n_cells=n_cells,
        iterations=int(tr["iterations"]),
        eval_frames=int(ev["frames"]),
        seeds=tuple(int(s) for s in ev["seeds"]),
        channel_mode=mode,
    )
    # fail at load time, not first use: these run the full system checks
    config.env_params()
    config.network_sizes()
    return config


def config_from_dict(user: dict = None) -> ExperimentConfig:
    tree = _merge_checked(DEFAULTS, user or {})
    try:
        return _build_config(tree)
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            user = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if user is None:
        user = {}
    return config_from_dict(user)


def build_env(config: ExperimentConfig, seed: int,
              jam_power_w: float = None, iid: bool = None) -> LinkEnv:
    return LinkEnv(config.env_params(jam_power_w, iid), seed=seed)


# ---------------------------------------------------------------------------
# CSV output

def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return "nan"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def emit_csv(path, rows, columns) -> None:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_format_cell(row[c]) for c in columns))
    text = "\n".join(lines) + "\n"
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc}") from exc


FRAME_COLUMNS = (
    "frame", "action", "n_est", "n_data", "mu", "outage", "reward",
    "eff_mean", "min_sinr_db", "mean_sinr_db",
    "residual_jam_power", "noise_floor",
)


def frame_row(index: int, frame) -> dict:
    return {
        "frame": index,
        "action": frame.action,
        "n_est": frame.n_est,
        "n_data": frame.n_data,
        "mu": frame.mu,
        "outage": frame.outage,
        "reward": frame.reward,
        "eff_mean": float(frame.mu * frame.spec_eff.mean()),
        "min_sinr_db": float(frame.true_sinr_db.min()),
        "mean_sinr_db": float(frame.true_sinr_db.mean()),
        "residual_jam_power": frame.residual_jam_power,
        "noise_floor": frame.noise_floor,
    }


def rolling_mean(values, width: int = 500) -> np.ndarray:
    """Trailing mean over up to `width` latest entries, per position."""
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        return x
    csum = np.concatenate([[0.0], np.cumsum(x)])
    n = np.arange(1, x.size + 1)
    lo = np.maximum(n - width, 0)
    return (csum[n] - csum[lo]) / (n - lo)


# ---------------------------------------------------------------------------
# drivers

@dataclass
class EvalRecord:
    policy: str
    seed: int
    c_av_eff: float
    p_av_ot: float
    rows: list


def run_evaluation(config: ExperimentConfig, policy, seed: int,
                   frames: int = None, jam_power_w: float = None,
                   label: str = None) -> EvalRecord:
    n = config.eval_frames if frames is None else int(frames)
    if n < 1:
        raise NumericInputError("evaluation needs at least one frame")
    link_env = build_env(config, seed, jam_power_w)
    policy.attach(link_env)
    results = []
    rows = []
    for i in range(n):
        _, _, frame = link_env.step(policy.act(link_env))
        results.append(frame)
        rows.append(frame_row(i, frame))
    c_av, p_ot = metrics(results)
    return EvalRecord(
        policy=label or type(policy).__name__,
        seed=seed, c_av_eff=c_av, p_av_ot=p_ot, rows=rows,
    )


def run_fixed_average(config: ExperimentConfig, seed: int,
                      frames: int = None,
                      jam_power_w: float = None) -> tuple:
    """One record per grid action plus their plain average."""
    space = config.action_space()
    records = [
        run_evaluation(
            config, policies.FixedPolicy(a), seed, frames, jam_power_w,
            label=f"fixed-{a}",
        )
        for a in range(1, space.size + 1)
    ]
    avg = EvalRecord(
        policy="fixed-average",
        seed=seed,
        c_av_eff=float(np.mean([r.c_av_eff for r in records])),
        p_av_ot=float(np.mean([r.p_av_ot for r in records])),
        rows=[],
    )
    return records, avg


def make_eval_policy(config: ExperimentConfig, kind: str,
                     checkpoint=None, fixed_action: int = None):
    if kind == "fixed":
        return policies.FixedPolicy(fixed_action or 1)
    if kind == "upper-bound":
        return policies.UpperBoundPolicy()
    if kind == "heuristic":
        return policies.HeuristicPolicy()
    if kind == "learned":
        if checkpoint is None:
            raise ConfigError("learned policy needs --checkpoint")
        return policies.LearnedPolicy(checkpoint_path=checkpoint)
    raise ConfigError(f"unknown policy kind {kind!r}")


TRAIN_COLUMNS = (
    "iteration", "action", "reward", "reward_scaled", "epsilon", "loss",
    "mu", "outage", "eff_mean", "rolling_eff", "rolling_outage",
)


@dataclass
class TrainRecord:
    seed: int
    rows: list
    checkpoint_path: str
    params: agent.QNetworkParams
    normalizer: agent.ObservationNormalizer


def run_training(config: ExperimentConfig, seed: int, out_dir=None,
                 iterations: int = None, jam_power_w: float = None,
                 checkpoint_every: int = 1000,
                 trainer_hook=None) -> TrainRecord:
    import os

    n_iter = config.iterations if iterations is None else int(iterations)
    link_env = build_env(config, seed, jam_power_w)
    trainer = agent.Trainer(
        link_env, config.trainer, seed=seed,
        sizes=config.network_sizes(),
    )
    meta = {"history": config.trainer.history, "seed": seed}

    def save(tag):
        if out_dir is None:
            return None
        os.makedirs(out_dir, exist_ok=True)
        path = os.path.join(out_dir, f"checkpoint_{tag}.npz")
        agent.save_checkpoint(
            path, trainer.params, trainer.normalizer,
            extra={**meta, "iteration": trainer.iteration},
        )
        return path

    initial = save("0000000")
    effs, outs, rows = [], [], []
    for i in range(n_iter):
        if trainer_hook is not None:
            trainer_hook(i, trainer)
        diag = trainer.train_step()
        frame = diag["frame"]
        effs.append(frame.mu * float(frame.spec_eff.mean()))
        outs.append(float(frame.below_min.mean()))
        rows.append({
            "iteration": diag["iteration"],
            "action": diag["action"],
            "reward": diag["reward"],
            "reward_scaled": diag["reward_scaled"],
            "epsilon": diag["epsilon"],
            "loss": diag["loss"],
            "mu": frame.mu,
            "outage": frame.outage,
            "eff_mean": effs[-1],
            "rolling_eff": 0.0,
            "rolling_outage": 0.0,
        })
        if checkpoint_every and trainer.iteration % checkpoint_every == 0:
            save(f"{trainer.iteration:07d}")
    roll_e = rolling_mean(effs)
    roll_o = rolling_mean(outs)
    for i, row in enumerate(rows):
        row["rolling_eff"] = float(roll_e[i])
        row["rolling_outage"] = float(roll_o[i])
    final = save("final") if n_iter > 0 else initial
    return TrainRecord(
        seed=seed, rows=rows, checkpoint_path=final,
        params=trainer.params, normalizer=trainer.normalizer,
    )


def convergence_iteration(rolling, plateau_frac: float = 0.1,
                          tol: float = 0.05) -> tuple:
    """(first index staying within tol of the final plateau, plateau)."""
    roll = np.asarray(rolling, dtype=float)
    if roll.size == 0:
        raise NumericInputError("empty convergence window")
    tail = max(1, int(round(roll.size * plateau_frac)))
    plateau = float(roll[-tail:].mean())
    band = tol * abs(plateau)
    dev = np.abs(roll - plateau)
    # suffix maximum: largest deviation from here on
    suffix = np.maximum.accumulate(dev[::-1])[::-1]
    inside = suffix <= band
    idx = int(np.argmax(inside)) if inside.any() else roll.size - 1
    return idx, plateau


@dataclass
class SwitchRecord:
    seed: int
    rows: list
    switch_iteration: int
    converge_first: int
    converge_second: int
    plateau_first: float
    plateau_second: float
    checkpoint_path: str


def run_strategy_switch(config: ExperimentConfig, seed: int, out_dir=None,
                        iterations: int = None,
                        switch_iteration: int = None,
                        jam_power_w: float = None) -> SwitchRecord:
    n_iter = (2 * config.iterations) if iterations is None else int(iterations)
    switch_at = n_iter // 2 if switch_iteration is None else int(switch_iteration)
    if not 0 <= switch_at <= n_iter:
        raise ConfigError("switch iteration outside the training horizon")

    def hook(i, trainer):
        if i == switch_at:
            link_env = trainer.env
            sched = dataclasses.replace(
                link_env.params.jammers.schedule,
                switch_sample=link_env.sample_clock,
            )
            link_env.params = dataclasses.replace(
                link_env.params,
                jammers=dataclasses.replace(
                    link_env.params.jammers, schedule=sched
                ),
            )

    record = run_training(
        config, seed, out_dir=out_dir, iterations=n_iter,
        jam_power_w=jam_power_w, trainer_hook=hook,
    )
    # convergence is judged on the learning curve (rolling reward), per phase
    rewards = [row["reward"] for row in record.rows]
    first = rolling_mean(rewards[:switch_at])
    second = rolling_mean(rewards[switch_at:])
    conv1, plat1 = (
        convergence_iteration(first) if first.size else (0, float("nan"))
    )
    conv2, plat2 = (
        convergence_iteration(second) if second.size else (0, float("nan"))
    )
    return SwitchRecord(
        seed=seed, rows=record.rows, switch_iteration=switch_at,
        converge_first=conv1, converge_second=conv2,
        plateau_first=plat1, plateau_second=plat2,
        checkpoint_path=record.checkpoint_path,
    )


SWEEP_COLUMNS = ("policy", "jam_dbm", "seed", "c_av_eff", "p_av_ot")


def _sweep_point(args):
    config, kind, jam_dbm, seed, frames, checkpoint = args
    jam_w = 10.0 ** ((jam_dbm - 30.0) / 10.0)
    if kind == "fixed-average":
        _, avg = run_fixed_average(config, seed, frames, jam_w)
        rec = avg
    else:
        rec = run_evaluation(
            config, make_eval_policy(config, kind, checkpoint), seed,
            frames, jam_w, label=kind,
        )
    return {
        "policy": rec.policy,
        "jam_dbm": jam_dbm,
        "seed": seed,
        "c_av_eff": rec.c_av_eff,
        "p_av_ot": rec.p_av_ot,
    }


def run_sweep(config: ExperimentConfig, out_path=None,
              jam_powers_dbm=None, policy_kinds=None, seeds=None,
              frames: int = None, checkpoint=None, workers: int = 1):
    powers = tuple(
        SWEEP_POWERS_DBM if jam_powers_dbm is None else jam_powers_dbm
    )
    kinds = tuple(
        policy_kinds
        or (("fixed-average", "heuristic", "upper-bound")
            + (("learned",) if checkpoint else ()))
    )
    use_seeds = tuple(config.seeds if seeds is None else seeds)
    tasks = [
        (config, kind, float(dbm), int(seed), frames, checkpoint)
        for kind in kinds for dbm in powers for seed in use_seeds
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, tasks))
    else:
        rows = [_sweep_point(t) for t in tasks]
    rows.sort(key=lambda r: (r["policy"], r["jam_dbm"], r["seed"]))
    if out_path is not None:
        emit_csv(out_path, rows, SWEEP_COLUMNS)
    return rows
