"""Command line front end.

Exit codes: 0 success, 2 configuration problem, 3 numeric failure.
"""

import argparse
import os
import sys

import numpy as np

from . import beamform, harness
from .errors import ConfigError, NumericError


def _add_common(p, frames=False, iterations=False):
    p.add_argument("--config", default=None, help="YAML config path")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output directory")
    if frames:
        p.add_argument("--frames", type=int, default=None)
    if iterations:
        p.add_argument("--iterations", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jamnull",
        description=(
            "Jamming-nullification link simulator with a reinforcement-"
            "learned frame controller"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "bounds", help="print closed-form spectral efficiency bounds")
    _add_common(p)

    p = sub.add_parser(
        "simulate", help="roll out one policy and write per-frame CSV")
    _add_common(p, frames=True)
    p.add_argument(
        "--policy", default="fixed",
        choices=("fixed", "heuristic", "upper-bound", "learned"))
    p.add_argument("--action", type=int, default=1,
                   help="grid action for the fixed policy")
    p.add_argument("--checkpoint", default=None)

    p = sub.add_parser("train", help="train the frame controller")
    _add_common(p, iterations=True)

    p = sub.add_parser(
        "evaluate", help="compare all policies on a common seed")
    _add_common(p, frames=True)
    p.add_argument("--checkpoint", default=None)

    p = sub.add_parser(
        "sweep", help="policy grid over jamming powers, CSV output")
    _add_common(p, frames=True)
    p.add_argument("--jam-powers", default=None,
                   help="comma-separated dBm list, e.g. 10,20,30")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser(
        "switch", help="train across a mid-run jammer strategy switch")
    _add_common(p, iterations=True)
    p.add_argument("--switch-at", type=int, default=None)
    return parser


def _out_dir(args) -> str:
    out = args.out or "runs"
    os.makedirs(out, exist_ok=True)
    return out


def _load(args) -> harness.ExperimentConfig:
    if args.config is None:
        return harness.config_from_dict({})
    return harness.load_config(args.config)


def cmd_bounds(args) -> int:
    config = _load(args)
    bounds = beamform.spectral_bounds(config.env_params().budget())
    print(f"noise variance      : {config.noise_var_w:.6g} W")
    print(f"path loss BS-UE     : {10 * np.log10(config.eta_ue):.4f} dB")
    print(f"path loss jammer-UE : {10 * np.log10(config.eta_jammer_ue):.4f} dB")
    print(f"c_lb  (nulled, reduced array) : {bounds.c_lb:.6f} bit/s/Hz")
    print(f"c_ub  (jamming-free)          : {bounds.c_ub:.6f} bit/s/Hz")
    print(f"c_wbf (full array, no nulling): {bounds.c_wbf:.6f} bit/s/Hz")
    return 0


def cmd_simulate(args) -> int:
    config = _load(args)
    policy = harness.make_eval_policy(
        config, args.policy, checkpoint=args.checkpoint,
        fixed_action=args.action,
    )
    record = harness.run_evaluation(
        config, policy, args.seed, args.frames, label=args.policy)
    out = _out_dir(args)
    path = os.path.join(out, f"frames_{args.policy}_seed{args.seed}.csv")
    harness.emit_csv(path, record.rows, harness.FRAME_COLUMNS)
    print(f"policy={record.policy} seed={record.seed} "
          f"c_av_eff={record.c_av_eff:.6f} p_av_ot={record.p_av_ot:.6f}")
    print(f"wrote {path}")
    return 0


def cmd_train(args) -> int:
    config = _load(args)
    out = _out_dir(args)
    record = harness.run_training(
        config, args.seed, out_dir=out, iterations=args.iterations)
    path = os.path.join(out, f"training_seed{args.seed}.csv")
    harness.emit_csv(path, record.rows, harness.TRAIN_COLUMNS)
    last = record.rows[-1] if record.rows else None
    if last is not None:
        print(f"iterations={last['iteration']} "
              f"rolling_eff={last['rolling_eff']:.6f} "
              f"rolling_outage={last['rolling_outage']:.6f}")
    print(f"checkpoint {record.checkpoint_path}")
    print(f"wrote {path}")
    return 0


def cmd_evaluate(args) -> int:
    config = _load(args)
    records = []
    _, fixed_avg = harness.run_fixed_average(config, args.seed, args.frames)
    records.append(fixed_avg)
    for kind in ("heuristic", "upper-bound"):
        records.append(harness.run_evaluation(
            config, harness.make_eval_policy(config, kind), args.seed,
            args.frames, label=kind))
    if args.checkpoint is not None:
        records.append(harness.run_evaluation(
            config,
            harness.make_eval_policy(
                config, "learned", checkpoint=args.checkpoint),
            args.seed, args.frames, label="learned"))
    for rec in records:
        print(f"policy={rec.policy:<13s} c_av_eff={rec.c_av_eff:.6f} "
              f"p_av_ot={rec.p_av_ot:.6f}")
    if args.out is not None:
        rows = [
            {"policy": r.policy, "jam_dbm": float("nan"), "seed": r.seed,
             "c_av_eff": r.c_av_eff, "p_av_ot": r.p_av_ot}
            for r in records
        ]
        path = os.path.join(_out_dir(args), f"evaluate_seed{args.seed}.csv")
        harness.emit_csv(path, rows, harness.SWEEP_COLUMNS)
        print(f"wrote {path}")
    return 0


def cmd_sweep(args) -> int:
    config = _load(args)
    powers = None
    if args.jam_powers is not None:
        try:
            powers = tuple(float(v) for v in args.jam_powers.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --jam-powers: {exc}") from exc
    out = _out_dir(args)
    path = os.path.join(out, "sweep.csv")
    rows = harness.run_sweep(
        config, out_path=path, jam_powers_dbm=powers,
        seeds=(args.seed,), frames=args.frames,
        checkpoint=args.checkpoint, workers=args.workers,
    )
    print(f"{len(rows)} sweep points")
    print(f"wrote {path}")
    return 0


def cmd_switch(args) -> int:
    config = _load(args)
    out = _out_dir(args)
    record = harness.run_strategy_switch(
        config, args.seed, out_dir=out, iterations=args.iterations,
        switch_iteration=args.switch_at,
    )
    path = os.path.join(out, f"switch_seed{args.seed}.csv")
    harness.emit_csv(path, record.rows, harness.TRAIN_COLUMNS)
    ratio = (
        record.converge_second / record.converge_first
        if record.converge_first > 0 else float("inf")
    )
    print(f"switch_at={record.switch_iteration} "
          f"converge_first={record.converge_first} "
          f"converge_second={record.converge_second} "
          f"ratio={ratio:.3f}")
    print(f"wrote {path}")
    return 0


COMMANDS = {
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "switch": cmd_switch,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
