"""
Command-line entry point: ``simulate``, ``augment``, ``train``, ``eval``, ``bench``.

Outputs go to ``--out`` (or the config's ``output``):

* ``simulate`` -> ``trajectory.csv``
* ``augment``  -> ``dataset/`` (``dataset.json`` + ``train/validation/test.csv``)
* ``train``    -> ``checkpoint.json`` and ``metrics.csv`` (reads ``dataset/``)
* ``eval``     -> ``eval.csv`` (reads ``dataset/`` and the checkpoint)
* ``bench``    -> ``report.json``, ``table2.csv``, ``snr.csv``, ``loss_curves.csv``
  and one checkpoint per intensity
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import pandas as pd

from . import analysis, augment as aug, dynamics as dyn, learner as lrn
from .config import ConfigError, RunConfig, default_yaml

DATASET_DIR = "dataset"
CHECKPOINT = "checkpoint.json"


class MissingArtifactError(RuntimeError):
    pass


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig.from_mapping()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output"] = str(args.out)
    return cfg.with_overrides(**overrides) if overrides else cfg


def _require(path: Path) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"missing upstream artifact: {path}")
    return path


def _load_splits(cfg: RunConfig):
    _require(cfg.output / DATASET_DIR / "dataset.json")
    try:
        splits, _ = aug.load_dataset(cfg.output / DATASET_DIR)
    except FileNotFoundError as exc:
        raise MissingArtifactError(str(exc)) from None
    return splits


def trajectory_frame(cfg: RunConfig, overrides: dict) -> pd.DataFrame:
    sim = cfg.simulate()
    sim.update({k: v for k, v in overrides.items() if v is not None})
    derived = dyn.derive(cfg.vehicle())
    axis = dyn.axis_index(sim["axis"])
    amplitude = sim["amplitude"]
    if amplitude is None:
        amplitude = sim["gamma"] * derived.inertia[axis]
    frames = []
    for mode in sim["modes"]:
        spec = dyn.DisturbanceSpec(mode, sim["axis"], float(amplitude), sim["frequency"],
                                   sim["phase"], sim["onset"])
        resp = dyn.respond_analytic(derived, spec, sim["duration"], sim["sample_rate"])
        frame = pd.DataFrame({"mode": mode, "t": resp.times})
        for k, name in enumerate(dyn.AXES):
            frame[name] = resp.angle[:, k]
        for k, name in enumerate(("p", "q", "r")):
            frame[name] = resp.rate[:, k]
        frames.append(frame)
    return pd.concat(frames, ignore_index=True)


def cmd_simulate(cfg: RunConfig, args) -> list:
    overrides = {
        "modes": [args.mode] if args.mode else None,
        "axis": args.axis,
        "amplitude": args.amplitude,
        "gamma": args.gamma,
        "frequency": args.frequency,
        "phase": args.phase,
        "duration": args.duration,
    }
    cfg.output.mkdir(parents=True, exist_ok=True)
    path = cfg.output / "trajectory.csv"
    with warnings.catch_warnings():
        warnings.simplefilter("always", dyn.SmallAngleWarning)
        frame = trajectory_frame(cfg, overrides)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    return [path]


def cmd_augment(cfg: RunConfig, args) -> list:
    dataset = aug.build_dataset(cfg.augment(), cfg.geo(), cfg.vehicle(), cfg.gyro(),
                                jobs=args.jobs)
    splits = aug.split(dataset, cfg.bench().split)
    return aug.save_dataset(splits, cfg.output / DATASET_DIR, dataset.provenance)


def cmd_train(cfg: RunConfig, args) -> list:
    train_set, val_set, _ = _load_splits(cfg)
    result = lrn.train(train_set, val_set, cfg.train())
    ckpt = lrn.save_params(result.params, cfg.output / CHECKPOINT)
    metrics = cfg.output / "metrics.csv"
    metrics.write_text(lrn.metrics_csv(result.metrics))
    return [ckpt, metrics]


def cmd_eval(cfg: RunConfig, args) -> list:
    _, _, test_set = _load_splits(cfg)
    ckpt = Path(args.checkpoint) if args.checkpoint else cfg.output / CHECKPOINT
    params = lrn.load_params(_require(ckpt))
    rows = []
    for method in cfg.bench().methods:
        if method == "learner":
            rmse = lrn.evaluate(params, test_set)
        else:
            rmse = analysis.baseline_rmse(test_set, method, cfg.filter())
        rows.append((method, rmse))
        print(f"{analysis.METHOD_LABELS[method]:<8s} {rmse:10.4f} deg")
    path = cfg.output / "eval.csv"
    path.write_text("method,rmse_deg\n" + "".join(f"{m},{r:.17g}\n" for m, r in rows))
    return [path]


def cmd_bench(cfg: RunConfig, args) -> list:
    report = analysis.run_benchmark(cfg.setup(), jobs=args.jobs)
    paths = analysis.write_report(report, cfg.output)
    print(analysis.table2_csv(report), end="")
    return paths


COMMANDS = {
    "simulate": (cmd_simulate, "write angle/rate responses to the excitation profiles"),
    "augment": (cmd_augment, "generate and split the labelled dataset"),
    "train": (cmd_train, "train the learned regressor on the augmented dataset"),
    "eval": (cmd_eval, "evaluate all methods on the test split"),
    "bench": (cmd_bench, "run the full method x intensity benchmark"),
}


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mems-gyrocompass",
        description="Gyrocompassing under vehicle dynamics: simulation, dataset "
                    "augmentation, denoising baselines and a learned estimator.",
    )
    parser.add_argument("--print-default-config", action="store_true",
                        help="print the default YAML config and exit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", metavar="PATH", help="YAML run config (defaults if omitted)")
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--jobs", type=_positive_int, default=1,
                       help="worker processes for dataset generation / bench cells")
        p.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
        if name == "simulate":
            p.add_argument("--mode", choices=dyn.MODES, help="simulate a single mode")
            p.add_argument("--axis", choices=dyn.AXES, help="forced axis")
            p.add_argument("--amplitude", type=float,
                           help="forcing amplitude [N m, or N m s for impulses]")
            p.add_argument("--gamma", type=float,
                           help="forcing intensity (amplitude / inertia) when no amplitude")
            p.add_argument("--frequency", type=float, help="sinusoid frequency [rad/s]")
            p.add_argument("--phase", type=float, help="sinusoid phase [rad]")
            p.add_argument("--duration", type=float, help="simulated time [s]")
        if name == "eval":
            p.add_argument("--checkpoint", metavar="PATH",
                           help="regressor checkpoint (default OUT/checkpoint.json)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_default_config:
        print(default_yaml(), end="")
        return 0
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    handler = COMMANDS[args.command][0]
    try:
        cfg = _load_config(args)
        paths = handler(cfg, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MissingArtifactError, lrn.CheckpointError, aug.ShapeError,
            analysis.BenchError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(f"wrote {path}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
