"""Command-line entry point: ``sms bench-encoding|gen-data|train|evaluate|presets``.

Exit status is 0 on success, 2 when the configuration is invalid, 1 for any other failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, checkpoint
from . import config as config_mod
from .config import ConfigError, ExperimentConfig
from .marching import build_dataset, export_series, save_dataset_cache
from .pipeline import BENCH_SEEDS, BENCH_STEPS, bench_encoding, evaluate, fit, reference_trajectory
from .solvers import Trajectory, load_trajectory, save_trajectory, subsample

log = logging.getLogger("sms")

REFERENCE = "reference.traj"
REFERENCE_SUB = "reference_sub.traj"
CHECKPOINT = "checkpoint.bin"


class CommandError(RuntimeError):
    pass


def _csv_text(rows: list[dict], header: list[str]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return buf.getvalue()


def _load_config(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError("give either --config or --preset, not both")
    if args.config:
        cfg = config_mod.load(args.config)
    elif args.preset:
        cfg = config_mod.preset(args.preset)
    else:
        raise ConfigError("a --config file or --preset name is required")
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(args, cfg: ExperimentConfig | None) -> Path:
    if args.out:
        out = Path(args.out)
    elif cfg is not None and cfg.out_dir:
        out = Path(cfg.out_dir)
    else:
        out = Path("runs") / (cfg.name if cfg is not None else "bench")
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_manifest(out: Path, command: str, cfg: ExperimentConfig | None, seed, started: float,
                   files: list[Path]) -> Path:
    missing = [str(f) for f in files if not Path(f).exists()]
    if missing:
        raise CommandError(f"manifest lists missing files: {missing}")
    manifest = {
        "command": command,
        "config_hash": cfg.digest() if cfg is not None else None,
        "seed": seed,
        "started_at": datetime.fromtimestamp(started, timezone.utc).isoformat(),
        "wall_clock_seconds": round(time.time() - started, 3),
        "files": sorted(Path(f).name for f in files),
        "version": f"sms {__version__}",
    }
    path = out / f"manifest-{command}.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def cmd_bench_encoding(args) -> int:
    started = time.time()
    cfg = _load_config(args) if (args.config or args.preset) else None
    base = args.seed if args.seed is not None else 0
    seeds = [base + s for s in BENCH_SEEDS]
    rows = bench_encoding(args.steps, seeds)
    out = _out_dir(args, cfg)
    path = out / "encoding_errors.csv"
    path.write_text(_csv_text(rows, ["encoder", "seed", "steps", "l2", "rel_l2"]))
    print(f"{'encoder':<18}{'seed':>6}{'#T':>6}{'L2':>14}{'relative L2':>14}")
    for r in rows:
        print(f"{r['encoder']:<18}{r['seed']!s:>6}{r['steps']:>6}{r['l2']:>14.4e}{r['rel_l2']:>14.4e}")
    write_manifest(out, "bench-encoding", cfg, base, started, [path])
    return 0


def cmd_gen_data(args) -> int:
    started = time.time()
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    traj = reference_trajectory(cfg)
    sub = subsample(traj, cfg.subsample)
    files = [save_trajectory(traj, out / REFERENCE), save_trajectory(sub, out / REFERENCE_SUB)]
    log.info("wrote %d-row reference and %d-row sub-sampled trajectory", traj.n_rows, sub.n_rows)
    write_manifest(out, "gen-data", cfg, cfg.seed, started, files)
    return 0


def _reference(out: Path) -> Trajectory:
    path = out / REFERENCE
    if not path.exists():
        raise CommandError(f"{path} not found; run `sms gen-data` first")
    return load_trajectory(path)


def cmd_train(args) -> int:
    started = time.time()
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    train_ds, _ = build_dataset(_reference(out), cfg.march_config())
    log.info("training on %d samples, %d channels, #T=%d", len(train_ds), train_ds.channels,
             cfg.encoder_config().steps)
    net, history = fit(cfg, train_ds)
    files = save_dataset_cache(train_ds, out / "dataset")
    files.append(checkpoint.save(net, train_ds.ranges, out / CHECKPOINT))
    loss_path = out / "loss_history.csv"
    loss_path.write_text(_csv_text([{"epoch": i + 1, "loss": v} for i, v in enumerate(history)],
                                   ["epoch", "loss"]))
    files.append(loss_path)
    if history:
        print(f"loss: first epoch {history[0]:.6g}, last epoch {history[-1]:.6g}")
    write_manifest(out, "train", cfg, cfg.seed, started, files)
    return 0


def cmd_evaluate(args) -> int:
    started = time.time()
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    ckpt_path = Path(args.checkpoint) if args.checkpoint else out / CHECKPOINT
    if not ckpt_path.exists():
        raise CommandError(f"{ckpt_path} not found; run `sms train` first")
    ref = _reference(out)
    channels = cfg.window * ref.values.shape[1]
    net, ranges = checkpoint.load(ckpt_path, (cfg.encoder_config().steps, channels, channels))
    if net.hidden != cfg.hidden:
        raise CommandError(f"checkpoint hidden size {net.hidden} does not match config {cfg.hidden}")
    if (ranges is None) != (cfg.encoder == "float32"):
        raise CommandError("checkpoint normalization ranges do not match the configured encoder")
    train_ds, test_ds = build_dataset(ref, replace(cfg.march_config(), ranges=ranges))
    result = evaluate(net, train_ds, test_ds)

    files = [export_series(result.one_step, out / "one_step.csv"),
             export_series(result.cascade.series, out / "cascade.csv")]
    sub = train_ds.reference
    one_rows = sub.values.copy()
    steps = list(train_ds.steps) + list(test_ds.steps)
    one_rows[steps] = result.one_step_values
    files.append(save_trajectory(Trajectory(one_rows, sub.dt, sub.kind), out / "one_step_trajectory.traj"))
    files.append(save_trajectory(result.cascade.trajectory, out / "cascade_trajectory.traj"))
    summary = result.summary()
    summary_path = out / "summary.csv"
    summary_path.write_text(_csv_text(summary, ["mode", "regime", "count", "mean", "max"]))
    files.append(summary_path)

    print(f"{'mode':<10}{'regime':<15}{'n':>6}{'mean':>14}{'max':>14}")
    for r in summary:
        print(f"{r['mode']:<10}{r['regime']:<15}{r['count']:>6}{r['mean']:>14.4e}{r['max']:>14.4e}")
    if result.cascade.diverged_step is not None:
        print(f"cascade diverged at step {result.cascade.diverged_step}")
    write_manifest(out, "evaluate", cfg, cfg.seed, started, files)
    return 0


def cmd_presets(args) -> int:
    table = config_mod.presets()
    write_dir = Path(args.write) if args.write else None
    if write_dir:
        write_dir.mkdir(parents=True, exist_ok=True)
    for name, cfg in table.items():
        print(f"== {name}: {config_mod.describe(name)}")
        text = config_mod.serialize(cfg)
        print(text)
        if write_dir:
            (write_dir / f"{name}.ini").write_text(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sms", description="Spiking-network time-marching experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="experiment config file (INI format)")
        p.add_argument("--preset", help="built-in preset name instead of --config")
        p.add_argument("--seed", type=int, help="override the training seed")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("bench-encoding", help="compare encoder round-trip errors on a Gaussian signal")
    common(p)
    p.add_argument("--steps", type=int, default=BENCH_STEPS, help="spike-train length #T (default %(default)s)")
    p.set_defaults(func=cmd_bench_encoding)

    for name, func, text in (("gen-data", cmd_gen_data, "generate reference trajectories"),
                             ("train", cmd_train, "train the network on the reference data"),
                             ("evaluate", cmd_evaluate, "one-step and cascade evaluation")):
        p = sub.add_parser(name, help=text)
        common(p)
        if name == "evaluate":
            p.add_argument("--checkpoint", help="checkpoint path (default: <out>/checkpoint.bin)")
        p.set_defaults(func=func)

    p = sub.add_parser("presets", help="list the built-in experiment configs")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.add_argument("--write", metavar="DIR", help="also write each preset as DIR/<name>.ini")
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a failed command
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
