"""Command-line surface: synth | train | evaluate | infer | bench-scan.

Configuration comes from an optional JSON file (flat keys) overridden by
flags; flags win. Exit codes: 0 ok, 2 config error, 3 numeric failure,
4 I/O error.
"""

import argparse
import csv
import hashlib
import json
import sys

from . import bench
from .autodiff import NonFiniteError
from .container import ContainerError
from .data import generate_dataset, load_clip
from .model import Model, ModelConfig, ModelError
from .train import (
    ConfigError,
    NumericError,
    TrainConfig,
    config_hash,
    evaluate,
    infer,
    train,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

MODEL_KEYS = (
    "depth",
    "channels",
    "expansion",
    "state_size",
    "input_hw",
    "frames_per_segment",
)
TRAIN_KEYS = (
    "lr",
    "beta1",
    "beta2",
    "weight_decay",
    "epochs",
    "batch_size",
    "seed",
    "loss_a",
    "loss_b",
    "augment",
    "dtype",
)


def _load_config_file(path):
    if path is None:
        return {}
    with open(path) as f:
        cfg = json.load(f)
    unknown = set(cfg) - set(MODEL_KEYS) - set(TRAIN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def _build_configs(args):
    base = _load_config_file(getattr(args, "config", None))
    model_kwargs = {k: base[k] for k in MODEL_KEYS if k in base}
    train_kwargs = {k: base[k] for k in TRAIN_KEYS if k in base}
    train_kwargs["frames_per_segment"] = model_kwargs.get("frames_per_segment", 160)
    for k in MODEL_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            model_kwargs[k] = v
    for k in TRAIN_KEYS:
        v = getattr(args, k, None)
        if v is not None:
            train_kwargs[k] = v
    if "frames_per_segment" in model_kwargs:
        train_kwargs["frames_per_segment"] = model_kwargs["frames_per_segment"]
    return ModelConfig(**model_kwargs), TrainConfig(**train_kwargs)


def _write_csv(path, fieldnames, rows, hash_text):
    with open(path, "w", newline="") as f:
        f.write(f"# config_hash={hash_text}\n")
        wr = csv.DictWriter(f, fieldnames=fieldnames)
        wr.writeheader()
        wr.writerows(rows)


def cmd_synth(args):
    made = generate_dataset(
        args.out,
        n_train=args.train,
        n_test=args.test,
        frames=args.frames,
        hw=args.hw,
        fs=args.fs,
        hr_range=(args.hr_lo, args.hr_hi),
        modulation=args.modulation,
        noise=args.noise,
        jitter=args.jitter,
        seed=args.seed,
    )
    print(f"wrote {args.train} train clips to {made['train']}")
    print(f"wrote {args.test} test clips to {made['test']}")
    return EXIT_OK


def cmd_train(args):
    model_cfg, train_cfg = _build_configs(args)
    model, manifest = train(model_cfg, train_cfg, args.data, args.out)
    print(f"checkpoint: {manifest.checkpoint}")
    print(f"final epoch loss: {manifest.epoch_losses[-1]:.4f}")
    return EXIT_OK


def cmd_evaluate(args):
    model = Model.load(args.checkpoint)
    summary, rows = evaluate(model, args.data, max_len=args.max_len)
    hash_text = config_hash(model.cfg)
    _write_csv(
        args.out,
        ["clip_id", "gt_hr", "pred_hr", "mae_contrib", "snr_db"],
        rows,
        hash_text,
    )
    print(
        f"MAE {summary.mae:.2f} bpm  RMSE {summary.rmse:.2f}  "
        f"MAPE {summary.mape:.2f}%  rho {summary.pearson:.3f}  "
        f"SNR {summary.snr_db:.2f} dB"
    )
    print(f"per-clip rows: {args.out}")
    return EXIT_OK


def cmd_infer(args):
    model = Model.load(args.checkpoint)
    clip = load_clip(args.clip)
    result = infer(model, clip)
    wave = result["wave"]
    hash_text = config_hash(model.cfg)
    with open(args.out, "w", newline="") as f:
        f.write(f"# config_hash={hash_text}\n")
        f.write(f"# hr_bpm={result['hr_bpm']:.2f} snr_db={result['snr_db']:.2f}\n")
        wr = csv.writer(f)
        wr.writerow(["t", "bvp"])
        for i, v in enumerate(wave.samples):
            wr.writerow([f"{i / wave.fs:.6f}", f"{v:.8f}"])
    print(f"hr: {result['hr_bpm']:.2f} bpm (snr {result['snr_db']:.2f} dB)")
    for flag in result["flags"]:
        print(f"flag: {flag}")
    return EXIT_OK


def cmd_bench_scan(args):
    lengths = [int(x) for x in args.lengths.split(",")]
    modes = args.modes.split(",")
    backends = args.backends.split(",") if args.backends else None
    for m in modes:
        if m not in bench.MODES:
            raise ConfigError(f"unknown mode {m!r}")
    rows = bench.bench_scan(
        lengths,
        modes=modes,
        backends=backends,
        state_size=args.state_size,
        chunk=args.chunk,
        repeats=args.repeats,
    )
    diff = bench.check_equivalence(state_size=args.state_size, chunk=args.chunk)
    settings = json.dumps(vars(args), default=str, sort_keys=True)
    hash_text = hashlib.sha256(settings.encode()).hexdigest()[:16]
    _write_csv(
        args.out,
        ["backend", "mode", "L", "wall-time-ns", "peak-bytes"],
        [
            {
                "backend": r["backend"],
                "mode": r["mode"],
                "L": r["L"],
                "wall-time-ns": r["wall_time_ns"],
                "peak-bytes": r["peak_bytes"],
            }
            for r in rows
        ],
        hash_text,
    )
    for mode in modes:
        for backend in {r["backend"] for r in rows}:
            sel = [r for r in rows if r["mode"] == mode and r["backend"] == backend]
            if len(sel) >= 3:
                slope = bench.loglog_slope(
                    [r["L"] for r in sel], [r["wall_time_ns"] for r in sel]
                )
                print(f"{backend}/{mode}: log-log slope {slope:.3f}")
    print(f"parallel-vs-sequential max diff: {diff:.2e}")
    print(f"rows: {args.out}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="campulse",
        description="Pulse-wave recovery from video via a selective state-space core",
    )
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic clip dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--train", type=int, default=40)
    s.add_argument("--test", type=int, default=20)
    s.add_argument("--frames", type=int, default=160)
    s.add_argument("--hw", type=int, default=32)
    s.add_argument("--fs", type=float, default=30.0)
    s.add_argument("--hr-lo", type=float, default=50.0)
    s.add_argument("--hr-hi", type=float, default=120.0)
    s.add_argument("--modulation", type=float, default=0.01)
    s.add_argument("--noise", type=float, default=0.005)
    s.add_argument("--jitter", type=float, default=0.03)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train on a clip directory")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--config", help="JSON config file; flags override it")
    for k in MODEL_KEYS:
        t.add_argument(f"--{k.replace('_', '-')}", type=int, dest=k)
    t.add_argument("--lr", type=float, dest="lr")
    t.add_argument("--beta1", type=float, dest="beta1")
    t.add_argument("--beta2", type=float, dest="beta2")
    t.add_argument("--weight-decay", type=float, dest="weight_decay")
    t.add_argument("--epochs", type=int, dest="epochs")
    t.add_argument("--batch-size", type=int, dest="batch_size")
    t.add_argument("--seed", type=int, dest="seed")
    t.add_argument("--loss-a", type=float, dest="loss_a")
    t.add_argument("--loss-b", type=float, dest="loss_b")
    t.add_argument("--augment", type=int, dest="augment")
    t.add_argument("--dtype", choices=("f32", "f64"), dest="dtype")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="metrics over a test directory")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True, help="per-clip metrics CSV")
    e.add_argument("--max-len", type=int, default=None)
    e.set_defaults(func=cmd_evaluate)

    i = sub.add_parser("infer", help="pulse wave + HR for one clip")
    i.add_argument("--checkpoint", required=True)
    i.add_argument("--clip", required=True)
    i.add_argument("--out", required=True, help="waveform CSV (t, bvp)")
    i.set_defaults(func=cmd_infer)

    b = sub.add_parser("bench-scan", help="time the scan kernels across L")
    b.add_argument("--out", required=True)
    b.add_argument(
        "--lengths",
        default="1024,2048,4096,8192,16384,32768,65536,131072,262144",
    )
    b.add_argument("--modes", default="sequential,parallel")
    b.add_argument("--backends", default=None, help="e.g. numba,numpy")
    b.add_argument("--state-size", type=int, default=16)
    b.add_argument("--chunk", type=int, default=64)
    b.add_argument("--repeats", type=int, default=3)
    b.set_defaults(func=cmd_bench_scan)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ModelError, json.JSONDecodeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, NonFiniteError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ContainerError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
