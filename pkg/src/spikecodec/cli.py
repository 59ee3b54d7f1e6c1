"""Command line interface: encode, evaluate, train, infer, perturb.

Exit codes: 0 success, 2 usage or configuration error, 3 data/shape error,
4 numeric divergence during training.  Every command that takes --seed is
bitwise reproducible, and report files always carry the resolved
configuration plus the package version (git describe when available).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import subprocess
import sys

from . import __version__
from .core import EncodingConfig, Scheme, derive_seed
from .dataio import (
    CsvSchema,
    WindowedDataset,
    load_csv,
    normalize,
    read_spikes,
    synth_dataset,
    window,
    write_spikes,
)
from .errors import (
    ConfigError,
    DivergenceError,
    DomainError,
    EmptyDatasetError,
    SpikeCodecError,
)
from .evaluation import (
    DEFAULT_P_LIST,
    VARIANT_NAMES,
    encode_dataset,
    evaluate_scheme,
    mean_afr,
    variant_config,
)
from .metrics import NoiseMode, NoiseSpec, inject_noise, noise_mode_for
from .snn import (
    TrainConfig,
    classify_detailed,
    dataset_fingerprint,
    load_checkpoint,
    save_checkpoint,
    train,
)

SCHEME_CHOICES = VARIANT_NAMES + ("binary",)


def version_string() -> str:
    """git describe of the working tree when available, package version
    otherwise."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True, text=True, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except OSError:
        pass
    return f"spikecodec-{__version__}"


def _parse_thresholds(text):
    if not text:
        return None
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"bad --thresholds value {text!r}") from exc


def _load_dataset(args) -> WindowedDataset:
    """Windows from a CSV path, or a synthetic set when INPUT is "synth"."""
    if args.input == "synth":
        return synth_dataset(
            n_classes=args.classes,
            samples_per_class=args.samples_per_class,
            seed=args.synth_seed,
            sample_rate_hz=args.sample_rate,
            seconds=args.duration,
            n_users=args.users,
        )
    schema = CsvSchema(sample_rate_hz=args.sample_rate)
    records = load_csv(args.input, schema)
    records, _ = normalize(records)
    return window(records, schema.sample_rate_hz, seconds=args.duration,
                  stride_seconds=args.stride, labels=schema.labels)


def _dataset_args(sub):
    sub.add_argument("input", help='CSV path, or "synth" for a synthetic dataset')
    sub.add_argument("--duration", type=float, default=2.0,
                     help="window length in seconds (default 2)")
    sub.add_argument("--stride", type=float, default=None,
                     help="window stride in seconds (default: no overlap)")
    sub.add_argument("--sample-rate", type=float, default=20.0,
                     help="sample rate in Hz (default 20)")
    sub.add_argument("--classes", type=int, default=3,
                     help="synthetic: number of classes (default 3)")
    sub.add_argument("--samples-per-class", type=int, default=20,
                     help="synthetic: windows per class (default 20)")
    sub.add_argument("--users", type=int, default=4,
                     help="synthetic: user cohorts (default 4)")
    sub.add_argument("--synth-seed", type=int, default=42,
                     help="synthetic: generator seed (default 42)")


def _scheme_args(sub, single=True):
    if single:
        sub.add_argument("--scheme", required=True, choices=SCHEME_CHOICES,
                         help="encoding variant")
    sub.add_argument("--steps", type=int, default=50,
                     help="spike positions per sample for rate/TTFS (default 50)")
    sub.add_argument("--bits", type=int, default=6,
                     help='bit depth for the plain "binary" scheme (default 6)')
    sub.add_argument("--interp", type=int, default=5,
                     help="delta modulation up-sampling factor (default 5)")
    sub.add_argument("--thresholds", type=str, default=None,
                     help="comma-separated delta thresholds, one bank for all channels")
    sub.add_argument("--seed", type=int, default=0, help="encoding seed (default 0)")


def _train_args(sub):
    sub.add_argument("--epochs", type=int, default=100)
    sub.add_argument("--lr", type=float, default=1e-3)
    sub.add_argument("--batch", type=int, default=32)
    sub.add_argument("--train-seed", type=int, default=0)
    sub.add_argument("--holdout-user", type=str, default=None,
                     help="user held out as the test split (default: first user)")


def _config_from_args(args) -> EncodingConfig:
    return variant_config(args.scheme, steps_per_sample=args.steps,
                          n_bits=args.bits, interp_factor=args.interp,
                          thresholds=_parse_thresholds(args.thresholds),
                          seed=args.seed)


def _split(dataset: WindowedDataset, holdout_user):
    users = sorted(set(dataset.users))
    if holdout_user is None:
        holdout_user = users[0]
    return dataset.split_leave_one_user_out(holdout_user)


def _resolved_config(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _json_safe(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def _atomic_text(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def cmd_encode(args) -> int:
    dataset = _load_dataset(args)
    if len(dataset) == 0:
        raise EmptyDatasetError("no windows to encode")
    config = _config_from_args(args)
    os.makedirs(args.out, exist_ok=True)
    encoded = encode_dataset(dataset, config)
    for i, ((tensor, label), user) in enumerate(zip(encoded, dataset.users)):
        metadata = {
            "encoding": config,
            "label": int(label),
            "label_name": dataset.label_names[label],
            "user": user,
            "window_index": i,
        }
        write_spikes(tensor, metadata, os.path.join(args.out, f"w{i:05d}.spk"))
    print(f"scheme={args.scheme} windows={len(encoded)} "
          f"AFR={100.0 * mean_afr(encoded):.3f}%")
    return 0


def cmd_evaluate(args) -> int:
    dataset = _load_dataset(args)
    if len(dataset) == 0:
        raise EmptyDatasetError("no windows to evaluate")
    train_ds, test_ds = _split(dataset, args.holdout_user)
    names = [n.strip() for n in args.schemes.split(",") if n.strip()]
    for name in names:
        if name not in SCHEME_CHOICES:
            raise ConfigError(
                f"unknown scheme {name!r}; expected one of: {', '.join(SCHEME_CHOICES)}"
            )
    train_cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr,
                            batch_size=args.batch, seed=args.train_seed)
    rows = []
    for name in names:
        config = variant_config(name, steps_per_sample=args.steps,
                                n_bits=args.bits, interp_factor=args.interp,
                                thresholds=_parse_thresholds(args.thresholds),
                                seed=args.seed)
        row = evaluate_scheme(name, config, train_ds, test_ds, train_cfg,
                              noise_seeds=args.noise_seeds,
                              noise_seed_base=args.seed)
        rows.append(row)
        drops = " ".join(f"{p}:{d:+.3f}" for p, d in row.drops.items())
        print(f"{name:13s} shape={row.tensor_shape} step={row.time_step_ms:g}ms "
              f"AFR={row.afr_pct:.3f}% SNR={row.snr_db:.2f}dB "
              f"acc={row.accuracy:.3f} drops[{drops}]")

    os.makedirs(args.out, exist_ok=True)
    if args.report in ("json", "both"):
        report = {
            "version": version_string(),
            "config": _resolved_config(args),
            "rows": [
                {**r.to_dict(), "snr_db": _json_safe(r.snr_db)} for r in rows
            ],
        }
        _atomic_text(os.path.join(args.out, "report.json"),
                     json.dumps(report, indent=2, sort_keys=True) + "\n")
    if args.report in ("csv", "both"):
        header = ["scheme", "tensor_shape", "time_step_ms", "afr_pct", "snr_db",
                  "accuracy"]
        header += [f"drop_{p:g}" for p in DEFAULT_P_LIST]
        header += ["dynamic_energy", "execution_time", "version"]
        lines = [",".join(header)]
        for r in rows:
            cells = [
                r.scheme,
                "x".join(str(d) for d in r.tensor_shape),
                f"{r.time_step_ms:g}",
                f"{r.afr_pct:.6f}",
                f"{r.snr_db:.6f}",
                f"{r.accuracy:.6f}",
            ]
            cells += [f"{r.drops[p]:.6f}" for p in DEFAULT_P_LIST]
            cells += [r.dynamic_energy, r.execution_time, version_string()]
            lines.append(",".join(cells))
        _atomic_text(os.path.join(args.out, "report.csv"), "\n".join(lines) + "\n")
    return 0


def cmd_train(args) -> int:
    dataset = _load_dataset(args)
    if len(dataset) == 0:
        raise EmptyDatasetError("no windows to train on")
    train_ds, test_ds = _split(dataset, args.holdout_user)
    config = _config_from_args(args)
    encoded_train = encode_dataset(train_ds, config, derive_seed(config.seed, 1))
    encoded_test = encode_dataset(test_ds, config, derive_seed(config.seed, 2))

    sample = encoded_train[0][0]
    n_features = sample.n_trains * sample.n_channels
    from .snn import CubaNetwork  # local import keeps module top light

    net = CubaNetwork((n_features, 256, 64, dataset.n_classes),
                      dropout_p=0.1, seed=args.train_seed)
    train_cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr,
                            batch_size=args.batch, seed=args.train_seed)
    result = train(net, encoded_train, train_cfg, test_set=encoded_test)

    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "checkpoint.cuba")
    save_checkpoint(result.net, ckpt, train_config=train_cfg, sidecar_extra={
        "encoding": config.to_dict(),
        "label_names": list(dataset.label_names),
        "dataset_fingerprint": dataset_fingerprint(encoded_train),
        "best_epoch": result.best_epoch,
        "best_test_accuracy": result.best_test_accuracy,
        "provenance_version": version_string(),
    })
    lines = ["epoch,loss,train_accuracy,test_accuracy"]
    lines += [
        f"{h.epoch},{h.loss:.8f},{h.train_accuracy:.6f},{h.test_accuracy:.6f}"
        for h in result.history
    ]
    _atomic_text(os.path.join(args.out, "history.csv"), "\n".join(lines) + "\n")
    print(f"best epoch {result.best_epoch}: "
          f"test accuracy {result.best_test_accuracy:.3f} -> {ckpt}")
    return 0


def cmd_infer(args) -> int:
    net, sidecar = load_checkpoint(args.checkpoint)
    label_names = sidecar.get("label_names")
    for path in args.spikes:
        tensor, _ = read_spikes(path)
        result = classify_detailed(net, tensor)
        record = {
            "file": path,
            "class": result.label,
            "rates": [round(float(r), 6) for r in result.rates],
            "no_spikes": result.no_spikes,
        }
        if label_names and result.label < len(label_names):
            record["label_name"] = label_names[result.label]
        print(json.dumps(record, sort_keys=True))
    return 0


def cmd_perturb(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    for i, path in enumerate(args.spikes):
        tensor, metadata = read_spikes(path)
        if args.mode == "auto":
            scheme_name = (metadata.get("encoding") or {}).get("scheme")
            mode = (noise_mode_for(Scheme.from_string(scheme_name))
                    if scheme_name else NoiseMode.FLIP_BINARY)
        else:
            mode = NoiseMode(args.mode)
        spec = NoiseSpec(args.noise_p, seed=derive_seed(args.seed, i), mode=mode)
        noisy = inject_noise(tensor, spec)
        out_path = os.path.join(args.out, os.path.basename(path))
        metadata = dict(metadata)
        metadata["noise"] = {"error_probability": args.noise_p,
                             "seed": args.seed, "mode": mode.value}
        write_spikes(noisy, metadata, out_path)
    print(f"perturbed {len(args.spikes)} file(s) at p={args.noise_p}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spikecodec",
        description="Encode sensor signals into spike trains, evaluate the "
                    "schemes, and train a spiking classifier.",
    )
    parser.add_argument("--version", action="version", version=version_string())
    subs = parser.add_subparsers(dest="command", required=True)

    enc = subs.add_parser("encode", help="encode windows into SPK1 spike files")
    _dataset_args(enc)
    _scheme_args(enc)
    enc.add_argument("--out", required=True, help="output directory")
    enc.set_defaults(func=cmd_encode)

    ev = subs.add_parser("evaluate", help="full per-scheme evaluation report")
    _dataset_args(ev)
    ev.add_argument("--schemes", default=",".join(VARIANT_NAMES),
                    help="comma-separated variant list (default: all eight)")
    _scheme_args(ev, single=False)
    _train_args(ev)
    ev.add_argument("--noise-seeds", type=int, default=1,
                    help="error draws averaged per robustness cell (default 1)")
    ev.add_argument("--report", choices=("csv", "json", "both"), default="both")
    ev.add_argument("--out", required=True, help="report directory")
    ev.set_defaults(func=cmd_evaluate)

    tr = subs.add_parser("train", help="train the classifier on one scheme")
    _dataset_args(tr)
    _scheme_args(tr)
    _train_args(tr)
    tr.add_argument("--out", required=True, help="checkpoint directory")
    tr.set_defaults(func=cmd_train)

    inf = subs.add_parser("infer", help="classify spike files with a checkpoint")
    inf.add_argument("checkpoint")
    inf.add_argument("spikes", nargs="+", help="SPK1 files")
    inf.set_defaults(func=cmd_infer)

    pert = subs.add_parser("perturb", help="inject spike errors into spike files")
    pert.add_argument("spikes", nargs="+", help="SPK1 files")
    pert.add_argument("--noise-p", type=float, required=True)
    pert.add_argument("--seed", type=int, default=0)
    pert.add_argument("--mode", choices=("auto", "flip-binary", "signed-perturb"),
                      default="auto")
    pert.add_argument("--out", required=True, help="output directory")
    pert.set_defaults(func=cmd_perturb)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except (SpikeCodecError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
