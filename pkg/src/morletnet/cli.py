"""Command-line entry point: ``morletnet <subcommand> [options]``.

Exit codes: 0 success, 1 usage error, 2 data or contract error.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .confmap import confidence_map
from .dataio import (
    SignalSet,
    read_dataset_csv,
    read_json,
    write_dataset_csv,
    write_json,
    write_rows_csv,
)
from .errors import ContractError, MorletNetError
from .experiments import proxy_patches, run_trial
from .gradcheck import gradcheck
from .imagery import build_slice_dataset, load_patch, load_patch_manifest, parse_label
from .models import KINDS, Model, build_model, preset_spec
from .pgm import to_8bit, write_pgm
from .synth import SyntheticConfig, make_dataset, to_signal_set
from .training import (
    TrainConfig,
    derive_rngs,
    evaluate,
    fit_bank_statistics,
    preset_train_config,
    summarize,
    train,
)

log = logging.getLogger("morletnet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _seed_range(text):
    """``0..9`` (inclusive) or a comma list ``0,3,5``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        return [int(s) for s in text.split(",") if s]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad seed list {text!r}") from None


def _load_config(path):
    if not path:
        return {}
    cfg = read_json(path)
    unknown = set(cfg) - {"model", "train", "data"}
    if unknown:
        raise ContractError(f"config: unknown section(s) {sorted(unknown)}")
    return cfg


def _out_dir(path):
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


# --------------------------------------------------------------------------
# subcommands

def cmd_synth(args):
    conf = _load_config(args.config).get("data", {})
    cfg = replace(SyntheticConfig(seed=args.seed), **conf)
    for name in ("noise_std", "test_noise_std", "n_train", "n_test"):
        if getattr(args, name) is not None:
            setattr(cfg, name, getattr(args, name))
    train_s, test_s = make_dataset(cfg)
    out = _out_dir(args.out)
    tr, te = to_signal_set(train_s), to_signal_set(test_s)
    write_dataset_csv(out / "train.csv", tr.signals, tr.labels)
    write_dataset_csv(out / "test.csv", te.signals, te.labels)
    write_json(out / "manifest.json", {
        "generator": "synthetic", "config": cfg.to_dict(), "seed": cfg.seed,
        "sample_rate": cfg.sample_rate, "n_samples": cfg.n_samples,
        "counts": {"train": np.bincount(tr.labels, minlength=2).tolist(),
                   "test": np.bincount(te.labels, minlength=2).tolist()},
        "provenance": {"train": [s.provenance for s in train_s],
                       "test": [s.provenance for s in test_s]},
    })
    print(f"wrote {len(tr)} train and {len(te)} test signals to {out}")
    return 0


def cmd_proxy_patches(args):
    out = _out_dir(args.out)
    rng = np.random.default_rng(args.seed)
    kw = {} if args.noise_std is None else {"noise_std": args.noise_std}
    train_p, test_p = proxy_patches(rng, args.n_wave, args.n_cloud, args.test_fraction, **kw)
    entries = []
    for split, patches in (("train", train_p), ("test", test_p)):
        for p in patches:
            name = f"{p.source_id}.pgm"
            write_pgm(out / name, to_8bit(p.pixels))
            entries.append({"path": name, "label": "wave" if p.label else "cloud",
                            "split": split, "id": p.source_id})
    write_json(out / "patches.json", entries)
    print(f"wrote {len(entries)} patches and patches.json to {out}")
    return 0


def cmd_slice(args):
    splits = load_patch_manifest(args.manifest)
    if "train" not in splits:
        raise ContractError("manifest has no training patches")
    out = _out_dir(args.out)
    rng = np.random.default_rng(args.seed)
    slices, counts = {}, {}
    for split in ("train", "test"):
        if split not in splits:
            continue
        ds = build_slice_dataset(splits[split], rng)
        write_dataset_csv(out / f"{split}.csv", ds.signals, ds.labels)
        slices[split] = ds.manifest
        counts[split] = np.bincount(ds.labels, minlength=2).tolist()
        print(f"{split}: {len(ds)} slices from {len(splits[split])} patches")
    write_json(out / "slices.json", {"sample_rate": ds.sample_rate, "slices": slices})
    write_json(out / "manifest.json", {"generator": "slices", "seed": args.seed,
                                       "sample_rate": ds.sample_rate, "counts": counts,
                                       "source_manifest": str(args.manifest)})
    return 0


def _read_data_dir(path) -> tuple[SignalSet, SignalSet]:
    d = Path(path)
    return read_dataset_csv(d / "train.csv"), read_dataset_csv(d / "test.csv")


def _train_setup(args):
    conf = _load_config(args.config)
    spec = replace(preset_spec(args.model, args.preset), **conf.get("model", {}))
    data_rng, init_rng, shuffle_seed = derive_rngs(args.seed)
    cfg = replace(preset_train_config(args.preset, seed=shuffle_seed), **conf.get("train", {}))
    for flag, field_ in (("epochs", "epochs"), ("batch_size", "batch_size"),
                         ("lr_wavelet", "lr_wavelet"), ("lr_other", "lr_other")):
        if getattr(args, flag, None) is not None:
            setattr(cfg, field_, getattr(args, flag))
    return spec, cfg, init_rng, conf


def _report_files(out, model, report):
    write_json(out / "model.json", model.to_dict())
    write_json(out / "report.json", report.to_dict())
    header, rows = report.curve_rows()
    write_rows_csv(out / "curves.csv", header, rows)


def cmd_train(args):
    spec, cfg, init_rng, conf = _train_setup(args)
    start = time.perf_counter()
    data = _read_data_dir(args.data) if args.data else None
    if data is not None and data[0].signals.shape[2] != spec.input_length:
        raise ContractError(f"data length {data[0].signals.shape[2]} does not match "
                            f"model input length {spec.input_length}")
    if data is None:
        model, report = run_trial(args.model, args.preset, args.seed,
                                  spec_overrides=conf.get("model"),
                                  train_overrides={k: getattr(cfg, k) for k in
                                                   ("epochs", "batch_size", "lr_wavelet", "lr_other")},
                                  data_overrides=conf.get("data"))
    else:
        model = build_model(spec, init_rng)
        report = train(model, data[0], data[1], cfg)
        report.seed = args.seed
    out = _out_dir(args.out)
    _report_files(out, model, report)
    log.info("trained in %.1f s", time.perf_counter() - start)
    print(json.dumps({"status": report.status, "test_accuracy": report.final_test.accuracy,
                      "final_f": report.f_trajectory[-1] if report.f_trajectory else []}))
    return 0 if report.status == "ok" else 2


def cmd_trials(args):
    conf = _load_config(args.config)
    out = _out_dir(args.out) if args.out else None
    acc, summaries = [], []
    train_over = {}
    if args.epochs is not None:
        train_over["epochs"] = args.epochs
    for seed in args.seeds:
        model, report = run_trial(args.model, args.preset, seed,
                                  spec_overrides=conf.get("model"),
                                  train_overrides={**conf.get("train", {}), **train_over},
                                  data_overrides=conf.get("data"))
        acc.append(report.final_test.accuracy)
        summaries.append({"seed": seed, "status": report.status,
                          "test_accuracy": report.final_test.accuracy,
                          "final_f": report.f_trajectory[-1]})
        if out:
            seed_dir = _out_dir(out / f"seed_{seed}")
            _report_files(seed_dir, model, report)
        print(f"seed {seed}: test accuracy {report.final_test.accuracy:.4f}", flush=True)
    summary = {"model": args.model, "preset": args.preset, "seeds": args.seeds,
               "test_accuracy": summarize(acc), "trials": summaries}
    if out:
        write_json(out / "summary.json", summary)
    s = summary["test_accuracy"]
    print(f"test accuracy {100 * s['mean']:.2f} +/- {100 * s['std']:.2f} % (max {100 * s['max']:.2f} %)")
    return 0


def _load_model(path) -> Model:
    return Model.from_dict(read_json(path))


def cmd_eval(args):
    model = _load_model(args.model)
    data = read_dataset_csv(Path(args.data) / f"{args.split}.csv") if Path(args.data).is_dir() \
        else read_dataset_csv(args.data)
    if data.signals.shape[2] != model.spec.input_length:
        raise ContractError("data length does not match the model input length")
    metrics = evaluate(model, data).to_dict()
    text = json.dumps(metrics, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return 0


def cmd_confmap(args):
    model = _load_model(args.model)
    patch = load_patch(args.patch, parse_label(args.label))
    cmap = confidence_map(model, patch)
    out = _out_dir(args.out)
    stem = Path(args.patch).stem
    with open(out / f"{stem}_confmap.csv", "w") as fh:
        for row in cmap.values:
            fh.write(",".join(format(float(v), ".17g") for v in row) + "\n")
    write_pgm(out / f"{stem}_confmap.pgm", to_8bit(cmap.values))
    header = cmap.header()
    header.update(patch=str(args.patch), max=float(cmap.values.max()))
    write_json(out / f"{stem}_confmap.json", header)
    print(f"max confidence {cmap.values.max():.4f}")
    return 0


def cmd_gradcheck(args):
    spec = preset_spec(args.model, args.preset)
    if args.input_length:
        spec.input_length = args.input_length
    if args.model == "wavenet" and args.train_width:
        spec.w_trainable = True
    data_rng, init_rng, _ = derive_rngs(args.seed)
    model = build_model(spec, init_rng)
    x = data_rng.normal(size=(args.batch, 1, spec.input_length))
    y = np.arange(args.batch) % spec.n_classes
    if model.kind == "banknet":
        fit_bank_statistics(model, x)
    report = gradcheck(model, x, y, step=args.step)
    print(json.dumps({"max_rel_error": report.max_rel_error, "n_checked": report.n_checked,
                      "worst": report.worst, "per_param": report.per_param}, indent=2))
    return 0 if report.max_rel_error < args.tolerance else 2


# --------------------------------------------------------------------------

def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="JSON file with 'model', 'train', 'data' overrides")
    common.add_argument("--preset", choices=("simplified", "gw"), default="simplified")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="morletnet", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    p = sub.add_parser("synth", parents=[common], help="generate the two-class synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--test-noise-std", type=float)
    p.add_argument("--n-train", type=int)
    p.add_argument("--n-test", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("proxy-patches", parents=[common], help="generate wave/cloud proxy patches (PGM)")
    p.add_argument("--out", required=True)
    p.add_argument("--n-wave", type=int, default=20)
    p.add_argument("--n-cloud", type=int, default=20)
    p.add_argument("--test-fraction", type=float, default=0.25)
    p.add_argument("--noise-std", type=float)
    p.set_defaults(func=cmd_proxy_patches)

    p = sub.add_parser("slice", parents=[common], help="slice labelled patches into 1D signals")
    p.add_argument("--manifest", required=True, help="JSON list of {path, label, split?}")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_slice)

    def training_flags(p):
        p.add_argument("--model", choices=KINDS, default="wavenet")
        p.add_argument("--epochs", type=int)

    p = sub.add_parser("train", parents=[common], help="train one model")
    training_flags(p)
    p.add_argument("--data", help="directory with train.csv and test.csv (default: generate from --seed)")
    p.add_argument("--out", required=True)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr-wavelet", type=float)
    p.add_argument("--lr-other", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("trials", parents=[common], help="repeat training over seeds")
    training_flags(p)
    p.add_argument("--seeds", type=_seed_range, default=list(range(10)))
    p.add_argument("--out")
    p.set_defaults(func=cmd_trials)

    p = sub.add_parser("eval", parents=[common], help="evaluate a saved model")
    p.add_argument("--model", required=True, help="model.json")
    p.add_argument("--data", required=True, help="dataset directory or CSV file")
    p.add_argument("--split", default="test")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("confmap", parents=[common], help="confidence map of one patch")
    p.add_argument("--model", required=True, help="model.json")
    p.add_argument("--patch", required=True, help="128x128 P5 PGM")
    p.add_argument("--label", default="wave")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_confmap)

    p = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    p.add_argument("--model", choices=KINDS, default="wavenet")
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--step", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--input-length", type=int)
    p.add_argument("--train-width", action="store_true", help="also check the wavelet widths")
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (MorletNetError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


cli_dispatch = main

if __name__ == "__main__":
    sys.exit(main())
