"""Command-line entry point: gen / train / eval / sweep / report.

Every command writes a JSON run manifest recording the resolved
configuration, seeds and artifact paths, so a run is reproducible from
its manifest alone.  Exit codes: 0 success, 2 bad arguments, 3 I/O
failure, 4 format or validation failure, 5 numeric failure.
"""
from __future__ import annotations

import argparse
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from . import beams as beamsmod
from . import sweeps as sweepsmod
from .config import MAC_PROFILES, load_config
from .dataset import generate_dataset, load_dataset, save_dataset
from .errors import (BeamnetError, ConfigError, FormatError, NonFiniteGradient,
                     NonFiniteLoss)
from .evaluate import evaluate
from .model import ModelConfig, build_model, load_model, param_count, save_model
from .train import TrainConfig, train

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_FORMAT = 4
EXIT_NUMERIC = 5


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _write_manifest(path, command: str, config: dict, seeds: dict,
                    artifacts: list, started: str) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seeds": seeds,
        "artifacts": [str(a) for a in artifacts],
        "tool_version": __version__,
        "started_at": started,
        "finished_at": _timestamp(),
    }
    missing = [a for a in artifacts if not os.path.exists(a)]
    if missing:
        raise FormatError(f"manifest references missing artifacts: {missing}")
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=1)
        f.write("\n")


def cmd_gen(args) -> int:
    started = _timestamp()
    config = load_config(args.config)
    if args.seed is not None:
        from dataclasses import replace
        config = replace(config, base_seed=args.seed)
    dataset = generate_dataset(config)
    save_dataset(dataset, args.out)
    _write_manifest(args.out + ".manifest.json", "gen", config.to_dict(),
                    {"base_seed": config.base_seed}, [args.out], started)
    print(f"wrote {len(dataset)} samples to {args.out}")
    return EXIT_OK


def _parse_train_overrides(path) -> dict:
    fields = TrainConfig().to_dict()
    overrides = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (p.strip() for p in line.split("=", 1))
            if key not in fields:
                raise ConfigError(f"unknown training key '{key}'")
            current = fields[key]
            if isinstance(current, bool):
                overrides[key] = value.lower() in ("1", "true", "yes")
            elif isinstance(current, int) or current is None:
                overrides[key] = int(value)
            elif isinstance(current, float):
                overrides[key] = float(value)
            else:
                overrides[key] = value
    return overrides


def cmd_train(args) -> int:
    started = _timestamp()
    dataset = load_dataset(args.dataset)
    overrides = _parse_train_overrides(args.config) if args.config else {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    tcfg = TrainConfig(**overrides)
    model = build_model(ModelConfig(), seed=tcfg.seed)
    report = train(model, dataset, tcfg)
    save_model(model, args.model_out)
    curve_path = args.model_out + ".loss.csv"
    with open(curve_path, "w", encoding="utf-8", newline="") as f:
        f.write(report.to_csv())
    _write_manifest(args.model_out + ".manifest.json", "train",
                    {"train": tcfg.to_dict(), "dataset": args.dataset,
                     "scenario": dataset.config.to_dict()},
                    {"train_seed": tcfg.seed, "dataset_seed": dataset.config.base_seed},
                    [args.model_out, args.model_out + ".json", curve_path], started)
    print(f"stopped after {report.stopped_epoch} epochs "
          f"(best epoch {report.best_epoch}, val loss {report.best_val_loss:.6g})")
    return EXIT_OK


def cmd_eval(args) -> int:
    started = _timestamp()
    model = load_model(args.model)
    dataset = load_dataset(args.dataset)
    cfg = dataset.config
    codebook = beamsmod.build_codebook(cfg.mmwave_antenna[1], cfg.mmwave_antenna[2],
                                       cfg.codebook_oversampling)
    budget = beamsmod.LinkBudget(snr_db=args.snr_db, n_subcarriers=cfg.mmwave_subcarriers)
    report = evaluate(model, dataset, codebook, budget)
    for line in report.lines():
        print(line)
    artifacts = []
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as f:
            f.write(report.to_csv())
        artifacts.append(args.out)
        _write_manifest(args.out + ".manifest.json", "eval",
                        {"model": args.model, "dataset": args.dataset,
                         "snr_db": args.snr_db},
                        {"dataset_seed": cfg.base_seed}, artifacts, started)
    return EXIT_OK


def cmd_sweep(args) -> int:
    started = _timestamp()
    model = load_model(args.model)
    dataset = load_dataset(args.dataset)
    cfg = dataset.config
    codebook = beamsmod.build_codebook(cfg.mmwave_antenna[1], cfg.mmwave_antenna[2],
                                       cfg.codebook_oversampling)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, f"sweep_{args.axis}.csv")
    if args.axis == "snr":
        results = sweepsmod.sweep_snr(model, dataset, codebook,
                                      mac_profiles=tuple(MAC_PROFILES.values()),
                                      max_samples=args.samples)
    elif args.axis == "velocity":
        results = sweepsmod.sweep_velocity(model, cfg, n_samples=args.samples,
                                           snr_db=args.snr_db)
    elif args.axis == "distance":
        results = sweepsmod.sweep_distance(model, cfg, n_samples=args.samples,
                                           snr_db=args.snr_db)
    else:  # doppler; argparse restricts the choices
        results = sweepsmod.sweep_doppler(model, cfg, n_samples=args.samples,
                                          snr_db=args.snr_db)
    sweepsmod.write_sweep_csv(results, out_path)
    _write_manifest(os.path.join(args.out, f"sweep_{args.axis}.manifest.json"),
                    "sweep",
                    {"model": args.model, "dataset": args.dataset, "axis": args.axis,
                     "snr_db": args.snr_db, "samples": args.samples},
                    {"dataset_seed": cfg.base_seed}, [out_path], started)
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_report(args) -> int:
    manifests = sorted(
        os.path.join(args.run_dir, name)
        for name in os.listdir(args.run_dir) if name.endswith(".manifest.json"))
    if not manifests:
        raise FormatError(f"no manifests found under {args.run_dir}")
    ok = True
    for path in manifests:
        with open(path, "r", encoding="utf-8") as f:
            manifest = json.load(f)
        for key in ("command", "config", "seeds", "artifacts", "tool_version"):
            if key not in manifest:
                raise FormatError(f"{path}: manifest missing '{key}'")
        missing = [a for a in manifest["artifacts"] if not os.path.exists(a)]
        status = "ok" if not missing else f"MISSING {missing}"
        if missing:
            ok = False
        print(f"{manifest['command']:<6} {os.path.basename(path):<40} {status}")
    return EXIT_OK if ok else EXIT_FORMAT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="beamnet",
                                     description="beam prediction lab runner")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a channel dataset")
    p.add_argument("--config", required=True, help="scenario config file")
    p.add_argument("--out", required=True, help="output dataset path")
    p.add_argument("--seed", type=int, default=None, help="override base seed")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train the beam regressor")
    p.add_argument("dataset", help="dataset file from 'gen'")
    p.add_argument("--model-out", required=True, help="checkpoint output path")
    p.add_argument("--config", default=None, help="training overrides file")
    p.add_argument("--seed", type=int, default=None, help="training seed")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint against the oracle")
    p.add_argument("model", help="checkpoint path")
    p.add_argument("dataset", help="dataset file")
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--out", default=None, help="metrics CSV path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run a sweep study")
    p.add_argument("model", help="checkpoint path")
    p.add_argument("--axis", required=True,
                   choices=("snr", "velocity", "distance", "doppler"))
    p.add_argument("--dataset", required=True, help="dataset file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--snr-db", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=500)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="summarize manifests in a run directory")
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (NonFiniteLoss, NonFiniteGradient) as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FormatError, ConfigError, BeamnetError) as exc:
        print(f"error: format: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
