"""Command-line front end: ``train``, ``eval`` and ``grid``.

Exit codes: 0 success, 1 configuration error, 2 data error, 3 training error.
"""
from __future__ import annotations

import argparse
import contextlib
import hashlib
import itertools
import json
import logging
import math
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, data, metrics, nn
from .errors import ConfigError, DataError, HfqnnError, KindError, SchemaError, ShapeError

log = logging.getLogger("hfqnn")

REPORT_VERSION = 1
GRID_AXES = {"attack_samples": "n_attack", "qubits": "n_qubits", "ratio": "ratio", "loss": "loss",
             "model": "model", "seed": "seed"}
METRIC_KEYS = ("accuracy", "recall", "precision", "f1")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "synthetic"
    model: str = "hfqnn"
    loss: str = "bce"
    n_attack: int = 1000
    ratio: float = 2.0
    n_qubits: int = 6
    n_layers: int = 2
    epochs: int = 150
    learning_rate: float = 0.02
    batch_size: int = 64
    seed: int = 1
    out: str = "runs/latest"
    threshold: float = 0.90
    input_scaling: str = "none"
    cache_dir: str | None = None

    def __post_init__(self):
        try:
            nn.ModelKind(self.model)
            nn.LossKind(self.loss)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.dataset != "synthetic" and not Path(self.dataset).is_file():
            raise ConfigError(f"dataset file {self.dataset!r} does not exist")
        data.SamplingPlan(self.n_attack, self.ratio, self.seed)
        nn.TrainConfig(self.epochs, self.learning_rate, self.batch_size, self.loss, self.seed)
        if self.n_qubits < 1 or self.n_layers < 1:
            raise ConfigError("qubits and layers must be positive")

    @classmethod
    def from_mapping(cls, values: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**values)


@dataclass
class RunReport:
    config: dict
    build: dict
    history: list[dict]
    confusion: dict
    metrics: dict
    features: dict
    averaging: str = metrics.AVERAGING
    timings: dict = field(default_factory=dict)
    version: int = REPORT_VERSION

    def to_dict(self, include_timings: bool = True) -> dict:
        d = asdict(self)
        if not include_timings:
            d.pop("timings")
        return d

    def to_json(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_dict(include_timings), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        d = json.loads(text)
        if d.get("version") != REPORT_VERSION:
            raise ConfigError(f"unsupported report version {d.get('version')!r}")
        return cls(**d)


def build_id() -> dict:
    try:
        rev = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"], capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).resolve().parent,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        rev = ""
    return {"package": __version__, "git": rev or "unknown"}


@contextlib.contextmanager
def stage(name: str, timings: dict | None = None):
    start = time.perf_counter()
    try:
        yield
    except HfqnnError as exc:
        raise type(exc)(f"[{name}] {exc}") from exc
    finally:
        if timings is not None:
            timings[name] = time.perf_counter() - start


# ---------------------------------------------------------------- pipeline


def _load_features(cfg: ExperimentConfig) -> data.FeatureMatrix:
    if cfg.dataset == "synthetic":
        n_normal = math.floor(cfg.ratio * cfg.n_attack)
        records = data.generate_synthetic(n_normal, cfg.n_attack, seed=cfg.seed)
    else:
        records = data.load_csv(cfg.dataset)
    return data.records_to_features(records)


def _prepare_split(cfg: ExperimentConfig, timings: dict) -> data.SplitSet:
    with stage("load", timings):
        full = _load_features(cfg)
    with stage("select_features", timings):
        selected = data.select_features(full, cfg.threshold)
    plan = data.SamplingPlan(cfg.n_attack, cfg.ratio, cfg.seed)
    key = None
    if cfg.cache_dir:
        key = data.split_cache_key(data.dataset_digest(full), plan, cfg.seed, cfg.threshold)
        cached = data.load_split_cache(cfg.cache_dir, key)
        if cached is not None:
            return cached
    with stage("sample", timings):
        sampled = data.sample_stratified(selected, plan)
    with stage("split", timings):
        split = data.split_70_20_10(sampled, cfg.seed)
    if key is not None:
        data.save_split_cache(cfg.cache_dir, key, split)
    return split


def _model_spec(cfg: ExperimentConfig, n_features: int) -> nn.ModelSpec:
    return nn.ModelSpec(cfg.model, n_features, cfg.n_qubits, cfg.n_layers, input_scaling=cfg.input_scaling)


def run_train(cfg: ExperimentConfig, write: bool = True) -> RunReport:
    timings: dict = {}
    split = _prepare_split(cfg, timings)
    with stage("standardize", timings):
        scaler = data.fit_standardizer(split.train)
        train, val, test = (scaler.transform(s) for s in (split.train, split.val, split.test))
    spec = _model_spec(cfg, train.n_features)
    tcfg = nn.TrainConfig(cfg.epochs, cfg.learning_rate, cfg.batch_size, cfg.loss, cfg.seed)
    with stage("train", timings):
        result = nn.train(spec, tcfg, train, val)
    with stage("evaluate", timings):
        cm, m = metrics.evaluate(nn.predict(spec, result.params, test.values), test.labels)
    report = RunReport(
        config=asdict(cfg),
        build=build_id(),
        history=result.history,
        confusion=asdict(cm),
        metrics=m.as_dict(),
        features={"kept": list(train.feature_names), "dropped": list(train.dropped)},
        timings=timings,
    )
    if write:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json(include_timings=False))
        (out / "timings.json").write_text(json.dumps(timings, indent=2, sort_keys=True))
        ckpt = nn.Checkpoint(
            spec, result.params, cfg.seed,
            metadata={"config": asdict(cfg), "features": list(train.feature_names)},
            arrays={"scaler_mean": scaler.mean, "scaler_scale": scaler.scale},
        )
        nn.save_checkpoint(out / "checkpoint.npz", ckpt)
    return report


def run_eval(checkpoint, dataset: str | None = None, seed: int | None = None, expect_kind: str | None = None) -> RunReport:
    timings: dict = {}
    with stage("checkpoint", timings):
        ckpt = nn.load_checkpoint(checkpoint)
    if expect_kind is not None and nn.ModelKind(expect_kind) is not ckpt.spec.kind:
        raise KindError(f"checkpoint holds a {ckpt.spec.kind.value} model, not {expect_kind}")
    saved = dict(ckpt.metadata["config"])
    if dataset is not None:
        saved["dataset"] = dataset
    if seed is not None:
        saved["seed"] = seed
    saved["cache_dir"] = None
    cfg = ExperimentConfig.from_mapping(saved)
    split = _prepare_split(cfg, timings)
    test = split.test
    if test.n_features != ckpt.spec.n_features:
        raise ShapeError(
            f"checkpoint expects {ckpt.spec.n_features} features but the dataset yields {test.n_features}"
        )
    if list(test.feature_names) != ckpt.metadata["features"]:
        raise SchemaError(f"feature names {list(test.feature_names)} differ from {ckpt.metadata['features']}")
    scaler = data.Standardizer(ckpt.arrays["scaler_mean"], ckpt.arrays["scaler_scale"], test.feature_names)
    test = scaler.transform(test)
    with stage("evaluate", timings):
        cm, m = metrics.evaluate(nn.predict(ckpt.spec, ckpt.params, test.values), test.labels)
    return RunReport(
        config=asdict(cfg), build=build_id(), history=[], confusion=asdict(cm), metrics=m.as_dict(),
        features={"kept": list(test.feature_names), "dropped": list(test.dropped)}, timings=timings,
    )


# ---------------------------------------------------------------- grid


def load_structured(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    text = path.read_text()
    if path.suffix in (".yaml", ".yml"):
        import yaml

        content = yaml.safe_load(text)
    else:
        content = json.loads(text)
    if not isinstance(content, dict):
        raise ConfigError(f"{path} must contain a mapping")
    return content


def cell_seed(base_seed: int, coords: dict) -> int:
    """Seed for a grid cell. Model and loss are excluded so paired cells share data."""
    data_coords = {k: v for k, v in coords.items() if k not in ("model", "loss", "seed")}
    payload = json.dumps([base_seed, sorted(data_coords.items())], default=str)
    return int.from_bytes(hashlib.sha256(payload.encode()).digest()[:4], "big") & 0x7FFFFFFF


def grid_cells(spec: dict) -> list[tuple[dict, ExperimentConfig]]:
    base = dict(spec.get("base", {}))
    axes = spec.get("axes", {})
    if not axes:
        raise ConfigError("grid spec needs a non-empty 'axes' mapping")
    bad = set(axes) - set(GRID_AXES)
    if bad:
        raise ConfigError(f"unsupported grid axes {sorted(bad)}; allowed: {sorted(GRID_AXES)}")
    for name, values in axes.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid axis {name!r} is empty")
    base_seed = base.pop("seed", ExperimentConfig.seed)
    out_root = Path(base.pop("out", "runs/grid"))
    cells = []
    names = list(axes)
    for combo in itertools.product(*(axes[n] for n in names)):
        coords = dict(zip(names, combo))
        values = dict(base)
        for n, v in coords.items():
            if n != "seed":
                values[GRID_AXES[n]] = v
        values["seed"] = cell_seed(coords.get("seed", base_seed), coords)
        tag = "_".join(f"{k}-{v}" for k, v in coords.items())
        values["out"] = str(out_root / "cells" / tag)
        cells.append((coords, ExperimentConfig.from_mapping(values)))
    return cells


def _run_cell(cfg: ExperimentConfig) -> dict:
    try:
        return {"report": run_train(cfg).to_dict(include_timings=False)}
    except HfqnnError as exc:
        return {"error": str(exc), "exit_code": exc.exit_code}


def _fmt(values: list[float]) -> str:
    pct = [100 * v for v in values]
    if len(pct) == 1:
        return f"{pct[0]:.2f}"
    return f"{np.mean(pct):.2f}±{np.std(pct):.2f}"


def summarize(cells: list[dict]) -> tuple[str, list[dict]]:
    """Aligned text table (model, attack samples, then metrics) plus aggregated rows, seeds pooled."""
    ok = [c for c in cells if "report" in c]
    varying = [a for a in ("loss", "qubits", "ratio") if len({str(c["coords"].get(a)) for c in cells}) > 1]
    groups: dict[tuple, list[dict]] = {}
    for c in ok:
        cfg = c["report"]["config"]
        key = (cfg["model"], cfg["n_attack"]) + tuple(cfg[GRID_AXES[a]] for a in varying)
        groups.setdefault(key, []).append(c["report"]["metrics"])
    header = ["Model", "Attack samples"] + [a.capitalize() for a in varying] + ["Accuracy (%)", "Recall (%)",
                                                                               "Precision (%)", "F1 Score (%)"]
    rows, aggregated = [], []
    for key in sorted(groups, key=lambda k: tuple(str(x) if isinstance(x, str) else f"{x:020.6f}" for x in k)):
        ms = groups[key]
        rows.append([key[0].upper().replace("HFQNN", "H-FQNN"), str(key[1])] + [str(v) for v in key[2:]]
                    + [_fmt([m[k] for m in ms]) for k in METRIC_KEYS])
        agg = {"model": key[0], "attack_samples": key[1], **dict(zip(varying, key[2:])), "n_seeds": len(ms)}
        for k in METRIC_KEYS:
            vals = [m[k] for m in ms]
            agg[f"{k}_mean"], agg[f"{k}_std"] = float(np.mean(vals)), float(np.std(vals))
        aggregated.append(agg)
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in rows]
    failed = [c for c in cells if "error" in c]
    for c in failed:
        lines.append(f"FAILED {c['coords']}: {c['error']}")
    return "\n".join(lines) + "\n", aggregated


def write_series(cells: list[dict], axes: dict, out_root: Path) -> list[Path]:
    """One CSV per swept numeric axis: metric mean/std against the axis value."""
    paths = []
    ok = [c for c in cells if "report" in c]
    other = [a for a in axes if a != "seed"]
    for axis in ("qubits", "ratio", "attack_samples"):
        if len(axes.get(axis, [])) < 2:
            continue
        groups: dict[tuple, list[dict]] = {}
        for c in ok:
            key = tuple(c["coords"][a] for a in other)
            groups.setdefault(key, []).append(c["report"]["metrics"])
        lines = [",".join(other + ["n_seeds"] + [f"{k}_{s}" for k in METRIC_KEYS for s in ("mean", "std")])]
        order = other.index(axis)
        for key in sorted(groups, key=lambda k: (tuple(str(x) for i, x in enumerate(k) if i != order), k[order])):
            ms = groups[key]
            stats = [f"{f(np.array([m[k] for m in ms])):.6f}" for k in METRIC_KEYS for f in (np.mean, np.std)]
            lines.append(",".join([str(x) for x in key] + [str(len(ms))] + stats))
        path = out_root / f"series_{axis}.csv"
        path.write_text("\n".join(lines) + "\n")
        paths.append(path)
    return paths


def run_grid(grid_path, jobs: int = 1) -> tuple[list[dict], int]:
    spec = load_structured(grid_path)
    cells = grid_cells(spec)
    out_root = Path(spec.get("base", {}).get("out", "runs/grid"))
    out_root.mkdir(parents=True, exist_ok=True)
    configs = [cfg for _, cfg in cells]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_run_cell, configs))
    else:
        results = [_run_cell(cfg) for cfg in configs]
    records = [{"coords": coords, **res} for (coords, _), res in zip(cells, results)]
    table, aggregated = summarize(records)
    (out_root / "table.txt").write_text(table)
    (out_root / "grid.json").write_text(json.dumps({"cells": records, "summary": aggregated}, indent=2, sort_keys=True))
    write_series(records, spec["axes"], out_root)
    sys.stdout.write(table)
    codes = [r["exit_code"] for r in records if "error" in r]
    return records, (codes[0] if codes else 0)


# ---------------------------------------------------------------- argparse


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(ConfigError.exit_code, f"{self.prog}: error: {message}\n")


_FLAG_MAP = {
    "dataset": "dataset", "model": "model", "loss": "loss", "attack_samples": "n_attack", "ratio": "ratio",
    "qubits": "n_qubits", "layers": "n_layers", "epochs": "epochs", "lr": "learning_rate",
    "batch_size": "batch_size", "seed": "seed", "out": "out", "threshold": "threshold",
    "input_scaling": "input_scaling", "cache_dir": "cache_dir",
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hfqnn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train one model and report test metrics")
    t.add_argument("--config", help="JSON/YAML file of experiment settings (flags override it)")
    t.add_argument("--dataset", help="CSV path or 'synthetic'")
    t.add_argument("--model", choices=[k.value for k in nn.ModelKind])
    t.add_argument("--loss", choices=[k.value for k in nn.LossKind])
    t.add_argument("--attack-samples", type=int)
    t.add_argument("--ratio", type=float)
    t.add_argument("--qubits", type=int)
    t.add_argument("--layers", type=int)
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--out")
    t.add_argument("--threshold", type=float)
    t.add_argument("--input-scaling", choices=["none", "tanh_pi"])
    t.add_argument("--cache-dir")

    e = sub.add_parser("eval", help="evaluate a checkpoint on a fresh split")
    e.add_argument("checkpoint")
    e.add_argument("--dataset")
    e.add_argument("--seed", type=int)
    e.add_argument("--model", choices=[k.value for k in nn.ModelKind], help="expected model kind")
    e.add_argument("--out", help="write the report here instead of stdout")

    g = sub.add_parser("grid", help="run the cartesian product of a grid spec")
    g.add_argument("grid_spec")
    g.add_argument("--jobs", type=int, default=1)
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values = load_structured(args.config) if args.config else {}
    for flag, key in _FLAG_MAP.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    return ExperimentConfig.from_mapping(values)


def _summary_line(report: RunReport) -> str:
    m = report.metrics
    return (f"accuracy {100 * m['accuracy']:.2f}%  recall {100 * m['recall']:.2f}%  "
            f"precision {100 * m['precision']:.2f}%  f1 {100 * m['f1']:.2f}%\n")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "train":
            cfg = resolve_config(args)
            report = run_train(cfg)
            sys.stdout.write(_summary_line(report))
            sys.stdout.write(f"report written to {Path(cfg.out) / 'report.json'}\n")
        elif args.command == "eval":
            report = run_eval(args.checkpoint, args.dataset, args.seed, args.model)
            text = report.to_json(include_timings=False)
            if args.out:
                Path(args.out).write_text(text)
                sys.stdout.write(_summary_line(report))
            else:
                sys.stdout.write(text + "\n")
        else:
            _, code = run_grid(args.grid_spec, args.jobs)
            return code
    except HfqnnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
