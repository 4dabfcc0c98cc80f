"""Command-line entry point: ``tftmtl <command> [options]``.

Exit codes: 0 success, 1 domain or contract failure, 2 I/O or configuration failure.
Environment: ``TFTMTL_OUTPUT_DIR`` is the default output directory,
``TFTMTL_THREADS`` caps BLAS threads (read before numpy loads).
"""

from __future__ import annotations

import os

if os.environ.get("TFTMTL_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, os.environ["TFTMTL_THREADS"])

import argparse
import datetime as dt
import hashlib
import json
import math
import sys
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from . import __version__
from .data import (
    GeneratorConfig,
    generate_synthetic,
    prepare_series,
    read_dataset,
    validate_schema,
    write_dataset,
)
from .errors import CheckpointError, TFTMTLError, ValidationError
from .metrics import emit_comparison_table, evaluate_predictions
from .model.tft import Batch
from .training import (
    ExperimentConfig,
    epoch_log_csv,
    fit,
    load_checkpoint,
    model_from_checkpoint,
    parse_epoch_log,
    predict_windows,
    prepare,
    run_ablation,
    save_checkpoint,
    windows_for_checkpoint,
)

EXIT_OK, EXIT_DOMAIN, EXIT_IO = 0, 1, 2


class ConfigFailure(Exception):
    """Bad configuration or unusable paths; maps to exit code 2."""


# ---------------------------------------------------------------- helpers

def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def bundled_config(name: str) -> dict:
    return json.loads(resources.files("tftmtl").joinpath("configs", f"{name}.json").read_text())


def load_config(ref: str | None, default: str = "desk") -> ExperimentConfig:
    """``ref`` is a JSON path or a bundled config name (``tiny``, ``desk``)."""
    try:
        if ref is None:
            raw = bundled_config(default)
        elif Path(ref).exists():
            raw = json.loads(Path(ref).read_text(encoding="utf-8"))
        elif resources.files("tftmtl").joinpath("configs", f"{ref}.json").is_file():
            raw = bundled_config(ref)
        else:
            raise ConfigFailure(f"config {ref!r} is neither a file nor a bundled config")
        if not isinstance(raw, dict):
            raise ConfigFailure("config JSON must be an object")
        return ExperimentConfig.from_dict(raw)
    except json.JSONDecodeError as exc:
        raise ConfigFailure(f"config {ref} is not valid JSON: {exc}") from None
    except (ValidationError, TypeError) as exc:
        raise ConfigFailure(f"invalid config: {exc}") from None


def output_dir(arg: str | None, command: str) -> Path:
    base = Path(arg) if arg else Path(os.environ.get("TFTMTL_OUTPUT_DIR", "runs")) / command
    try:
        base.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigFailure(f"cannot create output directory {base}: {exc.strerror}") from None
    if not os.access(base, os.W_OK):
        raise ConfigFailure(f"output directory {base} is not writable")
    return base


def load_data(path: str) -> pd.DataFrame:
    try:
        df = read_dataset(path)
    except FileNotFoundError:
        raise ConfigFailure(f"data file {path} not found") from None
    except OSError as exc:
        raise ConfigFailure(f"cannot read {path}: {exc.strerror}") from None
    problems = validate_schema(df)
    if problems:
        shown = "\n".join(f"  {v}" for v in problems[:50])
        more = f"\n  ... {len(problems) - 50} more" if len(problems) > 50 else ""
        raise ValidationError(f"{path} has {len(problems)} schema violations:\n{shown}{more}")
    return df


def write_manifest(path: Path, command: str, config: dict, inputs: dict, outputs: dict, seed,
                   started: str, **extra) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "config": config,
        "seed": seed,
        "inputs": {str(p): sha256_file(Path(p)) for p in inputs.values()},
        "outputs": {str(p): sha256_file(Path(p)) for p in outputs.values()},
        "started_at": started,
        "finished_at": _now(),
        **extra,
    }
    atomic_write(path, canonical_json(manifest))


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------- commands

def cmd_generate(args) -> int:
    started = _now()
    cfg = load_config(args.config).generator
    if args.seed is not None:
        try:
            cfg = GeneratorConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
        except ValidationError as exc:
            raise ConfigFailure(str(exc)) from None
    out = Path(args.out)
    if not out.parent.is_dir() or not os.access(out.parent, os.W_OK):
        raise ConfigFailure(f"cannot write {out}: directory missing or not writable")
    data = generate_synthetic(cfg)
    try:
        write_dataset(data.records, out)
    except OSError as exc:
        raise ConfigFailure(f"cannot write {out}: {exc.strerror}") from None
    manifest = out.with_name(out.name + ".manifest.json")
    write_manifest(manifest, "generate", {"generator": cfg.to_dict()}, {}, {"data": out}, cfg.seed, started)
    df = data.records
    print(f"wrote {len(df)} rows for {df['product_id'].nunique()} products to {out}")
    summary = df.groupby("category").agg(products=("product_id", "nunique"), rows=("date", "size"),
                                         mean_sales=("daily_sales", "mean"))
    print(summary.to_string(float_format=lambda v: f"{v:.2f}"))
    return EXIT_OK


def cmd_train(args) -> int:
    started = _now()
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "train": {**cfg.train.to_dict(), "seed": args.seed}})
    records = load_data(args.data)
    out = output_dir(args.out, "train")
    prep = prepare(records, cfg)
    model, result, ckpt = fit(prep, cfg.train, kind=args.model)
    paths = {"checkpoint": out / "checkpoint.json", "epoch_log": out / "epoch_log.csv",
             "val_metrics": out / "val_metrics.txt"}
    save_checkpoint(ckpt, paths["checkpoint"])
    atomic_write(paths["epoch_log"], epoch_log_csv(result.logs))
    report = evaluate_predictions(predict_windows(model, result.best_params, prep.val), prep.val.raw_targets())
    atomic_write(paths["val_metrics"], report.to_text())
    write_manifest(out / "manifest.json", "train", cfg.to_dict(), {"data": args.data}, paths, cfg.train.seed,
                   started, target_access=prep.target_access(), window_checksums=prep.checksums(),
                   best_epoch=result.best_epoch, epochs_run=len(result.logs))
    print(f"trained {len(result.logs)} epochs; best epoch {result.best_epoch} "
          f"(val loss {result.best_val:.6g}); artifacts in {out}")
    return EXIT_OK


def _checkpoint(path: str):
    try:
        return load_checkpoint(path)
    except CheckpointError as exc:
        raise ConfigFailure(str(exc)) from None


def _eval_windows(records, ckpt, args):
    """Re-window data with the checkpoint's statistics; ``--config`` may override the feature list."""
    meta = ckpt.meta
    if getattr(args, "config", None):
        override = load_config(args.config)
        ckpt = type(ckpt)(**{**ckpt.__dict__, "features": override.features})
    return windows_for_checkpoint(records, ckpt, int(meta.get("test_months", 6)), int(meta.get("val_months", 3)),
                                  int(meta.get("stride", 1)))


def predictions_csv(windows, preds) -> str:
    lines = ["product_id,origin,step,date,sales,inventory"]
    for i, (pid, origin) in enumerate(windows.origins):
        for k in range(windows.horizon):
            vals = [repr(float(preds[t][i, k])) if t in preds else "" for t in ("sales", "inventory")]
            lines.append(f"{pid},{origin},{k + 1},{origin + np.timedelta64(k, 'D')},{vals[0]},{vals[1]}")
    return "\n".join(lines) + "\n"


def cmd_evaluate(args) -> int:
    started = _now()
    ckpt = _checkpoint(args.checkpoint)
    records = load_data(args.data)
    out = output_dir(args.out, "evaluate")
    _, sets = _eval_windows(records, ckpt, args)
    test = sets[args.split]
    if len(test) == 0:
        raise ValidationError(f"the {args.split} split has no complete windows to evaluate")
    model = model_from_checkpoint(ckpt)
    preds = predict_windows(model, ckpt.params, test)
    report = evaluate_predictions(preds, test.raw_targets())
    name = args.name or ("TFT-MTL" if ckpt.model_kind == "tft" and len(model.tasks) == 2 else ckpt.model_kind)
    text, csv_text = emit_comparison_table([(name, report)])
    paths = {"metrics": out / f"{args.split}_metrics.txt", "table": out / "comparison.txt",
             "table_csv": out / "comparison.csv", "predictions": out / "predictions.csv"}
    atomic_write(paths["metrics"], report.to_text())
    atomic_write(paths["table"], text)
    atomic_write(paths["table_csv"], csv_text)
    atomic_write(paths["predictions"], predictions_csv(test, preds))
    write_manifest(out / "manifest.json", "evaluate", {"checkpoint_meta": ckpt.meta, "split": args.split},
                   {"checkpoint": args.checkpoint, "data": args.data}, paths, ckpt.meta.get("train", {}).get("seed"),
                   started, target_access={s.name: s.target_reads for s in sets.values()})
    print(text, end="")
    return EXIT_OK


def forecast(ckpt, records: pd.DataFrame, product: str, date: str, top_k: int = 3) -> dict:
    """Forecast JSON for one product and first forecast day; see the README for the layout."""
    cfg = ckpt.model_config
    rows = records[records["product_id"].astype(str) == str(product)]
    if rows.empty:
        raise ValidationError(f"product {product!r} not found in data")
    series = prepare_series(rows, ckpt.normalizer, ckpt.encoder, ckpt.features)[0]
    try:
        origin = np.datetime64(dt.date.fromisoformat(date), "D")
    except ValueError:
        raise ValidationError(f"date {date!r} is not ISO-8601") from None
    end = int(np.searchsorted(series.dates, origin))  # days observed before the origin
    if end < cfg.lookback:
        raise ValidationError(f"forecast from {date} needs {cfg.lookback} days of history, {end} available")
    if series.dates[end - 1] != origin - np.timedelta64(1, "D"):
        raise ValidationError(f"no observation on the day before {date}")
    scales = {}
    for task, feat in (("sales", "daily_sales"), ("inventory", "inventory_level")):
        mu, sd = ckpt.normalizer.feature_stats(series.product_id, feat)
        scales[task] = (np.array([mu]), np.array([sd]))
    batch = Batch(series.dynamic[None, end - cfg.lookback:end], series.static[None], scales=scales)
    model = model_from_checkpoint(ckpt)
    out = model.forward(ckpt.params, batch)
    dates = [str(origin + np.timedelta64(k, "D")) for k in range(cfg.horizon)]
    doc = {
        "product_id": series.product_id,
        "origin": str(origin),
        "horizon": cfg.horizon,
        "dates": dates,
        "model_kind": ckpt.model_kind,
    }
    for task in ("sales", "inventory"):
        if task in out.predictions:
            mu, sd = scales[task]
            doc[task] = [float(v) for v in out.predictions[task].data[0] * sd[0] + mu[0]]
        else:
            doc[task] = None
    if out.trace is not None:
        history = [str(d) for d in series.dates[end - cfg.lookback:end]]
        vw = out.trace.variable_weights[0]
        order = np.argsort(-vw, axis=1, kind="stable")[:, :top_k]
        doc["variable_selection"] = {
            "features": list(ckpt.features),
            "dates": history,
            "weights": vw.tolist(),
            "top_k": [[{"feature": ckpt.features[j], "weight": float(vw[t, j])} for j in order[t]]
                      for t in range(vw.shape[0])],
        }
        att = out.trace.attention_weights[0]
        doc["attention"] = {"dates": history, "per_head": att.tolist(), "mean": att.mean(axis=0).tolist()}
    return doc


def cmd_predict(args) -> int:
    started = _now()
    ckpt = _checkpoint(args.checkpoint)
    records = load_data(args.data)
    doc = forecast(ckpt, records, args.product, args.date, args.top_k)
    text = json.dumps(doc, indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        if not out.parent.is_dir():
            raise ConfigFailure(f"cannot write {out}: directory missing")
        atomic_write(out, text)
        write_manifest(out.with_name(out.name + ".manifest.json"), "predict",
                       {"product": args.product, "date": args.date, "top_k": args.top_k},
                       {"checkpoint": args.checkpoint, "data": args.data}, {"forecast": out},
                       ckpt.meta.get("train", {}).get("seed"), started, target_access={})
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_ablation(args) -> int:
    started = _now()
    cfg = load_config(args.config)
    records = load_data(args.data)
    out = output_dir(args.out, "ablation")
    prep = prepare(records, cfg)
    result = run_ablation(prep, cfg.train)
    text, csv_text = result.table()
    paths = {"table": out / "comparison.txt", "table_csv": out / "comparison.csv", "deltas": out / "deltas.json"}
    atomic_write(paths["table"], text)
    atomic_write(paths["table_csv"], csv_text)
    atomic_write(paths["deltas"], canonical_json(result.deltas()))
    for name, report in result.reports.items():
        slug = name.lower().replace(" ", "_").replace("(", "").replace(")", "")
        paths[f"report:{name}"] = out / f"metrics_{slug}.txt"
        atomic_write(paths[f"report:{name}"], report.to_text())
    write_manifest(out / "manifest.json", "ablation", cfg.to_dict(), {"data": args.data}, paths, cfg.train.seed,
                   started, window_checksums=result.checksums, target_access=prep.target_access())
    print(text, end="")
    print("multi-task improvement over single-task (%):",
          ", ".join(f"{k} {v:+.2f}" for k, v in result.deltas().items()))
    return EXIT_OK


SVG_W, SVG_H, MARGIN = 640, 400, 60


def loss_curve_svg(logs) -> str:
    """Two polylines (train, validation total loss) on a log-scale y axis."""
    epochs = np.array([log.epoch for log in logs], dtype=float)
    series = {"train": np.array([log.train_total for log in logs]), "validation": np.array([log.val_total for log in logs])}
    values = np.concatenate(list(series.values()))
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise ValidationError("log-scale plot needs positive finite losses")
    lo, hi = math.log10(values.min()), math.log10(values.max())
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    x0, x1 = epochs.min(), epochs.max() if epochs.max() > epochs.min() else epochs.min() + 1
    pw, ph = SVG_W - 2 * MARGIN, SVG_H - 2 * MARGIN

    def sx(e):
        return MARGIN + (e - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN + (hi - math.log10(v)) / (hi - lo) * ph

    colors = {"train": "#1f77b4", "validation": "#d62728"}
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{SVG_H - MARGIN}" x2="{SVG_W - MARGIN}" y2="{SVG_H - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{SVG_H - MARGIN}" stroke="black"/>',
        f'<text x="{SVG_W / 2}" y="{SVG_H - 15}" text-anchor="middle" font-size="14">epoch</text>',
        f'<text x="18" y="{SVG_H / 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 18 {SVG_H / 2})">total loss (log scale)</text>',
    ]
    for decade in range(math.floor(lo), math.ceil(hi) + 1):
        if lo - 1e-9 <= decade <= hi + 1e-9:
            y = sy(10.0 ** decade)
            parts.append(f'<text x="{MARGIN - 6}" y="{y:.2f}" text-anchor="end" font-size="11">1e{decade}</text>')
    parts.append(f'<text x="{MARGIN}" y="{SVG_H - MARGIN + 16}" text-anchor="middle" font-size="11">{int(x0)}</text>')
    parts.append(f'<text x="{SVG_W - MARGIN}" y="{SVG_H - MARGIN + 16}" text-anchor="middle" '
                 f'font-size="11">{int(epochs.max())}</text>')
    for name, vals in series.items():
        pts = " ".join(f"{sx(e):.3f},{sy(v):.3f}" for e, v in zip(epochs, vals))
        parts.append(f'<polyline class="{name}" fill="none" stroke="{colors[name]}" stroke-width="2" points="{pts}"/>')
    for i, name in enumerate(series):
        y = MARGIN + 10 + 18 * i
        parts.append(f'<line x1="{SVG_W - MARGIN - 120}" y1="{y}" x2="{SVG_W - MARGIN - 100}" y2="{y}" '
                     f'stroke="{colors[name]}" stroke-width="2"/>')
        parts.append(f'<text x="{SVG_W - MARGIN - 95}" y="{y + 4}" font-size="12">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_plot_losses(args) -> int:
    try:
        text = Path(args.log).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigFailure(f"cannot read {args.log}: {exc.strerror}") from None
    svg = loss_curve_svg(parse_epoch_log(text))
    out = Path(args.out)
    if not out.parent.is_dir():
        raise ConfigFailure(f"cannot write {out}: directory missing")
    atomic_write(out, svg)
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tftmtl", description="Multi-task sales and inventory forecasting.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic product-day dataset")
    g.add_argument("--config", help="config JSON path or bundled name (default: desk)")
    g.add_argument("--out", required=True, help="CSV path")
    g.add_argument("--seed", type=int)
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="split, normalize, window and train")
    t.add_argument("--data", required=True)
    t.add_argument("--config")
    t.add_argument("--out", help="output directory (default: $TFTMTL_OUTPUT_DIR/train)")
    t.add_argument("--seed", type=int)
    t.add_argument("--model", choices=("tft", "gru"), default="tft")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a checkpoint on the held-out test split")
    e.add_argument("--checkpoint", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out")
    e.add_argument("--config", help="override the dynamic feature list")
    e.add_argument("--split", choices=("test", "val", "train"), default="test")
    e.add_argument("--name", help="row label in the comparison table")
    e.set_defaults(func=cmd_evaluate)

    pr = sub.add_parser("predict", help="forecast one product from a given first forecast day")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--product", required=True)
    pr.add_argument("--date", required=True, help="first forecast day, YYYY-MM-DD")
    pr.add_argument("--top-k", type=int, default=3)
    pr.add_argument("--out", help="JSON path (default: stdout)")
    pr.set_defaults(func=cmd_predict)

    a = sub.add_parser("ablation", help="multi-task vs single-task vs GRU comparison table")
    a.add_argument("--data", required=True)
    a.add_argument("--config")
    a.add_argument("--out")
    a.set_defaults(func=cmd_ablation)

    pl = sub.add_parser("plot-losses", help="render an epoch log as an SVG loss curve")
    pl.add_argument("--log", required=True)
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot_losses)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TFTMTLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
