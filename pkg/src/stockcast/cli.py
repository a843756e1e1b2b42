"""Command-line entry point: ``stockcast {evaluate,train,gradcheck,synth,report}``.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric or
training failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, fields
from datetime import date
from pathlib import Path

from . import report as reporting
from .data import DataError, make_weeks, make_windows, read_csv, split, synthesize, to_csv
from .layers import (
    LSTM,
    ConvLSTM,
    Conv1D,
    Dense,
    Flatten,
    MaxPool1D,
    ReLU,
    RepeatVector,
    TimeDistributedDense,
    gradient_check,
)
from .models import ModelKind, Scaler, build
from .optim import train
from .tensor import NonFiniteError
from .walk_forward import RETRAIN_POLICIES, SCALER_MODES, run_rounds

log = logging.getLogger("stockcast")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DATA_DIR_ENV = "STOCKCAST_DATA_DIR"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    data: str = ""
    model: str = "cnn1"
    train_start: str | None = "2014-12-29"
    train_end: str = "2018-12-28"
    test_start: str = "2018-12-31"
    test_end: str | None = None
    rounds: int = 10
    seed: int = 0
    stride: int = 1
    retrain: str = "none"
    scaler: str = "none"
    epochs: int | None = None
    batch_size: int | None = None
    lr: float | None = None
    jobs: int = 1
    out: str | None = None
    formats: str = "text,csv,json,svg"

    def validate(self) -> None:
        if not self.data:
            raise UsageError("no data file given (--data or 'data' in the config file)")
        try:
            ModelKind.parse(self.model)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        for name in ("train_start", "train_end", "test_start", "test_end"):
            value = getattr(self, name)
            if value is not None:
                try:
                    date.fromisoformat(value)
                except ValueError:
                    raise UsageError(f"{name}: {value!r} is not a YYYY-MM-DD date") from None
        if self.test_start <= self.train_end:
            raise UsageError(f"test_start {self.test_start} must come after train_end {self.train_end}")
        for name in ("rounds", "stride", "jobs"):
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be >= 1")
        for name in ("epochs", "batch_size"):
            if getattr(self, name) is not None and getattr(self, name) < 1:
                raise UsageError(f"{name} must be >= 1")
        if self.retrain not in RETRAIN_POLICIES:
            raise UsageError(f"retrain must be one of {', '.join(RETRAIN_POLICIES)}")
        if self.scaler not in SCALER_MODES:
            raise UsageError(f"scaler must be one of {', '.join(SCALER_MODES)}")
        unknown = set(self.format_list()) - set(reporting.FORMATS)
        if unknown:
            raise UsageError(f"unknown report format(s): {', '.join(sorted(unknown))}")

    def format_list(self) -> list[str]:
        return [f.strip() for f in self.formats.split(",") if f.strip()]

    def train_overrides(self) -> dict:
        return {k: getattr(self, k) for k in ("epochs", "batch_size", "lr") if getattr(self, k) is not None}

    def data_path(self) -> Path:
        p = Path(self.data)
        if not p.is_absolute() and not p.exists() and os.environ.get(DATA_DIR_ENV):
            p = Path(os.environ[DATA_DIR_ENV]) / p
        return p

    def snapshot(self) -> dict:
        d = asdict(self)
        d.pop("out")
        d.pop("jobs")  # does not affect results
        return d


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, raw: str):
    kind = _FIELD_TYPES[name]
    if raw.strip().lower() in ("", "none") and "None" in str(kind):
        return None
    if "int" in str(kind):
        return int(raw)
    if "float" in str(kind):
        return float(raw)
    return raw.strip()


def read_config_file(path: str) -> dict:
    """``key = value`` lines; keys are RunConfig field names (dashes allowed)."""
    text = Path(path).read_text()
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.read_string("[run]\n" + text if not text.lstrip().startswith("[") else text)
    values = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            name = key.replace("-", "_")
            if name not in _FIELD_TYPES:
                raise UsageError(f"{path}: unknown key {key!r}")
            try:
                values[name] = _coerce(name, raw)
            except ValueError:
                raise UsageError(f"{path}: bad value for {key!r}: {raw!r}") from None
    return values


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        try:
            values.update(read_config_file(args.config))
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
    for name in _FIELD_TYPES:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _load_split(cfg: RunConfig):
    path = cfg.data_path()
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    series = read_csv(path)
    return split(
        series,
        date.fromisoformat(cfg.train_end),
        date.fromisoformat(cfg.test_start),
        date.fromisoformat(cfg.test_end) if cfg.test_end else None,
        train_start=date.fromisoformat(cfg.train_start) if cfg.train_start else None,
    )


def _out_dir(cfg: RunConfig, prefix: str) -> Path:
    if cfg.out:
        return Path(cfg.out)
    return Path("runs") / f"{prefix}-{time.strftime('%Y%m%d-%H%M%S')}"


def write_report_files(rep, out: Path, formats: list[str]) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        path = out / reporting.FILENAMES[fmt]
        path.write_bytes(reporting.render_report(rep, fmt))
        written.append(path)
    if "svg" in formats and rep.ok_rounds and rep.actuals:
        path = out / "forecast_vs_actual.svg"
        path.write_bytes(reporting.render_forecast_svg(rep))
        written.append(path)
    return written


def cmd_evaluate(args) -> int:
    cfg = resolve_config(args)
    train_series, test_series = _load_split(cfg)
    log.info("train=%d records, test=%d records", len(train_series), len(test_series))
    weeks = make_weeks(test_series)
    rep = run_rounds(
        cfg.model,
        train_series,
        weeks,
        cfg.rounds,
        cfg.seed,
        jobs=cfg.jobs,
        retrain_policy=cfg.retrain,
        stride=cfg.stride,
        scaler=cfg.scaler,
        train_overrides=cfg.train_overrides(),
    )
    out = _out_dir(cfg, ModelKind.parse(cfg.model).value)
    write_report_files(rep, out, cfg.format_list())
    (out / "config.json").write_text(json.dumps(reporting.json_safe(cfg.snapshot()), indent=2, sort_keys=True) + "\n")
    (out / "timing.json").write_text(json.dumps(reporting.timing_dict(rep), indent=2) + "\n")
    agg = rep.aggregates()["Mean"]
    print(
        f"{rep.kind} mean over {len(rep.ok_rounds)} round(s): RMSE {agg[0]:.2f}  "
        + "  ".join(f"{d} {v:.1f}" for d, v in zip(reporting.DAY_LABELS, agg[1:6]))
        + f"  time {agg[6]:.2f}s  RMSE/Mean {rep.ratio:.4f}  -> {out}"
    )
    if rep.partial:
        print(f"error: {len(rep.rounds) - len(rep.ok_rounds)} round(s) failed; report is partial", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    train_series, _ = _load_split(cfg)
    model = build(cfg.model, cfg.seed, **cfg.train_overrides())
    if cfg.scaler == "standard":
        model.scaler = Scaler.fit(train_series.opens)
    windows = make_windows(train_series, model.input_len, cfg.stride)
    _, history = train(model, windows.inputs, windows.targets, model.train_config)
    out = _out_dir(cfg, f"{model.kind.value}-model")
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.npz")
    (out / "config.json").write_text(json.dumps(reporting.json_safe(cfg.snapshot()), indent=2, sort_keys=True) + "\n")
    (out / "loss_history.json").write_text(json.dumps(history) + "\n")
    print(f"{model.kind.value}: {len(windows)} windows, final loss {history[-1]:.6g} -> {out / 'model.npz'}")
    return EXIT_OK


FEEDFORWARD_TOL = 1e-6
RECURRENT_TOL = 1e-4


def gradcheck_cases():
    """(name, layer, batch input shape, tolerance), one per layer kind."""
    return [
        ("dense", Dense(4, 3), (3, 4), FEEDFORWARD_TOL),
        ("relu", ReLU(), (3, 6), FEEDFORWARD_TOL),
        ("conv1d", Conv1D(2, 3, 3), (2, 6, 2), FEEDFORWARD_TOL),
        ("maxpool1d", MaxPool1D(2), (2, 7, 3), FEEDFORWARD_TOL),
        ("flatten", Flatten(), (2, 3, 4), FEEDFORWARD_TOL),
        ("repeat_vector", RepeatVector(3), (2, 4), FEEDFORWARD_TOL),
        ("time_distributed_dense", TimeDistributedDense(4, 2), (2, 3, 4), FEEDFORWARD_TOL),
        ("lstm", LSTM(2, 3, return_sequences=True), (2, 4, 2), RECURRENT_TOL),
        ("convlstm", ConvLSTM(1, 3, (1, 3)), (2, 2, 1, 5, 1), RECURRENT_TOL),
    ]


def cmd_gradcheck(args) -> int:
    failed = 0
    for name, layer, shape, tol in gradcheck_cases():
        err = gradient_check(layer, shape, eps=1e-5, seed=args.seed)
        ok = err < tol
        failed += not ok
        print(f"{name:<24} max_rel_err={err:.3e}  tol={tol:.0e}  {'ok' if ok else 'FAIL'}")
    return EXIT_OK if failed == 0 else EXIT_NUMERIC


def cmd_synth(args) -> int:
    series = synthesize(
        days=args.days,
        start=date.fromisoformat(args.start),
        base=args.base,
        trend=args.trend,
        amplitude=args.amplitude,
        period=args.period,
        phase=args.phase,
        noise=args.noise,
        seed=args.seed,
    )
    text = to_csv(series)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_report(args) -> int:
    src = Path(args.input)
    if not src.is_file():
        raise DataError(f"report not found: {src}")
    doc = json.loads(src.read_text())
    timing_path = src.with_name("timing.json")
    timing = json.loads(timing_path.read_text()) if timing_path.is_file() else None
    rep = reporting.from_dict(doc, timing)
    formats = [f.strip() for f in args.formats.split(",") if f.strip()]
    unknown = set(formats) - set(reporting.FORMATS)
    if unknown:
        raise UsageError(f"unknown report format(s): {', '.join(sorted(unknown))}")
    out = Path(args.out) if args.out else src.parent
    for path in write_report_files(rep, out, formats):
        print(path)
    return EXIT_OK


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; command-line flags take precedence")
    p.add_argument("--data", help=f"OHLCV CSV (relative paths also tried under ${DATA_DIR_ENV})")
    p.add_argument("--model", help="cnn1, cnn2, lstm1, lstm2 or lstm3 (default cnn1)")
    p.add_argument("--train-start", help="first training date, YYYY-MM-DD (default 2014-12-29)")
    p.add_argument("--train-end", help="last training date (default 2018-12-28)")
    p.add_argument("--test-start", help="first test date (default 2018-12-31)")
    p.add_argument("--test-end", help="last test date (default: end of file)")
    p.add_argument("--seed", type=int, help="base seed (default 0)")
    p.add_argument("--stride", type=int, help="training window stride (default 1)")
    p.add_argument("--retrain", choices=RETRAIN_POLICIES, help="walk-forward retraining (default none)")
    p.add_argument("--scaler", choices=SCALER_MODES, help="input/target scaling (default none)")
    p.add_argument("--epochs", type=int, help="override the model's epoch count")
    p.add_argument("--batch-size", type=int, help="override the model's batch size")
    p.add_argument("--lr", type=float, help="Adam learning rate (default 0.001)")
    p.add_argument("--out", help="output directory (default runs/<kind>-<timestamp>)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stockcast", description="Weekly open-value forecasting with walk-forward validation.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", help="multi-round walk-forward evaluation")
    _add_run_options(p)
    p.add_argument("--rounds", type=int, help="number of rounds (default 10)")
    p.add_argument("--jobs", type=int, help="rounds run in parallel (default 1)")
    p.add_argument("--formats", help="comma list of text,csv,json,svg")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("train", help="train one model on the training range and save it")
    _add_run_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradcheck", help="finite-difference check of every layer's backward pass")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("synth", help="write a synthetic OHLCV series in the ingestion format")
    p.add_argument("--days", type=int, default=300)
    p.add_argument("--start", default="2019-01-07", help="first trading day")
    p.add_argument("--base", type=float, default=1000.0)
    p.add_argument("--trend", type=float, default=0.2, help="open change per trading day")
    p.add_argument("--amplitude", type=float, default=50.0, help="seasonal amplitude")
    p.add_argument("--period", type=float, default=5.0, help="seasonal period in trading days")
    p.add_argument("--phase", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.0, help="Gaussian noise sd")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="re-render a saved report.json")
    p.add_argument("input", help="path to report.json")
    p.add_argument("--formats", default="text,csv,svg")
    p.add_argument("--out", help="output directory (default: next to the input)")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteError, FloatingPointError) as exc:
        print(f"error: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
