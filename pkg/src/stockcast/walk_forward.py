"""Walk-forward evaluation: weekly forecasts, per-day RMSE, multi-round stats."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import HORIZON, Series, concat_series, make_windows
from .models import ModelKind, Overrides, Scaler, build, forecast, model_metadata
from .optim import train

logger = logging.getLogger(__name__)

DAY_LABELS = ("Mon", "Tue", "Wed", "Thu", "Fri")
RETRAIN_POLICIES = ("none", "weekly")
SCALER_MODES = ("none", "standard")


@dataclass
class ForecastMatrix:
    predictions: np.ndarray
    actuals: np.ndarray
    week_starts: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.predictions = np.asarray(self.predictions, dtype=np.float64)
        self.actuals = np.asarray(self.actuals, dtype=np.float64)
        if self.predictions.shape != self.actuals.shape:
            raise ValueError(f"predictions {self.predictions.shape} vs actuals {self.actuals.shape}")
        if self.predictions.ndim != 2 or self.predictions.shape[1] != HORIZON:
            raise ValueError(f"expected a W x {HORIZON} matrix, got {self.predictions.shape}")

    @property
    def weeks(self) -> int:
        return len(self.predictions)


def rmse(pred, actual) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    actual = np.asarray(actual, dtype=np.float64)
    if pred.shape != actual.shape:
        raise ValueError(f"rmse: {pred.shape} vs {actual.shape}")
    return float(np.sqrt(np.mean((pred - actual) ** 2)))


def per_day_rmse(m: ForecastMatrix) -> np.ndarray:
    return np.sqrt(np.mean((m.predictions - m.actuals) ** 2, axis=0))


def ratio_to_mean(overall_rmse: float, test: "Series | Sequence[float]") -> float:
    opens = test.opens if isinstance(test, Series) else np.asarray(test, dtype=np.float64)
    return float(overall_rmse / np.mean(opens))


def walk_forward_evaluate(
    kind: "ModelKind | str",
    train_series: Series,
    test_weeks: Sequence[Series],
    seed: int = 0,
    retrain_policy: str = "none",
    *,
    stride: int = 1,
    scaler: str = "none",
    overrides: Overrides | None = None,
    train_overrides: dict | None = None,
) -> tuple[ForecastMatrix, float]:
    """Train once on ``train_series``, then forecast the test weeks in order.

    After each week is forecast its actual records join the history. With
    ``retrain_policy="weekly"`` the model is trained again (warm start) on
    windows over the extended history before the next forecast. Returns the
    forecast matrix and the wall-clock seconds for training plus forecasting.
    """
    if retrain_policy not in RETRAIN_POLICIES:
        raise ValueError(f"retrain_policy must be one of {RETRAIN_POLICIES}, got {retrain_policy!r}")
    if scaler not in SCALER_MODES:
        raise ValueError(f"scaler must be one of {SCALER_MODES}, got {scaler!r}")
    if not test_weeks:
        raise ValueError("no test weeks")
    t0 = time.perf_counter()
    model = build(kind, seed, overrides, **(train_overrides or {}))
    if scaler == "standard":
        model.scaler = Scaler.fit(train_series.opens)
    windows = make_windows(train_series, model.input_len, stride)
    train(model, windows.inputs, windows.targets, model.train_config)

    history = list(train_series.opens)
    preds, actuals, starts = [], [], []
    for w, week in enumerate(test_weeks):
        preds.append(forecast(model, history))
        actuals.append(week.opens)
        starts.append(week.records[0].date.isoformat())
        history.extend(week.opens)
        if retrain_policy == "weekly" and w + 1 < len(test_weeks):
            try:
                ws = make_windows(history, model.input_len, stride)
                train(model, ws.inputs, ws.targets, model.train_config)
            except Exception as exc:
                raise type(exc)(f"retraining after test week {w + 1}: {exc}") from exc
    seconds = time.perf_counter() - t0
    return ForecastMatrix(np.array(preds), np.array(actuals), starts), seconds


def persistence_baseline(test_weeks: Sequence[Series], history: Series) -> ForecastMatrix:
    """Every day of week ``w`` predicted as the last open before week ``w``."""
    last = history.opens[-1]
    preds, actuals, starts = [], [], []
    for week in test_weeks:
        preds.append(np.full(HORIZON, last))
        actuals.append(week.opens)
        starts.append(week.records[0].date.isoformat())
        last = week.opens[-1]
    return ForecastMatrix(np.array(preds), np.array(actuals), starts)


@dataclass
class RoundResult:
    round: int
    seed: int
    rmse: float = float("nan")
    per_day: list[float] = field(default_factory=list)
    seconds: float = 0.0
    predictions: list[list[float]] | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class EvalReport:
    """Round rows plus Mean/Min/Max/SD aggregates.

    Aggregates are computed on demand from the successful round rows; SD is
    the sample standard deviation (n - 1 denominator, 0 for a single round).
    """

    kind: str
    rounds: list[RoundResult]
    mean_open: float
    metadata: dict = field(default_factory=dict)
    actuals: list[list[float]] | None = None
    week_starts: list[str] = field(default_factory=list)

    @property
    def ok_rounds(self) -> list[RoundResult]:
        return [r for r in self.rounds if r.ok]

    @property
    def partial(self) -> bool:
        return len(self.ok_rounds) != len(self.rounds)

    def table(self) -> np.ndarray:
        """Rows = ok rounds; columns = overall RMSE, Mon..Fri, seconds."""
        return np.array([[r.rmse, *r.per_day, r.seconds] for r in self.ok_rounds], dtype=np.float64)

    def aggregates(self) -> dict[str, np.ndarray]:
        t = self.table()
        if len(t) == 0:
            nan = np.full(HORIZON + 2, np.nan)
            return {"Mean": nan, "Min": nan, "Max": nan, "SD": nan}
        sd = t.std(axis=0, ddof=1) if len(t) > 1 else np.zeros(t.shape[1])
        return {"Mean": t.mean(axis=0), "Min": t.min(axis=0), "Max": t.max(axis=0), "SD": sd}

    def ratios(self) -> np.ndarray:
        """Mean RMSE / mean test open for the overall column and each day."""
        return self.aggregates()["Mean"][: HORIZON + 1] / self.mean_open

    @property
    def ratio(self) -> float:
        return float(self.ratios()[0])

    @classmethod
    def from_rows(cls, kind: str, rows: Sequence[Sequence[float]], mean_open: float, **kw) -> "EvalReport":
        """Build from ``[rmse, mon, tue, wed, thu, fri, seconds]`` rows."""
        rounds = [
            RoundResult(i + 1, i, float(row[0]), [float(v) for v in row[1:6]], float(row[6]))
            for i, row in enumerate(rows)
        ]
        return cls(kind, rounds, float(mean_open), **kw)


def _round_job(args) -> RoundResult:
    kind, train_series, test_weeks, i, seed, opts = args
    try:
        matrix, seconds = walk_forward_evaluate(kind, train_series, test_weeks, seed, **opts)
    except Exception as exc:  # recorded per round; the report is marked partial
        logger.error("round %d (seed %d) failed: %s", i, seed, exc)
        return RoundResult(i, seed, error=f"{type(exc).__name__}: {exc}")
    return RoundResult(
        i,
        seed,
        rmse(matrix.predictions, matrix.actuals),
        per_day_rmse(matrix).tolist(),
        seconds,
        matrix.predictions.tolist(),
    )


def run_rounds(
    kind: "ModelKind | str",
    train_series: Series,
    test_weeks: Sequence[Series],
    n_rounds: int = 10,
    base_seed: int = 0,
    *,
    jobs: int = 1,
    retrain_policy: str = "none",
    stride: int = 1,
    scaler: str = "none",
    overrides: Overrides | None = None,
    train_overrides: dict | None = None,
) -> EvalReport:
    """Repeat the walk-forward evaluation with seeds ``base_seed .. base_seed+n-1``."""
    if n_rounds < 1:
        raise ValueError("n_rounds must be >= 1")
    kind = ModelKind.parse(kind)
    opts = dict(
        retrain_policy=retrain_policy,
        stride=stride,
        scaler=scaler,
        overrides=overrides,
        train_overrides=train_overrides,
    )
    tasks = [(kind, train_series, list(test_weeks), i + 1, base_seed + i, opts) for i in range(n_rounds)]
    if jobs > 1 and n_rounds > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rounds = list(pool.map(_round_job, tasks))
    else:
        rounds = [_round_job(t) for t in tasks]

    test_all = concat_series(test_weeks)
    probe = build(kind, base_seed, overrides, **(train_overrides or {}))
    meta = model_metadata(probe)
    meta["train_config"].pop("seed")
    meta.update(
        retrain_policy=retrain_policy,
        stride=stride,
        scaler=scaler,
        n_rounds=n_rounds,
        base_seed=base_seed,
        train_records=len(train_series),
        test_records=len(test_all),
        test_weeks=len(test_weeks),
    )
    return EvalReport(
        kind.value,
        rounds,
        float(np.mean(test_all.opens)),
        meta,
        [w.opens.tolist() for w in test_weeks],
        [w.records[0].date.isoformat() for w in test_weeks],
    )
