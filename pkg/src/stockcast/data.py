"""OHLCV ingestion, date splits, positional weeks, and supervised windows."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

HORIZON = 5
REQUIRED_COLUMNS = ("date", "open", "high", "low", "close", "volume")
CSV_HEADER = ("Date", "Open", "High", "Low", "Close", "Adj Close", "Volume")


class DataError(ValueError):
    """Input data that cannot be used as requested."""


@dataclass(frozen=True)
class DailyRecord:
    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        values = (self.open, self.high, self.low, self.close, self.volume)
        if not all(math.isfinite(v) for v in values):
            raise DataError(f"{self.date}: non-finite value")
        if min(self.open, self.high, self.low, self.close) <= 0:
            raise DataError(f"{self.date}: prices must be positive")
        if self.volume < 0:
            raise DataError(f"{self.date}: negative volume")
        if not (self.low <= self.open <= self.high and self.low <= self.close <= self.high):
            raise DataError(f"{self.date}: open/close outside [low, high]")


@dataclass(frozen=True)
class Series:
    """Trading days in strictly increasing date order."""

    records: tuple[DailyRecord, ...]
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for a, b in zip(self.records, self.records[1:]):
            if not a.date < b.date:
                raise DataError(f"dates not strictly increasing: {a.date} then {b.date}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return Series(self.records[item])
        return self.records[item]

    def __add__(self, other: "Series") -> "Series":
        return Series(self.records + other.records)

    @property
    def opens(self) -> np.ndarray:
        return np.array([r.open for r in self.records], dtype=np.float64)

    @property
    def dates(self) -> list[date]:
        return [r.date for r in self.records]


def _parse_date(text: str) -> date:
    text = text.strip()
    try:
        return date.fromisoformat(text)
    except ValueError:
        return datetime.fromisoformat(text).date()


def parse_csv(text: str) -> Series:
    """Parse Yahoo-style OHLCV text into a sorted Series.

    Rows whose numeric fields do not parse (``null`` placeholders and the
    like) or that break the OHLC ordering are dropped; the count is logged
    and kept on ``Series.dropped``. Duplicate dates are an error.
    """
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty CSV") from None
    index = {name.strip().lower(): i for i, name in enumerate(header)}
    missing = [c for c in REQUIRED_COLUMNS if c not in index]
    if missing:
        raise DataError(f"missing required column(s): {', '.join(missing)}")

    rows = []
    dropped = 0
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        try:
            d = _parse_date(row[index["date"]])
        except (ValueError, IndexError):
            raise DataError(f"line {lineno}: unparseable date") from None
        try:
            values = [float(row[index[c]]) for c in REQUIRED_COLUMNS[1:]]
            rows.append(DailyRecord(d, *values))
        except (ValueError, IndexError):
            dropped += 1
    if dropped:
        logger.warning("dropped %d row(s) with unusable numeric fields", dropped)
    if not rows:
        raise DataError("no usable rows")
    rows.sort(key=lambda r: r.date)
    dupes = sorted({a.date for a, b in zip(rows, rows[1:]) if a.date == b.date})
    if dupes:
        raise DataError("duplicate dates: " + ", ".join(d.isoformat() for d in dupes))
    return Series(tuple(rows), dropped=dropped)


def read_csv(path) -> Series:
    with open(path, newline="") as fh:
        return parse_csv(fh.read())


def to_csv(series: Series) -> str:
    """Serialise in the ingestion format; ``repr`` floats round-trip exactly."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in series:
        writer.writerow(
            [r.date.isoformat(), repr(r.open), repr(r.high), repr(r.low), repr(r.close), repr(r.close), repr(r.volume)]
        )
    return out.getvalue()


def split(
    series: Series,
    train_end: date,
    test_start: date,
    test_end: date | None = None,
    *,
    train_start: date | None = None,
) -> tuple[Series, Series]:
    """Inclusive date ranges: train ends at ``train_end``, test starts at ``test_start``.

    ``train_start`` and ``test_end`` are optional outer bounds.
    """
    if test_start <= train_end:
        raise DataError(f"test start {test_start} overlaps training range ending {train_end}")
    if test_end is not None and test_end < test_start:
        raise DataError(f"test end {test_end} precedes test start {test_start}")
    train = [r for r in series if r.date <= train_end and (train_start is None or r.date >= train_start)]
    test = [r for r in series if r.date >= test_start and (test_end is None or r.date <= test_end)]
    if not train:
        raise DataError(f"no records on or before {train_end}")
    if not test:
        raise DataError(f"no records in test range starting {test_start}")
    logger.info("split: %d training and %d test records", len(train), len(test))
    return Series(tuple(train)), Series(tuple(test))


def make_weeks(series: Series) -> list[Series]:
    """Consecutive 5-record blocks by position; a short tail is dropped."""
    n = len(series)
    if n < HORIZON:
        raise DataError(f"need at least {HORIZON} records to form a week, got {n}")
    rest = n % HORIZON
    if rest:
        logger.warning("make_weeks: dropped %d trailing record(s)", rest)
    return [series[i : i + HORIZON] for i in range(0, n - rest, HORIZON)]


@dataclass(frozen=True)
class WindowSet:
    inputs: np.ndarray
    targets: np.ndarray
    stride: int
    starts: np.ndarray

    def __len__(self) -> int:
        return len(self.inputs)


def make_windows(series: "Series | Sequence[float]", input_len: int, stride: int = 1) -> WindowSet:
    """Sliding windows of opens; each target is the next 5 opens."""
    opens = series.opens if isinstance(series, Series) else np.asarray(series, dtype=np.float64)
    if stride < 1:
        raise DataError(f"stride must be >= 1, got {stride}")
    n = len(opens)
    if n < input_len + HORIZON:
        raise DataError(f"series of {n} is too short for {input_len}-day windows plus a {HORIZON}-day target")
    starts = np.arange(0, n - input_len - HORIZON + 1, stride)
    inputs = np.stack([opens[s : s + input_len] for s in starts])
    targets = np.stack([opens[s + input_len : s + input_len + HORIZON] for s in starts])
    return WindowSet(inputs, targets, stride, starts)


def trading_days(start: date, n: int) -> list[date]:
    days = []
    d = start
    while len(days) < n:
        if d.weekday() < 5:
            days.append(d)
        d += timedelta(days=1)
    return days


def synth_open(t, base: float, trend: float, amplitude: float, period: float, phase: float = 0.0):
    """Noise-free open level on trading day ``t`` (0-based)."""
    t = np.asarray(t, dtype=np.float64)
    return base + trend * t + amplitude * np.sin(2.0 * np.pi * t / period + phase)


def synthesize(
    days: int = 300,
    start: date = date(2019, 1, 7),
    base: float = 1000.0,
    trend: float = 0.2,
    amplitude: float = 50.0,
    period: float = 5.0,
    phase: float = 0.0,
    noise: float = 0.0,
    seed: int = 0,
) -> Series:
    """Trend plus periodic seasonality plus seeded Gaussian noise.

    ``open[t] = base + trend*t + amplitude*sin(2*pi*t/period + phase) + noise*e[t]``.
    Close is the same curve half a day later; high/low wrap open and close by
    a fixed margin. Dates are consecutive weekdays from ``start``.
    """
    if days < 1:
        raise DataError("days must be positive")
    floor = base - abs(trend) * days - abs(amplitude) - 4 * abs(noise)
    if floor <= 0.01 * base:
        raise DataError("parameters would produce non-positive prices")
    rng = np.random.default_rng(seed)
    t = np.arange(days)
    opens = synth_open(t, base, trend, amplitude, period, phase) + noise * rng.standard_normal(days)
    closes = synth_open(t + 0.5, base, trend, amplitude, period, phase) + noise * rng.standard_normal(days)
    margin = 0.002 * base
    highs = np.maximum(opens, closes) + margin
    lows = np.minimum(opens, closes) - margin
    volumes = rng.integers(100_000, 200_000, size=days)
    records = tuple(
        DailyRecord(d, float(o), float(h), float(l), float(c), float(v))
        for d, o, h, l, c, v in zip(trading_days(start, days), opens, highs, lows, closes, volumes)
    )
    return Series(records)


def concat_series(parts: Iterable[Series]) -> Series:
    records: tuple[DailyRecord, ...] = ()
    for p in parts:
        records += p.records
    return Series(records)
