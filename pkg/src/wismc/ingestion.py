"""Tick parsing, minute-bar resampling and log-volume changes.

A *session* is one calendar date (in the timestamps' own timezone).  Bars
never straddle sessions and no log change is produced across a session
boundary, so overnight gaps are excluded from the modelled series.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np
import pandas as pd

from .errors import FormatError, IngestionError, PreconditionError

logger = logging.getLogger(__name__)

DEFAULT_BAR = timedelta(seconds=60)
MAX_MALFORMED_FRACTION = 0.01


class UnsortedTicksWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TickRecord:
    timestamp: datetime
    price: float
    volume: int


@dataclass(frozen=True)
class FormatSpec:
    """Column map for a delimited tick file.

    Columns are given either by header name (str) or zero-based position
    (int).  ``timestamp_format`` is a ``strptime`` pattern; when omitted
    timestamps are read with ``datetime.fromisoformat``.
    """

    timestamp: str | int = "timestamp"
    price: str | int = "price"
    volume: str | int = "volume"
    delimiter: str = ","
    has_header: bool = True
    timestamp_format: str | None = None


@dataclass
class ParseReport:
    rows: int = 0
    malformed_rows: list[int] = field(default_factory=list)
    resorted: bool = False

    @property
    def malformed(self) -> int:
        return len(self.malformed_rows)


def _text_lines(stream: IO | bytes | str) -> io.TextIOBase:
    if isinstance(stream, bytes):
        return io.StringIO(stream.decode("utf-8"))
    if isinstance(stream, str):
        return io.StringIO(stream)
    if isinstance(stream, io.TextIOBase):
        return stream
    return io.TextIOWrapper(stream, encoding="utf-8", newline="")


def _resolve_columns(fmt: FormatSpec, header: list[str] | None) -> tuple[int, int, int]:
    cols = []
    for name in (fmt.timestamp, fmt.price, fmt.volume):
        if isinstance(name, int):
            cols.append(name)
            continue
        if header is None:
            raise FormatError(f"column {name!r} given by name but the file has no header")
        stripped = [h.strip() for h in header]
        if name not in stripped:
            raise FormatError(f"header {header!r} has no column {name!r}")
        cols.append(stripped.index(name))
    return cols[0], cols[1], cols[2]


def _parse_timestamp(text: str, fmt: str | None) -> datetime:
    text = text.strip()
    if fmt:
        return datetime.strptime(text, fmt)
    return datetime.fromisoformat(text)


def _parse_volume(text: str) -> int:
    value = float(text)
    if not value.is_integer() or value < 0:
        raise ValueError(f"bad volume {text!r}")
    return int(value)


def parse_ticks(stream: IO | bytes | str, fmt: FormatSpec | None = None) -> tuple[list[TickRecord], ParseReport]:
    """Read tick records from a delimited-text stream.

    Returns the records in timestamp order together with a report.  Rows
    that fail to parse are skipped and their (1-based) line numbers kept
    in the report; if more than 1% of the data rows are malformed an
    ``IngestionError`` is raised instead.  Out-of-order input is sorted
    stably and an ``UnsortedTicksWarning`` is emitted.
    """
    fmt = fmt or FormatSpec()
    reader = csv.reader(_text_lines(stream), delimiter=fmt.delimiter)
    report = ParseReport()

    header = None
    line_no = 0
    if fmt.has_header:
        for row in reader:
            line_no += 1
            if any(cell.strip() for cell in row):
                header = row
                break
        if header is None:
            return [], report
    cols = _resolve_columns(fmt, header)

    ticks: list[TickRecord] = []
    for row in reader:
        line_no += 1
        if not any(cell.strip() for cell in row):
            continue
        report.rows += 1
        try:
            ts = _parse_timestamp(row[cols[0]], fmt.timestamp_format)
            price = float(row[cols[1]])
            volume = _parse_volume(row[cols[2]])
            if not (price > 0 and math.isfinite(price)):
                raise ValueError("price must be positive")
        except (ValueError, IndexError):
            report.malformed_rows.append(line_no)
            continue
        ticks.append(TickRecord(ts, price, volume))

    if report.rows and report.malformed / report.rows > MAX_MALFORMED_FRACTION:
        raise IngestionError(
            f"{report.malformed} of {report.rows} rows malformed (lines {report.malformed_rows[:20]})",
            rows=report.malformed_rows,
        )
    if report.malformed:
        logger.warning("skipped %d malformed rows: %s", report.malformed, report.malformed_rows)

    aware = {t.timestamp.tzinfo is not None for t in ticks}
    if len(aware) > 1:
        raise FormatError("timestamps mix timezone-aware and naive values")

    stamps = [t.timestamp for t in ticks]
    if any(b < a for a, b in zip(stamps, stamps[1:])):
        ticks = sorted(ticks, key=lambda t: t.timestamp)
        report.resorted = True
        warnings.warn("tick records were out of timestamp order and have been re-sorted", UnsortedTicksWarning,
                      stacklevel=2)
    return ticks, report


@dataclass
class VolumeSeries:
    symbol: str
    bar_interval: timedelta
    timestamps: pd.DatetimeIndex
    volumes: np.ndarray
    last_prices: np.ndarray | None = None
    sessions: np.ndarray | None = None
    zero_bars_merged: int = 0

    def __post_init__(self):
        self.timestamps = pd.DatetimeIndex(self.timestamps)
        self.volumes = np.asarray(self.volumes, dtype=float)
        if self.last_prices is not None:
            self.last_prices = np.asarray(self.last_prices, dtype=float)
            if len(self.last_prices) != len(self.volumes):
                raise ValueError("last_prices and volumes differ in length")
        if len(self.timestamps) != len(self.volumes):
            raise ValueError("timestamps and volumes differ in length")
        if self.sessions is None:
            self.sessions = session_ids(self.timestamps)
        if len(self.timestamps) > 1 and not (np.diff(self.timestamps.asi8) > 0).all():
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return len(self.volumes)

    def same_bars(self, other: "VolumeSeries") -> bool:
        prices_equal = (
            (self.last_prices is None and other.last_prices is None)
            or (self.last_prices is not None and other.last_prices is not None
                and np.array_equal(self.last_prices, other.last_prices))
        )
        return (self.timestamps.equals(other.timestamps)
                and np.array_equal(self.volumes, other.volumes) and prices_equal)


@dataclass
class LogChangeSeries:
    """Log-volume changes ``log(V[t+1] / V[t])`` with bar-start timestamps.

    Sessions are concatenated; ``sessions`` records which session each
    value belongs to.
    """

    values: np.ndarray
    symbol: str = ""
    timestamps: pd.DatetimeIndex | None = None
    sessions: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.sessions is None:
            self.sessions = np.zeros(len(self.values), dtype=np.int64)

    def __len__(self):
        return len(self.values)


def session_ids(timestamps: pd.DatetimeIndex) -> np.ndarray:
    days = pd.DatetimeIndex(timestamps).normalize()
    if len(days) == 0:
        return np.zeros(0, dtype=np.int64)
    change = np.concatenate([[0], (days[1:] != days[:-1]).astype(np.int64)])
    return np.cumsum(change)


def _ticks_frame(ticks: Sequence[TickRecord]) -> pd.DataFrame:
    return pd.DataFrame({
        "timestamp": pd.to_datetime([t.timestamp for t in ticks]),
        "price": [t.price for t in ticks],
        "volume": [t.volume for t in ticks],
    })


def _merge_zero_bars(volumes: np.ndarray) -> tuple[np.ndarray, int]:
    """Boolean keep-mask for one session plus the number of bars merged.

    A zero bar folds into the next non-zero bar of the session; trailing
    zero bars fold into the last non-zero one.  Either way the bar adds
    nothing to the sum, so the kept bars carry the session total.
    """
    keep = volumes > 0
    return keep, int((~keep).sum())


def resample(ticks: Sequence[TickRecord] | VolumeSeries, bar_interval: timedelta = DEFAULT_BAR,
             symbol: str = "") -> VolumeSeries:
    """Aggregate ticks into fixed bars carrying the cumulated volume.

    Bars are left-closed ``[start, start + bar_interval)`` and labelled by
    their start.  Every interval between the first and last tick of a
    session gets a bar; the bar price is the last traded price at or before
    the bar end.  Zero-volume bars are merged into their successor and
    counted in ``zero_bars_merged``.

    An existing ``VolumeSeries`` may be passed in; each bar is treated as a
    single tick at its label, which makes resampling at the same interval
    return the same bars.
    """
    if isinstance(ticks, VolumeSeries):
        symbol = symbol or ticks.symbol
        prices = ticks.last_prices if ticks.last_prices is not None else np.ones(len(ticks))
        frame = pd.DataFrame({"timestamp": ticks.timestamps, "price": prices, "volume": ticks.volumes})
        has_prices = ticks.last_prices is not None
    else:
        if len(ticks) == 0:
            raise IngestionError("no data")
        frame = _ticks_frame(ticks)
        has_prices = True
    if frame.empty:
        raise IngestionError("no data")

    step = pd.Timedelta(bar_interval)
    frame["bar"] = frame["timestamp"].dt.floor(step)
    grouped = frame.groupby("bar", sort=True).agg(volume=("volume", "sum"), price=("price", "last"))
    day = grouped.index.normalize()

    stamps, vols, prices, merged = [], [], [], 0
    for _, block in grouped.groupby(day, sort=True):
        full = pd.date_range(block.index[0], block.index[-1], freq=step)
        block = block.reindex(full)
        block["volume"] = block["volume"].fillna(0.0)
        block["price"] = block["price"].ffill()
        keep, n_merged = _merge_zero_bars(block["volume"].to_numpy(dtype=float))
        merged += n_merged
        stamps.append(block.index[keep])
        vols.append(block["volume"].to_numpy(dtype=float)[keep])
        prices.append(block["price"].to_numpy(dtype=float)[keep])

    if merged:
        logger.info("%s: merged %d zero-volume bars", symbol or "series", merged)
    timestamps = stamps[0].append(stamps[1:]) if len(stamps) > 1 else stamps[0]
    return VolumeSeries(
        symbol=symbol,
        bar_interval=bar_interval,
        timestamps=timestamps,
        volumes=np.concatenate(vols),
        last_prices=np.concatenate(prices) if has_prices else None,
        zero_bars_merged=merged,
    )


def log_volume_change(series: VolumeSeries) -> LogChangeSeries:
    bad = np.flatnonzero(~(series.volumes > 0))
    if bad.size:
        k = int(bad[0])
        raise PreconditionError(f"non-positive volume {series.volumes[k]} at bar {k} ({series.timestamps[k]})")
    same_session = series.sessions[1:] == series.sessions[:-1]
    values = np.log(series.volumes[1:] / series.volumes[:-1])[same_session]
    return LogChangeSeries(
        values=values,
        symbol=series.symbol,
        timestamps=series.timestamps[:-1][same_session],
        sessions=series.sessions[:-1][same_session],
    )


def _metadata_lines(metadata: dict | None) -> str:
    if not metadata:
        return ""
    return "".join(f"# {key}: {value}\n" for key, value in metadata.items())


def write_volume_series(series: VolumeSeries, path: str | Path, metadata: dict | None = None) -> None:
    lines = [_metadata_lines(metadata), "timestamp,volume,last_price\n"]
    prices = series.last_prices if series.last_prices is not None else [None] * len(series)
    for ts, vol, price in zip(series.timestamps, series.volumes.tolist(), prices):
        vol = int(vol) if float(vol).is_integer() else vol
        lines.append(f"{ts.isoformat()},{vol!r},{'' if price is None else repr(float(price))}\n")
    Path(path).write_text("".join(lines), encoding="utf-8")


def read_volume_series(path: str | Path, symbol: str | None = None,
                       bar_interval: timedelta = DEFAULT_BAR) -> VolumeSeries:
    path = Path(path)
    frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    missing = {"timestamp", "volume"} - set(frame.columns)
    if missing:
        raise FormatError(f"{path}: missing columns {sorted(missing)}")
    prices = None
    if "last_price" in frame.columns and frame["last_price"].notna().all():
        prices = frame["last_price"].to_numpy(dtype=float)
    return VolumeSeries(
        symbol=symbol if symbol is not None else path.stem,
        bar_interval=bar_interval,
        timestamps=pd.to_datetime(frame["timestamp"]),
        volumes=frame["volume"].to_numpy(dtype=float),
        last_prices=prices,
    )


def read_log_changes(paths: Iterable[str | Path]) -> list[LogChangeSeries]:
    return [log_volume_change(read_volume_series(p)) for p in paths]
