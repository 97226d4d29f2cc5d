"""Price data ingestion, validation, splitting, and synthetic market generation.

The on-disk format is a UTF-8 CSV with header ``date,<ticker>,...,<ticker>``
and one row per trading day: an ISO ``YYYY-MM-DD`` date followed by one
strictly positive close price per ticker. Rows are sorted by date on load;
duplicate dates are rejected. Files written by :func:`write_csv` round-trip
through :func:`load_csv` with prices preserved to 10 significant digits.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientDataError, ParseError, ValidationError

__all__ = [
    "PriceFrame",
    "ReturnsFrame",
    "SplitSpec",
    "load_csv",
    "write_csv",
    "to_returns",
    "split",
    "synth_market",
]


def _frozen_array(values, shape_hint: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    if arr.ndim != 2:
        raise ValidationError(f"{shape_hint} must be two-dimensional, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class PriceFrame:
    """Aligned daily close prices: one row per date, one column per ticker."""

    dates: tuple[dt.date, ...]
    tickers: tuple[str, ...]
    prices: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(str(t) for t in self.tickers))
        object.__setattr__(self, "prices", _frozen_array(self.prices, "prices"))
        t, n = self.prices.shape
        if len(self.dates) != t:
            raise ValidationError(f"{len(self.dates)} dates but {t} price rows")
        if len(self.tickers) != n:
            raise ValidationError(f"{len(self.tickers)} tickers but {n} price columns")
        if n < 1:
            raise ValidationError("at least one ticker required")
        if t < 2:
            raise InsufficientDataError(f"need at least 2 rows of prices, got {t}")
        if len(set(self.tickers)) != n:
            raise ValidationError("duplicate ticker names")
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise ValidationError(f"dates not strictly increasing at {b}")
        if not np.all(np.isfinite(self.prices)):
            raise ValidationError("non-finite price")
        if np.any(self.prices <= 0.0):
            r, c = np.argwhere(self.prices <= 0.0)[0]
            raise ValidationError(
                f"non-positive price for {self.tickers[c]} on {self.dates[r]}"
            )

    @property
    def n_days(self) -> int:
        return self.prices.shape[0]

    @property
    def n_assets(self) -> int:
        return self.prices.shape[1]


@dataclass(frozen=True)
class ReturnsFrame:
    """Simple daily returns; row ``t`` is dated by the later of the two days."""

    dates: tuple[dt.date, ...]
    tickers: tuple[str, ...]
    returns: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(str(t) for t in self.tickers))
        object.__setattr__(self, "returns", _frozen_array(self.returns, "returns"))
        t, n = self.returns.shape
        if len(self.dates) != t:
            raise ValidationError(f"{len(self.dates)} dates but {t} return rows")
        if len(self.tickers) != n:
            raise ValidationError(f"{len(self.tickers)} tickers but {n} return columns")
        if not np.all(np.isfinite(self.returns)):
            raise ValidationError("non-finite return")
        if np.any(self.returns <= -1.0):
            raise ValidationError("return at or below -100%")

    @property
    def n_days(self) -> int:
        return self.returns.shape[0]

    @property
    def n_assets(self) -> int:
        return self.returns.shape[1]


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/test split at ``floor(train_fraction * n_rows)``."""

    train_fraction: float = 0.8

    def __post_init__(self):
        f = float(self.train_fraction)
        if not (0.0 < f < 1.0) or not math.isfinite(f):
            raise ValidationError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        object.__setattr__(self, "train_fraction", f)

    def boundary_index(self, n_rows: int) -> int:
        return int(math.floor(self.train_fraction * n_rows))


def load_csv(path) -> PriceFrame:
    """Parse a price CSV into a validated :class:`PriceFrame`.

    Raises ParseError with a line number on malformed cells, ValidationError
    on contract violations (duplicate dates, non-positive prices), and
    InsufficientDataError when fewer than two data rows are present.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty file", line_number=1) from None
        if len(header) < 2 or header[0].strip() != "date":
            raise ParseError(
                "header must be 'date,<ticker>,...' with at least one ticker", line_number=1
            )
        tickers = tuple(h.strip() for h in header[1:])
        if any(not t for t in tickers):
            raise ParseError("empty ticker name in header", line_number=1)

        rows: list[tuple[dt.date, list[float]]] = []
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue  # ignore trailing blank lines
            if len(row) != len(header):
                raise ParseError(
                    f"expected {len(header)} fields, got {len(row)}", line_number=line_no
                )
            try:
                day = dt.date.fromisoformat(row[0].strip())
            except ValueError:
                raise ParseError(f"bad date {row[0]!r}", line_number=line_no) from None
            try:
                values = [float(cell) for cell in row[1:]]
            except ValueError:
                raise ParseError(f"bad price in row for {row[0]}", line_number=line_no) from None
            rows.append((day, values))

    if len(rows) < 2:
        raise InsufficientDataError(f"need at least 2 data rows, got {len(rows)}")
    seen: set[dt.date] = set()
    for day, _ in rows:
        if day in seen:
            raise ValidationError(f"duplicate date {day}")
        seen.add(day)
    rows.sort(key=lambda item: item[0])
    dates = tuple(day for day, _ in rows)
    prices = np.array([values for _, values in rows], dtype=np.float64)
    return PriceFrame(dates=dates, tickers=tickers, prices=prices)


def write_csv(frame: PriceFrame, path) -> None:
    """Write a frame in the same dialect load_csv reads, 10 significant digits."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("date," + ",".join(frame.tickers) + "\n")
        for day, row in zip(frame.dates, frame.prices):
            cells = ",".join(f"{x:.10g}" for x in row)
            fh.write(f"{day.isoformat()},{cells}\n")


def to_returns(frame: PriceFrame) -> ReturnsFrame:
    """Simple returns ``p[t]/p[t-1] - 1``, one row fewer than the frame."""
    rets = frame.prices[1:] / frame.prices[:-1] - 1.0
    return ReturnsFrame(dates=frame.dates[1:], tickers=frame.tickers, returns=rets)


def split(frame: PriceFrame, spec: SplitSpec) -> tuple[PriceFrame, PriceFrame]:
    """Chronological split; both segments must keep at least two rows."""
    t = frame.n_days
    b = spec.boundary_index(t)
    if b < 2 or t - b < 2:
        raise InsufficientDataError(
            f"split at row {b} of {t} leaves a segment shorter than 2 rows"
        )
    train = PriceFrame(dates=frame.dates[:b], tickers=frame.tickers, prices=frame.prices[:b])
    test = PriceFrame(dates=frame.dates[b:], tickers=frame.tickers, prices=frame.prices[b:])
    return train, test


def _trading_dates(days: int, start: dt.date) -> tuple[dt.date, ...]:
    # Monday-Friday sequence; weekends are skipped like exchange calendars do.
    out: list[dt.date] = []
    day = start
    while len(out) < days:
        if day.weekday() < 5:
            out.append(day)
        day += dt.timedelta(days=1)
    return tuple(out)


def synth_market(
    n_assets: int,
    days: int,
    drift,
    vol,
    correlation,
    seed: int,
    start_price: float = 100.0,
    start_date: dt.date = dt.date(2010, 1, 4),
    tickers: tuple[str, ...] | None = None,
) -> PriceFrame:
    """Correlated geometric random walk prices.

    Daily log-returns are ``log(1 + drift_i) + vol_i * eps_i`` with ``eps``
    standard normal shocks correlated by the given matrix, so with all vols
    zero prices compound by exactly ``(1 + drift_i)`` per day. Deterministic
    for a fixed seed.

    Args:
        n_assets: number of columns.
        days: number of rows, at least 2.
        drift: scalar or length-n daily expected simple growth per asset.
        vol: scalar or length-n daily log-return standard deviation, >= 0.
        correlation: n x n symmetric PSD matrix with unit diagonal.
        seed: generator seed.
    """
    if n_assets < 1:
        raise ValidationError("n_assets must be >= 1")
    if days < 2:
        raise InsufficientDataError("days must be >= 2")
    drift_v = np.broadcast_to(np.asarray(drift, dtype=np.float64), (n_assets,)).copy()
    vol_v = np.broadcast_to(np.asarray(vol, dtype=np.float64), (n_assets,)).copy()
    corr = np.asarray(correlation, dtype=np.float64)
    if corr.shape != (n_assets, n_assets):
        raise ValidationError(f"correlation must be {n_assets}x{n_assets}, got {corr.shape}")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ValidationError("correlation matrix must be symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise ValidationError("correlation matrix must have unit diagonal")
    if np.any(drift_v <= -1.0):
        raise ValidationError("drift at or below -100% per day")
    if np.any(vol_v < 0.0):
        raise ValidationError("negative volatility")
    eigvals, eigvecs = np.linalg.eigh(corr)
    if eigvals.min() < -1e-10:
        raise ValidationError(f"correlation matrix not PSD (min eigenvalue {eigvals.min():.3e})")
    factor = eigvecs * np.sqrt(np.clip(eigvals, 0.0, None))

    rng = np.random.default_rng(seed)
    shocks = rng.standard_normal((days - 1, n_assets)) @ factor.T
    log_steps = np.log1p(drift_v)[None, :] + vol_v[None, :] * shocks
    log_prices = np.vstack([np.zeros((1, n_assets)), np.cumsum(log_steps, axis=0)])
    prices = float(start_price) * np.exp(log_prices)

    if tickers is None:
        tickers = tuple(f"A{i + 1}" for i in range(n_assets))
    return PriceFrame(
        dates=_trading_dates(days, start_date), tickers=tickers, prices=prices
    )
