"""Sampled time series: CSV ingestion, rescaling and noise augmentation."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np


class IngestionError(ValueError):
    """Raised when a trace file cannot be turned into a valid trace."""


class TraceDomainError(ValueError):
    """Raised when a trace is queried outside its time domain."""


@dataclass(frozen=True, eq=False)
class Trace:
    """A finite sampled time series ``x: T -> D``.

    Times are non-negative and strictly increasing, values are finite.
    Both arrays are stored read-only so a trace can be shared freely.
    """

    id: str
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float).ravel()
        values = np.array(self.values, dtype=float).ravel()
        if times.size == 0:
            raise ValueError(f"trace {self.id!r} has no samples")
        if times.shape != values.shape:
            raise ValueError(f"trace {self.id!r}: {times.size} times but {values.size} values")
        if not np.all(np.isfinite(times)) or np.any(times < 0):
            raise ValueError(f"trace {self.id!r}: times must be finite and non-negative")
        if np.any(np.diff(times) <= 0):
            raise ValueError(f"trace {self.id!r}: times must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"trace {self.id!r}: values must be finite")
        times.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.id == other.id
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.id, self.times.tobytes(), self.values.tobytes()))

    @property
    def start(self) -> float:
        return float(self.times[0])

    @property
    def end(self) -> float:
        return float(self.times[-1])

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.times.tolist(), self.values.tolist()))

    def with_id(self, new_id: str) -> "Trace":
        return Trace(new_id, self.times, self.values)


@dataclass(frozen=True)
class Rescaling:
    time_scale: float = 1.0
    value_scale: float = 1.0

    def __post_init__(self):
        if not (self.time_scale > 0 and self.value_scale > 0):
            raise ValueError("rescaling factors must be strictly positive")

    def __mul__(self, other: "Rescaling") -> "Rescaling":
        return Rescaling(self.time_scale * other.time_scale, self.value_scale * other.value_scale)


def from_samples(trace_id: str, samples: Iterable[tuple[float, float]]) -> Trace:
    pairs = list(samples)
    if not pairs:
        raise ValueError(f"trace {trace_id!r} has no samples")
    times, values = zip(*pairs)
    return Trace(trace_id, np.asarray(times, dtype=float), np.asarray(values, dtype=float))


def load_trace_csv(source: IO[bytes] | bytes | str, trace_id: str = "trace") -> Trace:
    """Parse a ``time,value`` CSV into a :class:`Trace`.

    ``source`` may be a binary stream, raw bytes or an already decoded
    string. Blank lines and lines starting with ``#`` are skipped. Errors
    name the offending 1-based file line.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        try:
            source = source.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise IngestionError(f"trace {trace_id!r}: not valid UTF-8 ({exc})") from None
    if source.startswith("﻿"):
        source = source[1:]

    header_seen = False
    times: list[float] = []
    values: list[float] = []
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if not header_seen:
            if [c.strip() for c in line.split(",")] != ["time", "value"]:
                raise IngestionError(f"line {lineno}: expected header 'time,value', got {line!r}")
            header_seen = True
            continue
        cells = line.split(",")
        if len(cells) != 2:
            raise IngestionError(f"line {lineno}: expected 2 columns, got {len(cells)}")
        try:
            t, v = float(cells[0]), float(cells[1])
        except ValueError:
            raise IngestionError(f"line {lineno}: malformed number in {line!r}") from None
        if not (math.isfinite(t) and math.isfinite(v)):
            raise IngestionError(f"line {lineno}: non-finite number in {line!r}")
        if t < 0:
            raise IngestionError(f"line {lineno}: negative time {t!r}")
        if times and t <= times[-1]:
            raise IngestionError(f"line {lineno}: non-increasing time {t!r} after {times[-1]!r}")
        times.append(t)
        values.append(v)
    if not header_seen:
        raise IngestionError("missing 'time,value' header")
    if not times:
        raise IngestionError("empty body: no samples after header")
    return Trace(trace_id, np.array(times), np.array(values))


def dump_trace_csv(trace: Trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["time", "value"])
    for t, v in zip(trace.times.tolist(), trace.values.tolist()):
        writer.writerow([repr(t), repr(v)])
    return buf.getvalue()


def rescale(trace: Trace, r: Rescaling) -> Trace:
    return Trace(trace.id, trace.times * r.time_scale, trace.values * r.value_scale)


def value_at(trace: Trace, time: float) -> float:
    """Left-continuous step interpolation: value of the latest sample at or before ``time``."""
    if not (trace.start <= time <= trace.end):
        raise TraceDomainError(
            f"time {time!r} outside domain [{trace.start!r}, {trace.end!r}] of trace {trace.id!r}"
        )
    idx = int(np.searchsorted(trace.times, time, side="right")) - 1
    return float(trace.values[idx])


def augment_noise(trace: Trace, count: int, seed: int, mean: float = 1.0, stddev: float = 0.3) -> list[Trace]:
    """Return ``count`` copies of ``trace`` with every value multiplied by an
    independent draw from ``N(mean, stddev**2)``."""
    if count < 1:
        raise ValueError("count must be positive")
    if stddev < 0:
        raise ValueError("stddev must be non-negative")
    rng = np.random.default_rng(seed)
    factors = rng.normal(mean, stddev, size=(count, len(trace)))
    return [
        Trace(f"{trace.id}~{k}", trace.times, trace.values * factors[k])
        for k in range(count)
    ]
