"""Synthetic traces: the six freeway speed profiles of the running example and
a seeded traffic generator standing in for real trajectory data."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .trace import Trace

# 21 samples, one per tick of a 20-tick horizon, on normalized time [0, 1]
INTRO_TIMES = np.linspace(0.0, 1.0, 21)

_FREEWAY = [0.9, 0.92, 0.88, 0.91, 0.9, 0.89]
_STOP_GO = [0.3, 0.45, 0.2, 0.5, 0.15, 0.4, 0.25, 0.5, 0.2, 0.35, 0.45, 0.2, 0.3, 0.4, 0.25]


def intro_traces() -> list[Trace]:
    """Six speed profiles (a.u., 1 = 70 mph).

    0, 1: freeway speed then stop-and-go (1 slows one tick later);
    2: stop-and-go then freeway; 3: slows to a stop and recovers;
    4: free flow; 5: heavy traffic or a stalled vehicle.
    """
    t = INTRO_TIMES
    v0 = np.array(_FREEWAY + _STOP_GO)
    v1 = np.array(_FREEWAY[:6] + [0.9] + [min(0.51, s + 0.01) for s in _STOP_GO[:14]])
    v2 = np.array(_STOP_GO[:10] + [0.6] + [0.9, 0.91, 0.88, 0.9, 0.92, 0.89, 0.9, 0.91, 0.9, 0.88])
    v3 = np.array([0.9, 0.91, 0.89, 0.9, 0.8, 0.6, 0.4, 0.2, 0.05, 0.02, 0.05, 0.2, 0.4, 0.6, 0.8,
                   0.9, 0.91, 0.89, 0.9, 0.92, 0.9])
    v4 = np.array([0.9, 0.91, 0.89, 0.92, 0.9, 0.88, 0.9, 0.91, 0.9, 0.89, 0.92, 0.9, 0.91, 0.88,
                   0.9, 0.91, 0.89, 0.9, 0.92, 0.9, 0.91])
    v5 = np.array([0.1, 0.08, 0.12, 0.05, 0.1, 0.0, 0.08, 0.12, 0.1, 0.05, 0.0, 0.1, 0.12, 0.08,
                   0.1, 0.05, 0.1, 0.12, 0.08, 0.1, 0.05])
    return [Trace(str(i), t, v) for i, v in enumerate((v0, v1, v2, v3, v4, v5))]


INTRO_CLUSTERS = ({"0", "1"}, {"2", "3", "4"}, {"5"})


# --------------------------------------------------------------- case study

MPH_PER_AU = 70.0
SECONDS_PER_TICK = 2.0
CASESTUDY_DURATION = 40.0
CASESTUDY_STEP = 0.5

CATEGORY_COUNTS = {
    "slow_down": 60,
    "late_slow_down": 30,
    "speed_up": 40,
    "free_flow": 60,
    "jam": 40,
    "crawl": 30,
    "stopped": 20,
    "speeding": 20,
}


@dataclass
class TrafficSet:
    traces: list
    categories: dict = field(default_factory=dict)

    def ids(self, category: str) -> list[str]:
        return [t for t, c in self.categories.items() if c == category]


def _stop_and_go(rng, n, low, high, periods=(6, 12)):
    """Oscillating crawl between ``low`` and ``high`` mph; period in samples."""
    phase = rng.uniform(0, 2 * np.pi)
    period = rng.uniform(*periods)
    k = np.arange(n)
    wave = 0.5 * (1 + np.sin(2 * np.pi * k / period + phase))
    return low + (high - low) * wave * rng.uniform(0.85, 1.0, n)


def _cruise(rng, n, level, jitter=1.0):
    return level + rng.normal(0, jitter, n)


def _blend(times, t_switch, ramp, before, after):
    w = np.clip((times - t_switch) / ramp, 0.0, 1.0)
    return (1 - w) * before + w * after


def traffic_traces(seed: int = 0, counts: dict | None = None) -> TrafficSet:
    """Raw speed traces in mph over 40 s sampled every 0.5 s.

    ``late_slow_down`` traces brake only near the end of the horizon; their
    two-line projections resemble slow-downs while their boundaries do not.
    """
    counts = dict(CATEGORY_COUNTS if counts is None else counts)
    rng = np.random.default_rng(seed)
    times = np.arange(0.0, CASESTUDY_DURATION + 1e-9, CASESTUDY_STEP)
    n = times.size
    traces, cats = [], {}
    serial = 0
    for cat, count in counts.items():
        for _ in range(count):
            if cat == "slow_down":
                v = _blend(times, rng.uniform(9.5, 12.5), 1.5,
                           _cruise(rng, n, rng.uniform(61, 65)),
                           _stop_and_go(rng, n, rng.uniform(4, 10), rng.uniform(27, 30), (4, 8)))
            elif cat == "late_slow_down":
                v = _blend(times, rng.uniform(27.0, 30.0), 1.0,
                           _cruise(rng, n, rng.uniform(61, 65)),
                           _stop_and_go(rng, n, rng.uniform(4, 10), rng.uniform(27, 30), (4, 8)))
            elif cat == "speed_up":
                v = _blend(times, rng.uniform(14, 24), 3.0,
                           _stop_and_go(rng, n, rng.uniform(4, 10), rng.uniform(22, 34)),
                           _cruise(rng, n, rng.uniform(58, 66)))
            elif cat == "free_flow":
                v = _cruise(rng, n, rng.uniform(56, 66), 1.5)
            elif cat == "jam":
                v = _stop_and_go(rng, n, rng.uniform(0, 3), rng.uniform(8, 14))
            elif cat == "crawl":
                v = _cruise(rng, n, rng.uniform(24, 32), 1.0)
            elif cat == "stopped":
                v = rng.uniform(0, 2.5, n)
            elif cat == "speeding":
                v = _cruise(rng, n, rng.uniform(74, 82), 1.5)
            else:
                raise ValueError(f"unknown category {cat!r}")
            tid = f"{cat}_{serial:04d}"
            serial += 1
            traces.append(Trace(tid, times, np.clip(v, 0.0, None)))
            cats[tid] = cat
    return TrafficSet(traces, cats)


def idealized_slow_down() -> Trace:
    """Intro trace 0 stretched onto the 20-tick horizon (already in a.u.)."""
    t0 = intro_traces()[0]
    return Trace("ideal_slow_down", t0.times * 20.0, t0.values)
