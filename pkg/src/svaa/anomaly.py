"""Statistical surge detection on 5-second counts via running moments.

Each (camera, hour-of-day, day-class) bucket accumulates a running mean and
sum of squared deviations over the *nonzero* interval counts it has seen;
zero windows never touch the moments, since empty windows dominate raw
streams and would drag the mean toward zero. A count is flagged when it
exceeds the bucket mean by more than two sample standard deviations, one
sided: only surges are anomalies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterator

import numpy as np

from .occupancy import BucketKey, DayClass
from .records import RecordStore, window_count_series
from .timeutil import US_PER_DAY, US_PER_HOUR, WINDOW_US, from_us, to_us, window_start

DEFAULT_MIN_SAMPLES = 30  # nonzero samples required before flagging


@dataclass(slots=True)
class MomentAccumulator:
    """Single-pass (Welford) running mean and squared-deviation sum."""

    n: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, x: float) -> None:
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self.m2 += delta * (x - self.mean)

    @property
    def std(self) -> float:
        """Sample standard deviation; 0.0 below two samples."""
        if self.n < 2:
            return 0.0
        return math.sqrt(max(self.m2, 0.0) / (self.n - 1))


@dataclass(frozen=True, slots=True)
class AnomalyVerdict:
    is_anomaly: bool
    z_score: float
    mean: float
    std: float
    n: int
    insufficient_data: bool


class AnomalyStats:
    """Per-bucket moment accumulators, updated from nonzero counts only."""

    def __init__(self):
        self._buckets: dict[BucketKey, MomentAccumulator] = {}

    def bucket(self, key: BucketKey) -> MomentAccumulator:
        acc = self._buckets.get(key)
        if acc is None:
            acc = MomentAccumulator()
            self._buckets[key] = acc
        return acc

    def update(self, key: BucketKey, count: int) -> None:
        """Absorb one interval count; zero counts leave the stats unchanged."""
        if count < 0:
            raise ValueError("count must be nonnegative")
        if count == 0:
            return
        self.bucket(key).add(count)

    def check(self, key: BucketKey, count: int, min_samples: int = DEFAULT_MIN_SAMPLES) -> AnomalyVerdict:
        """Evaluate a count against the bucket's stats before absorbing it.

        Flags when count > mean + 2*std with enough history; a constant
        history (std 0) therefore flags any count strictly above its mean.
        The z-score is reported as 0 when std is 0.
        """
        acc = self._buckets.get(key)
        n = acc.n if acc is not None else 0
        mean = acc.mean if acc is not None else 0.0
        std = acc.std if acc is not None else 0.0
        insufficient = n < min_samples
        z = (count - mean) / std if std > 0 else 0.0
        flagged = not insufficient and count > mean + 2.0 * std
        return AnomalyVerdict(flagged, z, mean, std, n, insufficient)


@dataclass(frozen=True, slots=True)
class AnomalyObservation:
    camera_id: int
    window_start: datetime
    count: int
    verdict: AnomalyVerdict
    bucket: BucketKey


def replay(
    store: RecordStore,
    camera_id: int,
    *,
    holidays: frozenset[int] = frozenset(),
    t0: datetime | None = None,
    t1: datetime | None = None,
    min_samples: int = DEFAULT_MIN_SAMPLES,
    stats: AnomalyStats | None = None,
) -> Iterator[AnomalyObservation]:
    """Check every 5-second window of one camera in time order.

    Each window is evaluated against its bucket's moments as accumulated so
    far, then (if nonzero) absorbed into them. Bounds default to the
    camera's data extent.
    """
    bounds = store.time_bounds(camera_id)
    if bounds is None and (t0 is None or t1 is None):
        return
    t0_us = to_us(t0) if t0 is not None else window_start(bounds[0])
    t1_us = to_us(t1) if t1 is not None else window_start(bounds[1]) + WINDOW_US
    starts, counts = window_count_series(store, camera_id, t0_us, t1_us)
    if stats is None:
        stats = AnomalyStats()

    days = starts // US_PER_DAY
    hours = (starts % US_PER_DAY) // US_PER_HOUR
    weekendish = (days + 3) % 7 >= 5
    if holidays:
        weekendish |= np.isin(days, np.fromiter(holidays, dtype=np.int64))

    cache: dict[tuple[int, bool], tuple[BucketKey, MomentAccumulator]] = {}
    for hod in range(24):
        for flag in (False, True):
            day_class = DayClass.WEEKEND_OR_HOLIDAY if flag else DayClass.WEEKDAY
            key = BucketKey(camera_id, hod, day_class)
            cache[(hod, flag)] = (key, stats.bucket(key))

    hour_list = hours.tolist()
    flag_list = weekendish.tolist()
    start_list = starts.tolist()
    for i, count in enumerate(counts.tolist()):
        key, acc = cache[(hour_list[i], flag_list[i])]
        n = acc.n
        mean = acc.mean
        std = acc.std
        insufficient = n < min_samples
        z = (count - mean) / std if std > 0 else 0.0
        flagged = not insufficient and count > mean + 2.0 * std
        if count > 0:
            acc.add(count)
        yield AnomalyObservation(
            camera_id,
            from_us(start_list[i]),
            count,
            AnomalyVerdict(flagged, z, mean, std, n, insufficient),
            key,
        )
