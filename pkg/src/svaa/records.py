"""Detection-record schema, the append-only store, and windowed distinct counts.

Records arrive as newline-delimited JSON objects, one detection per line.
They are persisted verbatim into one append-only file per camera; queries
run against per-camera in-memory indexes (time-sorted numpy columns) that
are rebuilt lazily at the first read after an append. That rebuild point is
the ingest boundary of the concurrency contract: a single writer appends,
readers see immutable snapshots.
"""

from __future__ import annotations

import json
import logging
from array import array
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import timeutil
from .errors import (
    InvalidBBox,
    InvalidTimestamp,
    InvertedRange,
    MalformedLine,
    StoreUnwritable,
)
from .timeutil import WINDOW_US, from_us, to_us

logger = logging.getLogger(__name__)

HUMAN_CLASS = 0


@dataclass(frozen=True, slots=True)
class BoundingBox:
    """Axis-aligned pixel box: top-left corner plus width and height."""

    x: float
    y: float
    w: float
    h: float


@dataclass(slots=True)
class DetectionRecord:
    """One stored detection: who (ids), where (camera, box), and when."""

    record_time: datetime
    camera_id: int
    class_id: int
    bbox: BoundingBox
    local_id: int
    global_id: int
    feature: str | None = None  # opaque pass-through, never interpreted
    batch_id: object | None = None  # upstream tag, ignored by analytics

    @property
    def time_us(self) -> int:
        return to_us(self.record_time)


@dataclass(frozen=True, slots=True)
class IntervalCount:
    """Distinct people seen by one camera in one 5-second window."""

    camera_id: int
    window_start: datetime
    count: int


@dataclass(slots=True)
class IngestReport:
    accepted: int = 0
    rejected: int = 0
    first_time: datetime | None = None
    last_time: datetime | None = None


_NUMBER = (int, float)


def _parse_fields(line: str) -> tuple:
    """Validate one record line into a flat field tuple (the hot ingest path).

    Returns (time_us, camera_id, class_id, x, y, w, h, local_id, global_id,
    feature, batch_id).
    """
    try:
        obj = json.loads(line)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedLine(f"not a JSON record: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedLine("record line must be a JSON object")
    try:
        time_text = obj["record_time"]
        camera_id = obj["camera_id"]
        class_id = obj["class_id"]
        raw_bbox = obj["bbox"]
        local_id = obj["local_id"]
        global_id = obj["global_id"]
    except KeyError as exc:
        raise MalformedLine(f"missing field {exc.args[0]}") from exc

    time_us = timeutil.parse_rfc3339(time_text)
    if type(camera_id) is not int or camera_id <= 0:
        raise MalformedLine(f"camera_id must be a positive integer, got {camera_id!r}")
    if type(class_id) is not int or class_id < 0:
        raise MalformedLine(f"class_id must be a nonnegative integer, got {class_id!r}")
    if type(local_id) is not int or local_id <= 0:
        raise MalformedLine(f"local_id must be a positive integer, got {local_id!r}")
    if type(global_id) is not int or global_id <= 0:
        raise MalformedLine(f"global_id must be a positive integer, got {global_id!r}")

    if type(raw_bbox) is not list or len(raw_bbox) != 4:
        raise MalformedLine(f"bbox must be a 4-element array, got {raw_bbox!r}")
    x, y, w, h = raw_bbox
    if not (isinstance(x, _NUMBER) and isinstance(y, _NUMBER) and isinstance(w, _NUMBER) and isinstance(h, _NUMBER)):
        raise MalformedLine(f"bbox must be numeric, got {raw_bbox!r}")
    if w <= 0 or h <= 0:
        raise InvalidBBox(f"bbox extent must be positive, got w={w} h={h}")
    if x < 0 or y < 0:
        raise InvalidBBox(f"bbox origin must be nonnegative, got x={x} y={y}")

    feature = obj.get("feature")
    if feature is not None and not isinstance(feature, str):
        raise MalformedLine("feature must be a string blob")

    return time_us, camera_id, class_id, x, y, w, h, local_id, global_id, feature, obj.get("batch_id")


def parse_record(line: str) -> DetectionRecord:
    """Parse one serialized record line, validating the schema.

    Raises MalformedLine for structural problems, InvalidTimestamp for a bad
    record_time, and InvalidBBox for a degenerate box. The optional feature
    blob is retained unmodified; an optional batch_id is kept but ignored.
    """
    time_us, camera_id, class_id, x, y, w, h, local_id, global_id, feature, batch_id = _parse_fields(line)
    return DetectionRecord(
        record_time=from_us(time_us),
        camera_id=camera_id,
        class_id=class_id,
        bbox=BoundingBox(x, y, w, h),
        local_id=local_id,
        global_id=global_id,
        feature=feature,
        batch_id=batch_id,
    )


def _format_pixel(v: float) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return repr(v) if isinstance(v, float) else str(v)


def format_record(rec: DetectionRecord) -> str:
    """Serialize a record back to the canonical one-line form."""
    bbox = ",".join(_format_pixel(v) for v in (rec.bbox.x, rec.bbox.y, rec.bbox.w, rec.bbox.h))
    parts = [
        f'"record_time":"{timeutil.format_rfc3339(rec.time_us)}"',
        f'"camera_id":{rec.camera_id}',
        f'"class_id":{rec.class_id}',
        f'"bbox":[{bbox}]',
        f'"local_id":{rec.local_id}',
        f'"global_id":{rec.global_id}',
    ]
    if rec.feature is not None:
        parts.append(f'"feature":{json.dumps(rec.feature)}')
    if rec.batch_id is not None:
        parts.append(f'"batch_id":{json.dumps(rec.batch_id)}')
    return "{" + ",".join(parts) + "}"


class _CameraIndex:
    """Immutable time-sorted snapshot of one camera's columns."""

    __slots__ = ("times", "class_ids", "global_ids", "local_ids", "x", "y", "w", "h", "rows")

    def __init__(self, log: "_CameraLog"):
        times = np.frombuffer(log.times, dtype=np.int64)
        order = np.argsort(times, kind="stable")
        self.times = times[order]
        self.class_ids = np.frombuffer(log.class_ids, dtype=np.int64)[order]
        self.global_ids = np.frombuffer(log.global_ids, dtype=np.int64)[order]
        self.local_ids = np.frombuffer(log.local_ids, dtype=np.int64)[order]
        self.x = np.frombuffer(log.x, dtype=np.float64)[order]
        self.y = np.frombuffer(log.y, dtype=np.float64)[order]
        self.w = np.frombuffer(log.w, dtype=np.float64)[order]
        self.h = np.frombuffer(log.h, dtype=np.float64)[order]
        self.rows = order  # original append positions, for sparse extras

    def __len__(self) -> int:
        return len(self.times)

    def slice(self, t0_us: int, t1_us: int) -> tuple[int, int]:
        """Positions covering t0 <= time < t1."""
        lo = int(np.searchsorted(self.times, t0_us, side="left"))
        hi = int(np.searchsorted(self.times, t1_us, side="left"))
        return lo, hi


_EMPTY_LOG: "_CameraLog | None" = None


class _CameraLog:
    """Append buffers for one camera plus its lazily built index."""

    __slots__ = ("times", "class_ids", "global_ids", "local_ids", "x", "y", "w", "h", "extras", "_index")

    def __init__(self):
        self.times = array("q")
        self.class_ids = array("q")
        self.global_ids = array("q")
        self.local_ids = array("q")
        self.x = array("d")
        self.y = array("d")
        self.w = array("d")
        self.h = array("d")
        self.extras: dict[int, tuple[str | None, object]] = {}
        self._index: _CameraIndex | None = None

    def append_row(self, time_us, class_id, global_id, local_id, x, y, w, h, feature, batch_id) -> None:
        if feature is not None or batch_id is not None:
            self.extras[len(self.times)] = (feature, batch_id)
        self.times.append(time_us)
        self.class_ids.append(class_id)
        self.global_ids.append(global_id)
        self.local_ids.append(local_id)
        self.x.append(x)
        self.y.append(y)
        self.w.append(w)
        self.h.append(h)
        self._index = None

    def index(self) -> _CameraIndex:
        if self._index is None:
            self._index = _CameraIndex(self)
        return self._index


def _empty_index() -> _CameraIndex:
    global _EMPTY_LOG
    if _EMPTY_LOG is None:
        _EMPTY_LOG = _CameraLog()
    return _EMPTY_LOG.index()


class RecordStore:
    """Append-only detection store, one newline-delimited file per camera.

    Pass root=None for a memory-only store (tests, throwaway pipelines).
    Single-writer append; reads take per-camera snapshots at ingest
    boundaries, so a store handle may move between threads as long as only
    one of them writes.
    """

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None
        self._logs: dict[int, _CameraLog] = {}
        self._files: dict[int, object] = {}
        if self.root is not None:
            try:
                self.root.mkdir(parents=True, exist_ok=True)
            except OSError as exc:
                raise StoreUnwritable(f"cannot create store at {self.root}: {exc}") from exc
            self._load()

    @classmethod
    def open(cls, root: str | Path) -> "RecordStore":
        return cls(root)

    def _camera_path(self, camera_id: int) -> Path:
        assert self.root is not None
        return self.root / f"camera_{camera_id:05d}.jsonl"

    def _load(self) -> None:
        assert self.root is not None
        for path in sorted(self.root.glob("camera_*.jsonl")):
            camera_id = int(path.stem.split("_", 1)[1])
            log = self._logs.setdefault(camera_id, _CameraLog())
            append_row = log.append_row
            with path.open("r", encoding="utf-8") as fh:
                for lineno, line in enumerate(fh, start=1):
                    line = line.strip()
                    if not line:
                        continue
                    try:
                        fields = _parse_fields(line)
                    except (MalformedLine, InvalidTimestamp, InvalidBBox) as exc:
                        raise MalformedLine(f"{path}:{lineno}: {exc}") from exc
                    append_row(fields[0], fields[2], fields[8], fields[7],
                               fields[3], fields[4], fields[5], fields[6],
                               fields[9], fields[10])

    def _file(self, camera_id: int):
        fh = self._files.get(camera_id)
        if fh is None:
            try:
                fh = self._camera_path(camera_id).open("a", encoding="utf-8")
            except OSError as exc:
                raise StoreUnwritable(f"cannot append to store at {self.root}: {exc}") from exc
            self._files[camera_id] = fh
        return fh

    def append(self, rec: DetectionRecord, raw_line: str | None = None) -> None:
        """Append one validated record; the raw line is persisted verbatim."""
        self._append_fields(
            (rec.time_us, rec.camera_id, rec.class_id, rec.bbox.x, rec.bbox.y,
             rec.bbox.w, rec.bbox.h, rec.local_id, rec.global_id, rec.feature, rec.batch_id),
            raw_line if raw_line is not None else format_record(rec),
        )

    def _append_fields(self, fields: tuple, line: str) -> None:
        camera_id = fields[1]
        if self.root is not None:
            try:
                self._file(camera_id).write(line + "\n")
            except OSError as exc:
                raise StoreUnwritable(f"write failed for camera {camera_id}: {exc}") from exc
        log = self._logs.get(camera_id)
        if log is None:
            log = self._logs.setdefault(camera_id, _CameraLog())
        log.append_row(fields[0], fields[2], fields[8], fields[7],
                       fields[3], fields[4], fields[5], fields[6],
                       fields[9], fields[10])

    def flush(self) -> None:
        for fh in self._files.values():
            fh.flush()

    def close(self) -> None:
        for fh in self._files.values():
            fh.close()
        self._files.clear()

    def __enter__(self) -> "RecordStore":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __len__(self) -> int:
        return sum(len(log.times) for log in self._logs.values())

    def camera_ids(self) -> list[int]:
        return sorted(self._logs)

    def index(self, camera_id: int) -> _CameraIndex:
        log = self._logs.get(camera_id)
        return log.index() if log is not None else _empty_index()

    def time_bounds(self, camera_id: int | None = None) -> tuple[int, int] | None:
        """(min, max) record time in microseconds, or None for no records."""
        cameras = [camera_id] if camera_id is not None else self.camera_ids()
        lo: int | None = None
        hi: int | None = None
        for cid in cameras:
            idx = self.index(cid)
            if len(idx) == 0:
                continue
            first, last = int(idx.times[0]), int(idx.times[-1])
            lo = first if lo is None else min(lo, first)
            hi = last if hi is None else max(hi, last)
        if lo is None or hi is None:
            return None
        return lo, hi

    def materialize(self, camera_id: int, position: int) -> DetectionRecord:
        """Build a DetectionRecord from a sorted-index position."""
        idx = self.index(camera_id)
        row = int(idx.rows[position])
        extras = self._logs[camera_id].extras.get(row, (None, None))
        return DetectionRecord(
            record_time=from_us(int(idx.times[position])),
            camera_id=camera_id,
            class_id=int(idx.class_ids[position]),
            bbox=BoundingBox(float(idx.x[position]), float(idx.y[position]), float(idx.w[position]), float(idx.h[position])),
            local_id=int(idx.local_ids[position]),
            global_id=int(idx.global_ids[position]),
            feature=extras[0],
            batch_id=extras[1],
        )


def ingest_stream(source: Iterable[str], store: RecordStore) -> IngestReport:
    """Append every valid line from source; log and skip invalid ones.

    Rejected lines never abort the stream. The report's first/last times are
    the min/max record times among accepted lines.
    """
    report = IngestReport()
    first_us: int | None = None
    last_us: int | None = None
    for lineno, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            fields = _parse_fields(line)
        except (MalformedLine, InvalidTimestamp, InvalidBBox) as exc:
            report.rejected += 1
            logger.warning("rejected line %d: %s", lineno, exc)
            continue
        store._append_fields(fields, line)
        report.accepted += 1
        t = fields[0]
        if first_us is None:
            first_us = last_us = t
        else:
            if t < first_us:
                first_us = t
            if t > last_us:
                last_us = t
    store.flush()
    if first_us is not None and last_us is not None:
        report.first_time = from_us(first_us)
        report.last_time = from_us(last_us)
    return report


def _camera_selection(store: RecordStore, cameras: Iterable[int] | None) -> list[int]:
    if cameras is None:
        return store.camera_ids()
    return sorted(set(cameras))


def query_window(
    store: RecordStore,
    cameras: Iterable[int] | None,
    t0: datetime,
    t1: datetime,
) -> list[DetectionRecord]:
    """Records with t0 <= record_time < t1 on the given cameras (None = all), time-ordered."""
    t0_us, t1_us = to_us(t0), to_us(t1)
    if t0_us > t1_us:
        raise InvertedRange(f"t0 {t0} is after t1 {t1}")
    hits: list[tuple[int, int, int]] = []
    for cid in _camera_selection(store, cameras):
        idx = store.index(cid)
        lo, hi = idx.slice(t0_us, t1_us)
        times = idx.times
        hits.extend((int(times[pos]), cid, pos) for pos in range(lo, hi))
    hits.sort()
    return [store.materialize(cid, pos) for _, cid, pos in hits]


def window_count_series(
    store: RecordStore,
    camera_id: int,
    t0_us: int,
    t1_us: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-5-second-window distinct person counts as (window_starts_us, counts).

    Both endpoints are aligned down to the epoch 5-second grid; windows with
    no records appear with count 0. Only human-class records contribute and
    duplicate global ids within a window collapse.
    """
    if t0_us > t1_us:
        raise InvertedRange(f"t0 {from_us(t0_us)} is after t1 {from_us(t1_us)}")
    t0_us = timeutil.window_start(t0_us)
    t1_us = timeutil.window_start(t1_us)
    n = (t1_us - t0_us) // WINDOW_US
    starts = t0_us + WINDOW_US * np.arange(n, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    if n == 0:
        return starts, counts
    idx = store.index(camera_id)
    lo, hi = idx.slice(t0_us, t1_us)
    if lo == hi:
        return starts, counts
    mask = idx.class_ids[lo:hi] == HUMAN_CLASS
    win = (idx.times[lo:hi][mask] - t0_us) // WINDOW_US
    gid = idx.global_ids[lo:hi][mask]
    if len(win) == 0:
        return starts, counts
    order = np.lexsort((gid, win))
    win, gid = win[order], gid[order]
    first = np.empty(len(win), dtype=bool)
    first[0] = True
    np.not_equal(win[1:], win[:-1], out=first[1:])
    first[1:] |= gid[1:] != gid[:-1]
    counts = np.bincount(win[first], minlength=n).astype(np.int64)
    return starts, counts


def interval_counts(
    store: RecordStore,
    camera_id: int,
    t0: datetime,
    t1: datetime,
) -> list[IntervalCount]:
    """One IntervalCount per 5-second window in [t0, t1), zero windows included."""
    starts, counts = window_count_series(store, camera_id, to_us(t0), to_us(t1))
    return [
        IntervalCount(camera_id, from_us(int(s)), int(c))
        for s, c in zip(starts.tolist(), counts.tolist())
    ]


def iter_class0(
    store: RecordStore,
    camera_id: int,
    t0_us: int,
    t1_us: int,
) -> tuple[np.ndarray, np.ndarray]:
    """(times_us, global_ids) of human-class records in [t0, t1) for one camera."""
    idx = store.index(camera_id)
    lo, hi = idx.slice(t0_us, t1_us)
    mask = idx.class_ids[lo:hi] == HUMAN_CLASS
    return idx.times[lo:hi][mask], idx.global_ids[lo:hi][mask]
