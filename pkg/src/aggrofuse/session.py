"""Session data model and the line-delimited JSON session format.

A session file is UTF-8 text, one JSON object per line::

    {"session_id":"a1-anger-0","actor_id":"a1","label":0,"frame_width":640,"frame_height":480,"duration_ms":15000}
    {"t_ms":0,"modality":"head","points":[{"name":"head_top_center","x":320.0,"y":80.5},...]}
    {"t_ms":33,"word":"kill","conf":0.9}

The first line is the header. Every other line is either a frame record
(``t_ms``, ``modality``, ``points``) or a speech record (``t_ms``, ``word``,
``conf``). Points may carry a ``z`` depth which is accepted and dropped.
``label`` may be given as the integer class code or the class name.
``duration_ms`` is optional and defaults to the last record timestamp.

The canonical form written by :func:`serialize_session` uses compact
separators, the key order shown above, points in registry order, and records
sorted by timestamp (hand, head, face, body, then speech on equal timestamps).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .registry import (
    EXPECTED_POINT_COUNTS,
    POINT_INDEX,
    POINT_NAMES,
    VISUAL_MODALITIES,
    EmotionClass,
    Modality,
)

DEFAULT_FRAME_WIDTH = 640
DEFAULT_FRAME_HEIGHT = 480
MIN_DURATION_MS = 15_000
MAX_DURATION_MS = 60_000

HEADER_KEYS = ("session_id", "actor_id", "label", "frame_width", "frame_height", "duration_ms")
FRAME_KEYS = ("t_ms", "modality", "points")
SPEECH_KEYS = ("t_ms", "word", "conf")
POINT_KEYS = ("name", "x", "y", "z")

_RECORD_RANK = {m: i for i, m in enumerate(VISUAL_MODALITIES)}
_SPEECH_RANK = len(VISUAL_MODALITIES)


class SessionFormatError(ValueError):
    """Raised when a session file cannot be turned into a valid Session."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class Point2:
    x: float
    y: float


class TrackedFrame:
    """One timestamped snapshot of named 2D points for a visual modality.

    Coordinates live in an ``(n, 2)`` float array in image space (origin top
    left, y grows downward). The array is read-only.
    """

    __slots__ = ("timestamp", "modality", "names", "xy")

    def __init__(self, timestamp: int, modality: Modality, names: Iterable[str], xy):
        self.timestamp = int(timestamp)
        self.modality = Modality(modality)
        self.names = tuple(names)
        arr = np.array(xy, dtype=float).reshape(-1, 2)
        arr.setflags(write=False)
        self.xy = arr

    @classmethod
    def from_points(cls, timestamp: int, modality: Modality,
                    points: Iterable[tuple[str, Point2]]) -> "TrackedFrame":
        points = list(points)
        return cls(timestamp, modality, [n for n, _ in points],
                   [(p.x, p.y) for _, p in points])

    @property
    def points(self) -> list[tuple[str, Point2]]:
        return [(n, Point2(float(x), float(y))) for n, (x, y) in zip(self.names, self.xy)]

    def point(self, name: str) -> Point2:
        x, y = self.xy[self.names.index(name)]
        return Point2(float(x), float(y))

    def in_registry_order(self) -> bool:
        return self.names == POINT_NAMES[self.modality]

    def __len__(self) -> int:
        return len(self.names)

    def __eq__(self, other):
        if not isinstance(other, TrackedFrame):
            return NotImplemented
        return (self.timestamp == other.timestamp and self.modality == other.modality
                and self.names == other.names and np.array_equal(self.xy, other.xy))

    def __repr__(self):
        return f"TrackedFrame(t={self.timestamp}, modality={self.modality.value}, n={len(self.names)})"


@dataclass(frozen=True)
class SpeechEvent:
    timestamp: int
    word: str
    asr_confidence: float


@dataclass(frozen=True)
class Violation:
    severity: str  # "error" | "warning"
    type: str
    field: str
    frame_index: int | None
    message: str

    def __str__(self):
        where = f"[{self.frame_index}]" if self.frame_index is not None else ""
        return f"{self.severity}: {self.type}.{self.field}{where}: {self.message}"


@dataclass(frozen=True)
class Session:
    session_id: str
    actor_id: str
    label: EmotionClass
    duration: int
    streams: dict[Modality, list[TrackedFrame]] = field(default_factory=dict)
    speech: list[SpeechEvent] = field(default_factory=list)
    frame_width: int = DEFAULT_FRAME_WIDTH
    frame_height: int = DEFAULT_FRAME_HEIGHT

    def frames(self, modality: Modality) -> list[TrackedFrame]:
        return self.streams.get(modality, [])

    def stream_array(self, modality: Modality) -> tuple[np.ndarray, np.ndarray]:
        """Timestamps ``(k,)`` and coordinates ``(k, n, 2)`` of one stream, registry order."""
        frames = self.frames(modality)
        n = EXPECTED_POINT_COUNTS[modality]
        if not frames:
            return np.zeros(0, dtype=np.int64), np.zeros((0, n, 2))
        ts = np.array([f.timestamp for f in frames], dtype=np.int64)
        xy = np.stack([_registry_ordered(f).xy for f in frames])
        return ts, xy


def _registry_ordered(frame: TrackedFrame) -> TrackedFrame:
    if frame.in_registry_order():
        return frame
    index = POINT_INDEX[frame.modality]
    order = sorted(range(len(frame.names)), key=lambda i: index[frame.names[i]])
    return TrackedFrame(frame.timestamp, frame.modality,
                        [frame.names[i] for i in order], frame.xy[order])


def validate_session(session: Session) -> list[Violation]:
    """Check every Session invariant; never raises.

    Returns an empty list iff the session is valid. Durations outside 15 to 60
    seconds are reported as warnings only.
    """
    out: list[Violation] = []

    def err(type_, field_, idx, msg, severity="error"):
        out.append(Violation(severity, type_, field_, idx, msg))

    try:
        EmotionClass(session.label)
    except (ValueError, TypeError):
        err("Session", "label", None, f"unknown emotion class {session.label!r}")
    width, height = session.frame_width, session.frame_height
    if not (isinstance(width, (int, float)) and width > 0):
        err("Session", "frame_width", None, f"must be positive, got {width!r}")
        width = math.inf
    if not (isinstance(height, (int, float)) and height > 0):
        err("Session", "frame_height", None, f"must be positive, got {height!r}")
        height = math.inf
    if not MIN_DURATION_MS <= session.duration <= MAX_DURATION_MS:
        err("Session", "duration", None,
            f"duration {session.duration} ms outside 15-60s", severity="warning")

    for modality, frames in session.streams.items():
        try:
            modality = Modality(modality)
        except ValueError:
            err("Session", "streams", None, f"unknown modality {modality!r}")
            continue
        if not modality.is_visual:
            if frames:
                err("Session", "streams", None, "speech carries no tracked points")
            continue
        registry = POINT_INDEX[modality]
        expected = EXPECTED_POINT_COUNTS[modality]
        prev_t = None
        for i, frame in enumerate(frames):
            if frame.modality != modality:
                err("TrackedFrame", "modality", i,
                    f"{frame.modality.value} frame in {modality.value} stream")
            if prev_t is not None and frame.timestamp <= prev_t:
                err("TrackedFrame", "timestamp", i,
                    f"non-monotonic timestamp {frame.timestamp} after {prev_t}")
            prev_t = frame.timestamp
            if frame.timestamp < 0:
                err("TrackedFrame", "timestamp", i, "negative timestamp")
            if len(frame.names) != expected:
                err("TrackedFrame", "points", i,
                    f"wrong point count: {modality.value} expects {expected}, got {len(frame.names)}")
            seen = set()
            for name in frame.names:
                if name in seen:
                    err("TrackedFrame", "points", i, f"duplicate point {name!r}")
                seen.add(name)
                if name not in registry:
                    err("TrackedFrame", "points", i, f"unknown point name {name!r}")
            if frame.xy.size:
                if not np.isfinite(frame.xy).all():
                    err("Point2", "xy", i, "non-finite coordinate")
                else:
                    xs, ys = frame.xy[:, 0], frame.xy[:, 1]
                    if xs.min() < 0 or xs.max() > width or ys.min() < 0 or ys.max() > height:
                        err("Point2", "xy", i, "point outside the frame")

    prev_t = None
    for i, ev in enumerate(session.speech):
        if not ev.word or not ev.word.strip():
            err("SpeechEvent", "word", i, "empty word")
        if not (0.0 <= ev.asr_confidence <= 1.0):
            err("SpeechEvent", "asr_confidence", i, f"{ev.asr_confidence} outside [0, 1]")
        if prev_t is not None and ev.timestamp < prev_t:
            err("SpeechEvent", "timestamp", i, f"speech timestamp {ev.timestamp} before {prev_t}")
        prev_t = ev.timestamp
    return out


def errors_only(violations: list[Violation]) -> list[Violation]:
    return [v for v in violations if v.severity == "error"]


# -- serialization -----------------------------------------------------------

def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def _header_record(s: Session) -> dict:
    return {"session_id": s.session_id, "actor_id": s.actor_id, "label": int(s.label),
            "frame_width": s.frame_width, "frame_height": s.frame_height,
            "duration_ms": s.duration}


def serialize_session(session: Session) -> bytes:
    """Render the canonical byte form of a session."""
    records: list[tuple[int, int, int, str]] = []
    for modality in VISUAL_MODALITIES:
        for frame in session.frames(modality):
            frame = _registry_ordered(frame)
            pts = [{"name": n, "x": float(x), "y": float(y)}
                   for n, (x, y) in zip(frame.names, frame.xy.tolist())]
            line = _dumps({"t_ms": frame.timestamp, "modality": modality.value, "points": pts})
            records.append((frame.timestamp, _RECORD_RANK[modality], len(records), line))
    for ev in session.speech:
        line = _dumps({"t_ms": ev.timestamp, "word": ev.word, "conf": float(ev.asr_confidence)})
        records.append((ev.timestamp, _SPEECH_RANK, len(records), line))
    records.sort()
    lines = [_dumps(_header_record(session))] + [r[3] for r in records]
    return ("\n".join(lines) + "\n").encode("utf-8")


def _parse_label(value, line: int) -> EmotionClass:
    try:
        if isinstance(value, str):
            return EmotionClass[value.strip().upper()]
        if isinstance(value, bool) or not isinstance(value, int):
            raise KeyError(value)
        return EmotionClass(value)
    except (KeyError, ValueError):
        raise SessionFormatError(f"unknown label {value!r}", line) from None


def _int_field(rec: dict, key: str, line: int) -> int:
    v = rec.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (isinstance(v, float) and not v.is_integer()):
        raise SessionFormatError(f"{key} must be an integer, got {v!r}", line)
    return int(v)


def _warn_unknown(rec: dict, allowed: tuple[str, ...], line: int, what: str) -> None:
    extra = sorted(set(rec) - set(allowed))
    if extra:
        warnings.warn(f"line {line}: ignoring unknown {what} field(s) {extra}", stacklevel=3)


def parse_session(data: bytes | str) -> Session:
    """Parse a session file; raise :class:`SessionFormatError` on any invalid input."""
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SessionFormatError(f"not UTF-8: {exc}") from None
    else:
        text = data
    lines = text.splitlines()
    header = None
    streams: dict[Modality, list[TrackedFrame]] = {}
    speech: list[SpeechEvent] = []
    last_t = 0
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise SessionFormatError(f"malformed line: {exc.msg}", lineno) from None
        if not isinstance(rec, dict):
            raise SessionFormatError("malformed line: expected a JSON object", lineno)

        if header is None:
            missing = [k for k in HEADER_KEYS[:5] if k not in rec]
            if missing:
                raise SessionFormatError(f"header missing {missing}", lineno)
            _warn_unknown(rec, HEADER_KEYS, lineno, "header")
            header = dict(
                session_id=str(rec["session_id"]), actor_id=str(rec["actor_id"]),
                label=_parse_label(rec["label"], lineno),
                frame_width=_int_field(rec, "frame_width", lineno),
                frame_height=_int_field(rec, "frame_height", lineno),
                duration=_int_field(rec, "duration_ms", lineno) if "duration_ms" in rec else None,
            )
            continue

        if "t_ms" not in rec:
            raise SessionFormatError("malformed line: record without t_ms", lineno)
        t = _int_field(rec, "t_ms", lineno)
        last_t = max(last_t, t)
        if "points" in rec or "modality" in rec:
            frame = _parse_frame(rec, t, lineno)
            stream = streams.setdefault(frame.modality, [])
            if stream and frame.timestamp <= stream[-1].timestamp:
                raise SessionFormatError(
                    f"non-monotonic timestamps: {frame.modality.value} t_ms {t} after "
                    f"{stream[-1].timestamp}", lineno)
            stream.append(frame)
        elif "word" in rec:
            _warn_unknown(rec, SPEECH_KEYS, lineno, "speech")
            word, conf = rec.get("word"), rec.get("conf")
            if not isinstance(word, str) or not word.strip():
                raise SessionFormatError("malformed line: empty word", lineno)
            if isinstance(conf, bool) or not isinstance(conf, (int, float)):
                raise SessionFormatError("malformed line: conf must be a number", lineno)
            if speech and t < speech[-1].timestamp:
                raise SessionFormatError(f"non-monotonic timestamps: speech t_ms {t}", lineno)
            speech.append(SpeechEvent(t, " ".join(word.lower().split()), float(conf)))
        else:
            raise SessionFormatError("malformed line: neither a frame nor a speech record", lineno)

    if header is None:
        raise SessionFormatError("empty session file: missing header")
    duration = header.pop("duration")
    session = Session(duration=last_t if duration is None else duration,
                      streams=streams, speech=speech, **header)
    problems = errors_only(validate_session(session))
    if problems:
        raise SessionFormatError("; ".join(v.message for v in problems[:5]))
    return session


def _parse_frame(rec: dict, t: int, lineno: int) -> TrackedFrame:
    _warn_unknown(rec, FRAME_KEYS, lineno, "frame")
    try:
        modality = Modality(rec.get("modality"))
    except ValueError:
        raise SessionFormatError(f"unknown modality {rec.get('modality')!r}", lineno) from None
    if not modality.is_visual:
        raise SessionFormatError("speech records carry word/conf, not points", lineno)
    pts = rec.get("points")
    if not isinstance(pts, list):
        raise SessionFormatError("malformed line: points must be a list", lineno)
    registry = POINT_INDEX[modality]
    expected = EXPECTED_POINT_COUNTS[modality]
    if len(pts) != expected:
        raise SessionFormatError(
            f"wrong point count: {modality.value} expects {expected}, got {len(pts)}", lineno)
    slots: list = [None] * expected
    for p in pts:
        if not isinstance(p, dict) or "name" not in p or "x" not in p or "y" not in p:
            raise SessionFormatError("malformed line: point needs name, x, y", lineno)
        extra = set(p) - set(POINT_KEYS)
        if extra:
            warnings.warn(f"line {lineno}: ignoring unknown point field(s) {sorted(extra)}",
                          stacklevel=3)
        name = p["name"]
        if name not in registry:
            raise SessionFormatError(
                f"unknown point name {name!r} for {modality.value}", lineno)
        idx = registry[name]
        if slots[idx] is not None:
            raise SessionFormatError(f"duplicate point {name!r}", lineno)
        x, y = p["x"], p["y"]
        if any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in (x, y)):
            raise SessionFormatError(f"malformed line: non-numeric coordinate for {name!r}", lineno)
        slots[idx] = (float(x), float(y))
    return TrackedFrame(t, modality, POINT_NAMES[modality], slots)


def read_session(path) -> Session:
    with open(path, "rb") as fh:
        return parse_session(fh.read())


def write_session(session: Session, path) -> bytes:
    from .io import atomic_write_bytes

    data = serialize_session(session)
    atomic_write_bytes(path, data)
    return data
