"""Location and temporal feature vectors for the visual modalities.

Location vector of one frame: ``[x_1, y_1, ..., x_n, y_n, a_1, ..., a_m]`` where
``a_j`` is the angle of joint pair ``j`` against the horizontal axis.

Temporal vector of two consecutive frames: ``[|v_1|, ..., |v_n|, o_1, ..., o_n]``
with ``|v_i|`` the speed of point ``i`` in px/s and ``o_i`` the direction of
its displacement.

Angles are measured with the image y axis flipped, so positive angles point
"up" on screen, and lie in (-pi, pi].
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping

import numpy as np

from .registry import JOINT_PAIRS, POINT_INDEX, POINT_NAMES, VISUAL_MODALITIES, EmotionClass, Modality
from .session import Point2, Session, TrackedFrame


class FeatureError(ValueError):
    pass


class FeatureKind(str, Enum):
    LOCATION = "location"
    TEMPORAL = "temporal"
    RULE = "rule"


@dataclass(frozen=True)
class ModalityConfig:
    modality: Modality
    n: int
    joint_pairs: tuple[tuple[str, str], ...]
    gamma: float

    def __post_init__(self):
        if self.n != len(POINT_NAMES[self.modality]):
            raise ValueError(f"{self.modality.value}: n={self.n} does not match the registry")
        if len(self.joint_pairs) < 1:
            raise ValueError("need at least one joint pair")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        index = POINT_INDEX[self.modality]
        for a, b in self.joint_pairs:
            if a not in index or b not in index:
                raise ValueError(f"joint pair ({a}, {b}) not in the {self.modality.value} registry")

    @property
    def m(self) -> int:
        return len(self.joint_pairs)

    @property
    def location_dim(self) -> int:
        return 2 * self.n + self.m

    @property
    def temporal_dim(self) -> int:
        return 2 * self.n

    @property
    def pair_indices(self) -> tuple[np.ndarray, np.ndarray]:
        index = POINT_INDEX[self.modality]
        a = np.array([index[p] for p, _ in self.joint_pairs])
        b = np.array([index[q] for _, q in self.joint_pairs])
        return a, b


DEFAULT_GAMMAS = {
    Modality.HEAD: 1 / 12,
    Modality.FACE: 1 / 60,
    Modality.BODY: 1 / 8,
    Modality.HAND: 1 / 16,
}


def default_config(modality: Modality, gamma: float | None = None) -> ModalityConfig:
    modality = Modality(modality)
    return ModalityConfig(modality, len(POINT_NAMES[modality]), JOINT_PAIRS[modality],
                          DEFAULT_GAMMAS[modality] if gamma is None else gamma)


def default_configs(gammas: Mapping[Modality, float] | None = None) -> dict[Modality, ModalityConfig]:
    gammas = gammas or {}
    return {m: default_config(m, gammas.get(m)) for m in VISUAL_MODALITIES}


@dataclass(frozen=True)
class FeatureVector:
    modality: Modality
    kind: FeatureKind
    values: np.ndarray
    degenerate: tuple[bool, ...] = field(default=(), compare=False)

    @property
    def dim(self) -> int:
        return len(self.values)


def pair_angle(a: Point2, b: Point2) -> float:
    """Angle of the segment a->b against the horizontal axis, "up" positive."""
    # a.y - b.y rather than -(b.y - a.y): keeps +0.0 so leftward segments give +pi
    return math.atan2(a.y - b.y, b.x - a.x)


def velocity(p_prev: Point2, p_next: Point2, dt: float) -> tuple[float, float]:
    """Speed (px/s) and orientation of a point moving from p_prev to p_next in dt seconds."""
    if not dt > 0:
        raise FeatureError(f"dt must be positive, got {dt}")
    vx = (p_next.x - p_prev.x) / dt
    vy = (p_next.y - p_prev.y) / dt
    return math.hypot(vx, vy), pair_angle(p_prev, p_next)


def _frame_xy(frame: TrackedFrame, cfg: ModalityConfig) -> np.ndarray:
    if frame.modality != cfg.modality:
        raise FeatureError(f"{frame.modality.value} frame given a {cfg.modality.value} config")
    if frame.in_registry_order():
        return frame.xy
    lookup = dict(zip(frame.names, range(len(frame.names))))
    rows = []
    for name in POINT_NAMES[cfg.modality]:
        if name not in lookup:
            raise FeatureError(f"missing point {name!r} in {cfg.modality.value} frame")
        rows.append(frame.xy[lookup[name]])
    return np.asarray(rows)


def location_matrix(xy: np.ndarray, cfg: ModalityConfig) -> np.ndarray:
    """Location vectors for a stack of frames, ``xy`` shaped ``(k, n, 2)``."""
    xy = np.asarray(xy, dtype=float)
    a, b = cfg.pair_indices
    pa, pb = xy[:, a, :], xy[:, b, :]
    # y flipped: angle uses (a.y - b.y)
    angles = np.arctan2(pa[..., 1] - pb[..., 1], pb[..., 0] - pa[..., 0])
    return np.concatenate([xy.reshape(len(xy), -1), angles], axis=1)


def temporal_matrix(timestamps: np.ndarray, xy: np.ndarray, cfg: ModalityConfig) -> np.ndarray:
    """Temporal vectors for each consecutive frame pair; ``(k-1, 2n)``."""
    ts = np.asarray(timestamps, dtype=float)
    xy = np.asarray(xy, dtype=float)
    if len(ts) < 2:
        return np.zeros((0, cfg.temporal_dim))
    dt = np.diff(ts) / 1000.0
    if (dt <= 0).any():
        raise FeatureError("timestamps must strictly increase")
    d = np.diff(xy, axis=0)
    v = d / dt[:, None, None]
    speed = np.hypot(v[..., 0], v[..., 1])
    orient = np.arctan2(xy[:-1, :, 1] - xy[1:, :, 1], d[..., 0])
    return np.concatenate([speed, orient], axis=1)


def location_features(frame: TrackedFrame, cfg: ModalityConfig) -> FeatureVector:
    xy = _frame_xy(frame, cfg)
    values = location_matrix(xy[None], cfg)[0]
    a, b = cfg.pair_indices
    degenerate = tuple(bool(v) for v in np.all(xy[a] == xy[b], axis=1))
    return FeatureVector(cfg.modality, FeatureKind.LOCATION, values, degenerate)


def temporal_features(prev: TrackedFrame, next: TrackedFrame, cfg: ModalityConfig) -> FeatureVector:
    if prev.modality != next.modality:
        raise FeatureError("temporal features need frames of the same modality")
    if next.timestamp <= prev.timestamp:
        raise FeatureError(f"frame order violated: {next.timestamp} <= {prev.timestamp}")
    xy = np.stack([_frame_xy(prev, cfg), _frame_xy(next, cfg)])
    values = temporal_matrix([prev.timestamp, next.timestamp], xy, cfg)[0]
    return FeatureVector(cfg.modality, FeatureKind.TEMPORAL, values)


@dataclass(frozen=True)
class FeatureRow:
    label: EmotionClass
    modality: Modality
    kind: FeatureKind
    values: np.ndarray


def session_feature_rows(session: Session,
                         cfgs: Mapping[Modality, ModalityConfig] | None = None) -> list[FeatureRow]:
    """One location row per frame and one temporal row per consecutive pair, per modality."""
    cfgs = cfgs or default_configs()
    rows: list[FeatureRow] = []
    for modality, cfg in cfgs.items():
        ts, xy = session.stream_array(modality)
        if len(ts) == 0:
            continue
        for v in location_matrix(xy, cfg):
            rows.append(FeatureRow(session.label, modality, FeatureKind.LOCATION, v))
        for v in temporal_matrix(ts, xy, cfg):
            rows.append(FeatureRow(session.label, modality, FeatureKind.TEMPORAL, v))
    return rows


def combined_matrix(timestamps: np.ndarray, xy: np.ndarray, cfg: ModalityConfig) -> np.ndarray:
    """Classifier input per frame: location of frame i followed by temporal of (i-1, i).

    Rows start at the second frame, so the result has ``k - 1`` rows.
    """
    if len(timestamps) < 2:
        return np.zeros((0, cfg.location_dim + cfg.temporal_dim))
    return np.concatenate([location_matrix(xy[1:], cfg), temporal_matrix(timestamps, xy, cfg)], axis=1)


def rows_to_csv(rows: Iterable[FeatureRow]) -> str:
    rows = list(rows)
    width = max((len(r.values) for r in rows), default=0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "modality", "kind"] + [f"v_{i}" for i in range(1, width + 1)])
    for r in rows:
        vals = [repr(float(v)) for v in r.values]
        w.writerow([int(r.label), r.modality.value, r.kind.value] + vals + [""] * (width - len(vals)))
    return buf.getvalue()


def rows_from_csv(text: str) -> list[FeatureRow]:
    reader = csv.reader(io.StringIO(text))
    next(reader, None)
    out = []
    for rec in reader:
        vals = np.array([float(v) for v in rec[3:] if v != ""])
        out.append(FeatureRow(EmotionClass(int(rec[0])), Modality(rec[1]), FeatureKind(rec[2]), vals))
    return out
