"""Behavioral rule engine.

A rule is a predicate over tracked points, loaded from a declarative ruleset
file. Rules come in three kinds:

* instantaneous rules look at a single frame and are evaluated once per frame
  of the window;
* displacement rules compare the earliest and latest frames of the window;
* oscillation rules count back-and-forth swings inside the window.

The confidence of a window is R/N, the fraction of attempted evaluations that
fired. The per-frame confidence is then averaged over the trailing frames
(10 by default) to give the smoothed confidence used for anger votes.

Pixel thresholds are stated for a 640 px wide frame and scaled linearly with
the session's frame width.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from typing import Callable, Iterable, Mapping

import numpy as np

from .features import FeatureKind, FeatureVector
from .fusion import ModalityOutcome, Source
from .registry import POINT_INDEX, EmotionClass, Modality
from .session import Session, TrackedFrame

REFERENCE_WIDTH = 640
DEFAULT_WINDOW = 10
DEFAULT_SMOOTHING = 10


class RuleConfigError(ValueError):
    pass


class RuleKind(str, Enum):
    INSTANTANEOUS = "instantaneous"
    DISPLACEMENT = "displacement"
    OSCILLATION = "oscillation"


@dataclass(frozen=True)
class Rule:
    rule_id: int
    emotion: EmotionClass
    modality: Modality
    kind: RuleKind
    comparator: str
    points: tuple[str, ...]
    axis: str = "x"
    threshold_px: float = 1.0
    repeat: int = 1
    secondary_threshold_px: float | None = None
    description: str = field(default="", compare=False)

    def __post_init__(self):
        spec = COMPARATORS.get(self.comparator)
        if spec is None:
            raise RuleConfigError(f"rule {self.rule_id}: unknown comparator {self.comparator!r}")
        if spec.kind is not self.kind:
            raise RuleConfigError(
                f"rule {self.rule_id}: comparator {self.comparator} is {spec.kind.value}, "
                f"not {self.kind.value}")
        if spec.n_points is not None and len(self.points) != spec.n_points:
            raise RuleConfigError(
                f"rule {self.rule_id}: {self.comparator} takes {spec.n_points} points")
        registry = POINT_INDEX.get(self.modality, {})
        for p in self.points:
            if p not in registry:
                raise RuleConfigError(f"rule {self.rule_id}: no point {p!r} in {self.modality.value}")
        if self.axis not in ("x", "y"):
            raise RuleConfigError(f"rule {self.rule_id}: axis must be x or y")
        if not self.threshold_px > 0:
            raise RuleConfigError(f"rule {self.rule_id}: threshold must be positive")
        if self.secondary_threshold_px is not None and not self.secondary_threshold_px > 0:
            raise RuleConfigError(f"rule {self.rule_id}: threshold must be positive")
        if self.repeat < 1:
            raise RuleConfigError(f"rule {self.rule_id}: repeat must be >= 1")

    @property
    def min_frames(self) -> int:
        return 1 if self.kind is RuleKind.INSTANTANEOUS else 2

    def to_dict(self) -> dict:
        d = {"rule_id": self.rule_id, "emotion": self.emotion.name.lower(),
             "modality": self.modality.value, "kind": self.kind.value,
             "comparator": self.comparator, "points": list(self.points), "axis": self.axis,
             "threshold_px": self.threshold_px, "repeat": self.repeat}
        if self.secondary_threshold_px is not None:
            d["secondary_threshold_px"] = self.secondary_threshold_px
        if self.description:
            d["description"] = self.description
        return d


# -- predicates ---------------------------------------------------------------
# Each predicate gets p: (frames, points, 2) coordinates of the rule's points
# (image space, y down), the rule, and the threshold scale. Instantaneous
# predicates are vectorised over frames and return a bool per frame; the others
# return one bool for the whole window.

_AX = {"x": 0, "y": 1}


def _below_and_inside(p, rule, scale):
    lw, le, rw, re = (p[:, i] for i in range(4))
    return (lw[:, 1] > le[:, 1]) & (rw[:, 1] > re[:, 1]) & (lw[:, 0] < le[:, 0]) & (rw[:, 0] > re[:, 0])


def _above_and_staggered(p, rule, scale):
    lw, le, rw, re = (p[:, i] for i in range(4))
    return (lw[:, 1] < le[:, 1]) & (rw[:, 1] < re[:, 1]) & (lw[:, 1] != rw[:, 1])


def _span_less(p, rule, scale):
    a = _AX[rule.axis]
    return np.abs(p[:, 0, a] - p[:, 1, a]) < np.abs(p[:, 2, a] - p[:, 3, a])


def _span_diff_within(p, rule, scale):
    a = _AX[rule.axis]
    d = np.abs(np.abs(p[:, 0, a] - p[:, 1, a]) - np.abs(p[:, 2, a] - p[:, 3, a]))
    return d <= rule.threshold_px * scale


def _gap_greater(p, rule, scale):
    # triples (upper, middle, lower): |upper - middle| > |middle - lower| on every side
    a = _AX[rule.axis]
    out = np.ones(len(p), dtype=bool)
    for k in range(0, p.shape[1], 3):
        top, mid, low = p[:, k, a], p[:, k + 1, a], p[:, k + 2, a]
        out &= np.abs(top - mid) > np.abs(mid - low)
    return out


def _shifted(p, rule, scale):
    a = _AX[rule.axis]
    return bool(np.all(np.abs(p[-1, :, a] - p[0, :, a]) >= rule.threshold_px * scale))


def _decreased(p, rule, scale):
    a = _AX[rule.axis]
    return bool(np.all(p[0, :, a] - p[-1, :, a] >= rule.threshold_px * scale))


def _oscillates(p, rule, scale):
    a = _AX[rule.axis]
    return count_swings(p[:, 0, a], rule.threshold_px * scale) >= rule.repeat


def _rises_while_oscillating(p, rule, scale):
    y, x = p[:, 0, 1], p[:, 0, 0]
    rose = y[0] - y[-1] >= rule.threshold_px * scale
    side = rule.secondary_threshold_px if rule.secondary_threshold_px is not None else rule.threshold_px
    return bool(rose) and count_swings(x, side * scale) >= rule.repeat


@dataclass(frozen=True)
class _Comparator:
    kind: RuleKind
    n_points: int | None
    fn: Callable


COMPARATORS: dict[str, _Comparator] = {
    "below_and_inside": _Comparator(RuleKind.INSTANTANEOUS, 4, _below_and_inside),
    "above_and_staggered": _Comparator(RuleKind.INSTANTANEOUS, 4, _above_and_staggered),
    "span_less": _Comparator(RuleKind.INSTANTANEOUS, 4, _span_less),
    "span_diff_within": _Comparator(RuleKind.INSTANTANEOUS, 4, _span_diff_within),
    "gap_greater": _Comparator(RuleKind.INSTANTANEOUS, None, _gap_greater),
    "shifted": _Comparator(RuleKind.DISPLACEMENT, None, _shifted),
    "decreased": _Comparator(RuleKind.DISPLACEMENT, None, _decreased),
    "oscillates": _Comparator(RuleKind.OSCILLATION, 1, _oscillates),
    "rises_while_oscillating": _Comparator(RuleKind.OSCILLATION, 1, _rises_while_oscillating),
}


def count_swings(values, threshold: float) -> int:
    """Number of alternating moves of at least ``threshold`` in a 1-D trace.

    A move is confirmed once the value has travelled ``threshold`` away from the
    last turning point, so jitter smaller than the threshold never counts.
    """
    values = [float(v) for v in values]
    if not values:
        return 0
    swings = 0
    direction = 0
    lo = hi = values[0]
    extreme = values[0]
    for v in values[1:]:
        if direction == 0:
            lo, hi = min(lo, v), max(hi, v)
            if v - lo >= threshold:
                direction, extreme, swings = 1, v, 1
            elif hi - v >= threshold:
                direction, extreme, swings = -1, v, 1
        elif direction > 0:
            if v > extreme:
                extreme = v
            elif extreme - v >= threshold:
                direction, extreme, swings = -1, v, swings + 1
        else:
            if v < extreme:
                extreme = v
            elif v - extreme >= threshold:
                direction, extreme, swings = 1, v, swings + 1
    return swings


# -- windows and evaluation ---------------------------------------------------

@dataclass(frozen=True)
class RuleWindow:
    """Trailing frames per modality (oldest first) plus the frame width for scaling."""

    frames: Mapping[Modality, list[TrackedFrame]]
    frame_width: float = REFERENCE_WIDTH

    @property
    def scale(self) -> float:
        return self.frame_width / REFERENCE_WIDTH

    @property
    def end_timestamp(self) -> int:
        return max((fs[-1].timestamp for fs in self.frames.values() if fs), default=0)

    def coords(self, modality: Modality, names: Iterable[str]) -> np.ndarray:
        """``(frames, len(names), 2)`` coordinates; NaN where a point is missing."""
        names = list(names)
        frames = self.frames.get(modality, [])
        out = np.full((len(frames), len(names), 2), np.nan)
        for i, fr in enumerate(frames):
            if fr.in_registry_order():
                idx = POINT_INDEX[modality]
                out[i] = fr.xy[[idx[n] for n in names]]
            else:
                lookup = {n: j for j, n in enumerate(fr.names)}
                for k, n in enumerate(names):
                    if n in lookup:
                        out[i, k] = fr.xy[lookup[n]]
        return out


def window_at(session: Session, t: int, size: int = DEFAULT_WINDOW,
              modalities: Iterable[Modality] | None = None) -> RuleWindow:
    """The last ``size`` frames of each modality with timestamp <= t."""
    mods = list(modalities) if modalities is not None else list(session.streams)
    frames = {}
    for m in mods:
        stream = session.frames(m)
        ts = [f.timestamp for f in stream]
        end = int(np.searchsorted(ts, t, side="right"))
        frames[m] = stream[max(0, end - size):end]
    return RuleWindow(frames, session.frame_width)


def _instant_fired(rule: Rule, p: np.ndarray, scale: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame (evaluable, fired) masks of an instantaneous rule."""
    ok = np.isfinite(p).all(axis=(1, 2))
    fired = np.zeros(len(p), dtype=bool)
    if ok.any():
        fired[ok] = COMPARATORS[rule.comparator].fn(p[ok], rule, scale)
    return ok, fired


def _window_fired(rule: Rule, p: np.ndarray, scale: float) -> bool | None:
    """Fired flag of a displacement/oscillation rule, or None when not evaluable."""
    if len(p) < 2 or not np.isfinite(p).all():
        return None
    return bool(COMPARATORS[rule.comparator].fn(p, rule, scale))


def evaluate_rule(rule: Rule, window: RuleWindow) -> bool | None:
    """Whether the rule fires on the window; None if its points are unavailable.

    Instantaneous rules look at the latest frame, displacement rules at the first
    and last frame, oscillation rules at the whole window.
    """
    p = window.coords(rule.modality, rule.points)
    if rule.kind is RuleKind.INSTANTANEOUS:
        if len(p) == 0:
            return None
        ok, fired = _instant_fired(rule, p[-1:], window.scale)
        return bool(fired[0]) if ok[0] else None
    return _window_fired(rule, p, window.scale)


@dataclass(frozen=True)
class RuleOutcome:
    window_end_timestamp: int
    fired: int
    evaluated: int

    @property
    def confidence(self) -> float:
        return self.fired / self.evaluated if self.evaluated else 0.0

    @property
    def no_data(self) -> bool:
        return self.evaluated == 0


@dataclass(frozen=True)
class RuleSet:
    emotion: EmotionClass
    rules: tuple[Rule, ...]

    def __post_init__(self):
        ids = [r.rule_id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise RuleConfigError(f"duplicate rule ids in {self.emotion.label} ruleset")

    def __len__(self):
        return len(self.rules)

    def __iter__(self):
        return iter(self.rules)

    @property
    def modalities(self) -> tuple[Modality, ...]:
        return tuple(dict.fromkeys(r.modality for r in self.rules))

    def for_modality(self, modality: Modality) -> "RuleSet":
        return RuleSet(self.emotion, tuple(r for r in self.rules if r.modality == modality))


def rule_confidence(ruleset: RuleSet, window: RuleWindow) -> RuleOutcome:
    """R/N over one window.

    Instantaneous rules count one evaluation per frame of the window, the other
    kinds one per window. Unevaluable evaluations are left out of N.
    """
    fired = evaluated = 0
    for rule in ruleset:
        p = window.coords(rule.modality, rule.points)
        if rule.kind is RuleKind.INSTANTANEOUS:
            ok, f = _instant_fired(rule, p, window.scale)
            evaluated += int(ok.sum())
            fired += int(f.sum())
        else:
            f = _window_fired(rule, p, window.scale)
            if f is not None:
                evaluated += 1
                fired += int(f)
    return RuleOutcome(window.end_timestamp, fired, evaluated)


# -- whole-session traces -----------------------------------------------------

@dataclass(frozen=True)
class ConfidenceTrace:
    """Per-tick rule tallies over a session and their trailing mean."""

    timestamps: np.ndarray
    fired: np.ndarray
    evaluated: np.ndarray
    smoothing: int = DEFAULT_SMOOTHING

    @property
    def confidence(self) -> np.ndarray:
        ev = self.evaluated
        return np.divide(self.fired, ev, out=np.zeros(len(ev)), where=ev > 0)

    @property
    def smoothed(self) -> np.ndarray:
        c = self.confidence
        if len(c) == 0:
            return c
        # direct windowed sums; a running cumsum would drift past 1.0
        sums = np.convolve(c, np.ones(self.smoothing))[:len(c)]
        counts = np.minimum(np.arange(1, len(c) + 1), self.smoothing)
        return sums / counts

    def smoothed_at(self, t: int) -> float:
        i = int(np.searchsorted(self.timestamps, t, side="right")) - 1
        if i < 0:
            return 0.0
        lo = max(0, i - self.smoothing + 1)
        return float(np.mean(self.confidence[lo:i + 1]))


def _stream_tallies(rules: list[Rule], ts: np.ndarray, xy: np.ndarray, modality: Modality,
                    window: int, scale: float) -> tuple[np.ndarray, np.ndarray]:
    """(fired, evaluated) of each trailing window ending at every frame of one stream."""
    k = len(ts)
    fired = np.zeros(k, dtype=np.int64)
    evaluated = np.zeros(k, dtype=np.int64)
    idx = POINT_INDEX[modality]
    for rule in rules:
        p = xy[:, [idx[n] for n in rule.points], :]
        if rule.kind is RuleKind.INSTANTANEOUS:
            ok, f = _instant_fired(rule, p, scale)
            for arr, src in ((evaluated, ok), (fired, f)):
                c = np.concatenate([[0], np.cumsum(src.astype(np.int64))])
                end = np.arange(1, k + 1)
                arr += c[end] - c[np.maximum(0, end - window)]
        else:
            for i in range(k):
                f = _window_fired(rule, p[max(0, i - window + 1):i + 1], scale)
                if f is not None:
                    evaluated[i] += 1
                    fired[i] += int(f)
    return fired, evaluated


def confidence_trace(ruleset: RuleSet, session: Session, window: int = DEFAULT_WINDOW,
                     smoothing: int = DEFAULT_SMOOTHING) -> ConfidenceTrace:
    """Rule tallies at every frame timestamp of the ruleset's modalities.

    At each tick every modality contributes the window ending at its latest frame
    not after the tick. Equivalent to calling :func:`rule_confidence` on
    :func:`window_at` for every tick, only faster.
    """
    mods = [m for m in ruleset.modalities if session.frames(m)]
    if not mods:
        z = np.zeros(0, dtype=np.int64)
        return ConfidenceTrace(z, z, z, smoothing)
    ticks = np.unique(np.concatenate([session.stream_array(m)[0] for m in mods]))
    fired = np.zeros(len(ticks), dtype=np.int64)
    evaluated = np.zeros(len(ticks), dtype=np.int64)
    scale = session.frame_width / REFERENCE_WIDTH
    for m in mods:
        ts, xy = session.stream_array(m)
        f, e = _stream_tallies([r for r in ruleset if r.modality == m], ts, xy, m, window, scale)
        pos = np.searchsorted(ts, ticks, side="right") - 1
        has = pos >= 0
        fired[has] += f[pos[has]]
        evaluated[has] += e[pos[has]]
    return ConfidenceTrace(ticks, fired, evaluated, smoothing)


def smoothed_confidence(ruleset: RuleSet, session: Session, t: int,
                        window: int = DEFAULT_WINDOW, smoothing: int = DEFAULT_SMOOTHING) -> float:
    """Mean per-frame confidence over the trailing ``smoothing`` frames up to t."""
    mods = [m for m in ruleset.modalities if session.frames(m)]
    ticks = sorted({f.timestamp for m in mods for f in session.frames(m) if f.timestamp <= t})
    if not ticks:
        return 0.0
    recent = ticks[-smoothing:]
    confs = [rule_confidence(ruleset, window_at(session, tick, window, mods)).confidence
             for tick in recent]
    return sum(confs) / len(confs)


def rule_feature_vector(rulesets: Mapping[EmotionClass, RuleSet], window: RuleWindow,
                        modality: Modality | None = None) -> FeatureVector:
    """Window confidence of each configured emotion ruleset, in class-code order."""
    if EmotionClass.ANGER not in rulesets:
        raise RuleConfigError("the anger ruleset must be configured")
    values = np.zeros(len(EmotionClass))
    for emotion, rs in rulesets.items():
        if modality is not None:
            rs = rs.for_modality(modality)
        if len(rs):
            values[int(emotion)] = rule_confidence(rs, window).confidence
    return FeatureVector(modality if modality is not None else Modality.BODY,
                         FeatureKind.RULE, values)


def vote_from_confidence(confidence: float, threshold: float, modality: Modality,
                         timestamp: int) -> ModalityOutcome | None:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError("threshold must lie in [0, 1]")
    if confidence >= threshold:
        return ModalityOutcome(modality, EmotionClass.ANGER, float(confidence), timestamp, Source.RULE)
    return None


def anger_vote(ruleset: RuleSet, session: Session, t: int, threshold: float,
               modality: Modality | None = None,
               window: int = DEFAULT_WINDOW) -> ModalityOutcome | None:
    """Anger outcome at time t when the smoothed rule confidence reaches the threshold."""
    rs = ruleset.for_modality(modality) if modality is not None else ruleset
    conf = smoothed_confidence(rs, session, t, window)
    mod = modality if modality is not None else (rs.modalities[0] if rs.modalities else Modality.BODY)
    return vote_from_confidence(conf, threshold, mod, t)


# -- ruleset files --------------------------------------------------------------

def _parse_emotion(v) -> EmotionClass:
    if isinstance(v, str):
        return EmotionClass[v.strip().upper()]
    return EmotionClass(int(v))


def rule_from_dict(d: dict) -> Rule:
    try:
        return Rule(
            rule_id=int(d["rule_id"]),
            emotion=_parse_emotion(d.get("emotion", "anger")),
            modality=Modality(d["modality"]),
            kind=RuleKind(d["kind"]),
            comparator=d["comparator"],
            points=tuple(d["points"]),
            axis=d.get("axis", "x"),
            threshold_px=float(d.get("threshold_px", 1.0)),
            repeat=int(d.get("repeat", 1)),
            secondary_threshold_px=(float(d["secondary_threshold_px"])
                                    if d.get("secondary_threshold_px") is not None else None),
            description=d.get("description", ""),
        )
    except (KeyError, ValueError, TypeError) as exc:
        if isinstance(exc, RuleConfigError):
            raise
        raise RuleConfigError(f"bad rule entry {d!r}: {exc}") from None


def parse_rulesets(text: str) -> dict[EmotionClass, RuleSet]:
    doc = json.loads(text)
    entries = doc["rules"] if isinstance(doc, dict) else doc
    grouped: dict[EmotionClass, list[Rule]] = {}
    for d in entries:
        r = rule_from_dict(d)
        grouped.setdefault(r.emotion, []).append(r)
    if not grouped:
        raise RuleConfigError("ruleset file has no rules")
    return {e: RuleSet(e, tuple(rs)) for e, rs in sorted(grouped.items())}


def load_rulesets(path=None) -> dict[EmotionClass, RuleSet]:
    """Read a ruleset file; the shipped stock anger rules when ``path`` is None."""
    if path is None:
        text = resources.files("aggrofuse.data").joinpath("stock_rules.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_rulesets(text)


def stock_anger_rules() -> RuleSet:
    return load_rulesets()[EmotionClass.ANGER]
