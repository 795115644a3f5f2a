"""Seeded generator of labeled synthetic sessions from gesture scripts.

A script poses the neutral skeleton with static offsets and layers motions on
top. Each motion is a list of keyframes (time fraction, point offsets) that is
linearly interpolated, either over the whole session or repeated with a fixed
cycle length. Uniform jitter is added per coordinate and frame.

Offset keys are ``"<modality>.<point>"``, ``"<modality>.*"`` (every point of a
modality) or ``"*"`` (every tracked point). Offsets from different keys add up.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping

import numpy as np

from .io import sha256_hex
from .registry import POINT_INDEX, POINT_NAMES, VISUAL_MODALITIES, EmotionClass, Modality
from .session import (
    DEFAULT_FRAME_HEIGHT,
    DEFAULT_FRAME_WIDTH,
    MAX_DURATION_MS,
    MIN_DURATION_MS,
    Session,
    SpeechEvent,
    TrackedFrame,
    serialize_session,
)

DEFAULT_FRAME_RATE = 30.0
DEFAULT_NOISE_PX = 2.0

# neutral standing pose, 640x480 image, person's left on the image right
_MIRROR_X = 640.0


def _mirrored(left: dict[str, tuple[float, float]], swap=("left", "right")) -> dict:
    out = dict(left)
    for name, (x, y) in left.items():
        if swap[0] in name:
            out[name.replace(swap[0], swap[1])] = (_MIRROR_X - x, y)
    return out


NEUTRAL_POSE: dict[Modality, dict[str, tuple[float, float]]] = {
    Modality.HAND: _mirrored({
        "left_shoulder": (360.0, 200.0), "left_elbow": (378.0, 258.0), "left_wrist": (386.0, 312.0),
    }),
    Modality.HEAD: _mirrored({
        "head_top_center": (320.0, 62.0), "head_center": (320.0, 100.0),
        "nose_bridge": (320.0, 110.0), "chin_bottom": (320.0, 152.0),
        "forehead_left": (340.0, 74.0), "temple_left": (355.0, 94.0),
        "ear_left": (361.0, 112.0), "jaw_left": (350.0, 138.0),
    }),
    Modality.FACE: _mirrored({
        "left_eyebrow_outer": (352.0, 91.0), "left_eyebrow_mid_outer": (345.0, 89.0),
        "left_eyebrow_top": (338.0, 88.0), "left_eyebrow_mid_inner": (332.0, 89.0),
        "left_eyebrow_inner": (327.0, 91.0),
        "left_eye_outer_corner": (347.0, 104.0), "left_upper_eyelid_outer": (343.0, 96.0),
        "left_upper_eyelid": (338.0, 92.0), "left_eye_inner_corner": (329.0, 103.0),
        "left_lower_eyelid": (338.0, 108.0), "left_lower_eyelid_outer": (343.0, 107.0),
        "nose_bridge_top": (320.0, 98.0), "nose_bridge_mid": (320.0, 106.0),
        "nose_bridge_low": (320.0, 113.0), "nose_tip": (320.0, 120.0),
        "nostril_left": (326.0, 123.0),
        "mouth_left_corner": (340.0, 138.0), "upper_lip_left": (334.0, 134.0),
        "upper_lip_top_left": (326.0, 132.0), "upper_lip_center": (320.0, 133.0),
        "lower_lip_left": (327.0, 143.0), "lower_lip_bottom_left": (324.0, 145.0),
        "lower_lip_center": (320.0, 146.0),
        "inner_lip_left": (333.0, 138.0), "inner_upper_lip_center": (320.0, 137.0),
        "inner_lower_lip_center": (320.0, 140.0),
        "left_temple": (362.0, 92.0), "left_cheek": (352.0, 122.0), "left_jaw": (355.0, 134.0),
        "left_jaw_low": (346.0, 146.0), "chin_left": (331.0, 153.0), "chin": (320.0, 156.0),
        "forehead_left": (340.0, 72.0), "forehead_center": (320.0, 70.0),
        "left_cheekbone": (350.0, 112.0),
    }),
    Modality.BODY: _mirrored({
        "head": (320.0, 100.0), "shoulder_center": (320.0, 196.0), "spine": (320.0, 262.0),
        "hip_center": (320.0, 320.0),
        "left_hip": (345.0, 322.0), "left_knee": (350.0, 390.0), "left_ankle": (352.0, 446.0),
        "left_foot": (358.0, 458.0),
    }),
}

for _m in VISUAL_MODALITIES:
    _missing = set(POINT_NAMES[_m]) - set(NEUTRAL_POSE[_m])
    assert not _missing, (_m, _missing)


def neutral_array(modality: Modality) -> np.ndarray:
    return np.array([NEUTRAL_POSE[modality][n] for n in POINT_NAMES[modality]])


class ScriptError(ValueError):
    pass


def _offset_targets(key: str) -> list[tuple[Modality, slice | int]]:
    if key == "*":
        return [(m, slice(None)) for m in VISUAL_MODALITIES]
    try:
        mod, point = key.split(".", 1)
        modality = Modality(mod)
    except ValueError:
        raise ScriptError(f"bad offset key {key!r}") from None
    if not modality.is_visual:
        raise ScriptError(f"bad offset key {key!r}")
    if point == "*":
        return [(modality, slice(None))]
    if point not in POINT_INDEX[modality]:
        raise ScriptError(f"unknown point in offset key {key!r}")
    return [(modality, POINT_INDEX[modality][point])]


def offsets_to_arrays(offsets: Mapping[str, Iterable[float]]) -> dict[Modality, np.ndarray]:
    out = {m: np.zeros((len(POINT_NAMES[m]), 2)) for m in VISUAL_MODALITIES}
    for key, d in offsets.items():
        d = np.asarray(list(d), dtype=float)
        if d.shape != (2,):
            raise ScriptError(f"offset for {key!r} must be [dx, dy]")
        for m, sel in _offset_targets(key):
            out[m][sel] += d
    return out


@dataclass(frozen=True)
class Motion:
    keyframes: tuple[tuple[float, Mapping[str, tuple[float, float]]], ...]
    cycle_ms: float | None = None

    def __post_init__(self):
        ts = [t for t, _ in self.keyframes]
        if not ts:
            raise ScriptError("a motion needs keyframes")
        if any(b <= a for a, b in zip(ts, ts[1:])) or ts[0] < 0 or ts[-1] > 1:
            raise ScriptError("keyframe times must strictly increase within [0, 1]")
        if self.cycle_ms is not None and not self.cycle_ms > 0:
            raise ScriptError("cycle_ms must be positive")

    def sample(self, frac: np.ndarray) -> dict[Modality, np.ndarray]:
        """Offsets ``(frames, n, 2)`` per modality at the given time fractions."""
        ts = np.array([t for t, _ in self.keyframes])
        arrays = [offsets_to_arrays(o) for _, o in self.keyframes]
        out = {}
        for m in VISUAL_MODALITIES:
            stack = np.stack([a[m] for a in arrays])  # (K, n, 2)
            flat = stack.reshape(len(ts), -1)
            vals = np.stack([np.interp(frac, ts, flat[:, j]) for j in range(flat.shape[1])], axis=1)
            out[m] = vals.reshape(len(frac), *stack.shape[1:])
        return out


@dataclass(frozen=True)
class ScriptedWord:
    time_fraction: float
    word: str
    confidence: float


@dataclass(frozen=True)
class GestureScript:
    name: str
    label: EmotionClass
    pose: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    motions: tuple[Motion, ...] = ()
    noise_px: float = DEFAULT_NOISE_PX
    duration_ms: tuple[int, int] = (MIN_DURATION_MS, MIN_DURATION_MS)
    words: tuple[ScriptedWord, ...] = ()
    description: str = ""

    def __post_init__(self):
        if self.noise_px < 0:
            raise ScriptError("noise_px must be >= 0")
        lo, hi = self.duration_ms
        if not MIN_DURATION_MS <= lo <= hi <= MAX_DURATION_MS:
            raise ScriptError("script durations must lie within 15-60 s")
        offsets_to_arrays(self.pose)

    @property
    def keyframes(self):
        return [kf for m in self.motions for kf in m.keyframes]


def script_from_dict(d: dict) -> GestureScript:
    try:
        motions = tuple(
            Motion(tuple((float(k["t"]), {key: tuple(v) for key, v in k.get("offsets", {}).items()})
                         for k in m["keyframes"]), m.get("cycle_ms"))
            for m in d.get("motions", []))
        words = tuple(ScriptedWord(float(w["t"]), str(w["word"]).lower(), float(w["conf"]))
                      for w in d.get("words", []))
        dur = d.get("duration_ms", [MIN_DURATION_MS, MIN_DURATION_MS])
        if isinstance(dur, (int, float)):
            dur = [dur, dur]
        label = d["label"]
        label = EmotionClass[label.upper()] if isinstance(label, str) else EmotionClass(label)
        return GestureScript(
            name=d["name"], label=label,
            pose={k: tuple(v) for k, v in d.get("pose", {}).items()},
            motions=motions, noise_px=float(d.get("noise_px", DEFAULT_NOISE_PX)),
            duration_ms=(int(dur[0]), int(dur[1])), words=words,
            description=d.get("description", ""))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ScriptError):
            raise
        raise ScriptError(f"bad script {d.get('name', '?')!r}: {exc}") from None


def load_scripts(path=None) -> list[GestureScript]:
    """Read a script file; the shipped gesture catalog when ``path`` is None."""
    if path is None:
        text = resources.files("aggrofuse.data").joinpath("gesture_scripts.json").read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    doc = json.loads(text)
    return [script_from_dict(d) for d in doc["scripts"]]


def scripts_by_class(scripts: Iterable[GestureScript] | None = None) -> dict[EmotionClass, list[GestureScript]]:
    scripts = load_scripts() if scripts is None else list(scripts)
    out: dict[EmotionClass, list[GestureScript]] = {c: [] for c in EmotionClass}
    for s in scripts:
        out[s.label].append(s)
    return out


@dataclass(frozen=True)
class ActorProfile:
    """Systematic per-actor body size and position."""

    actor_id: str = "a0"
    scale: float = 1.0
    dx: float = 0.0
    dy: float = 0.0

    @classmethod
    def sample(cls, actor_id: str, rng: np.random.Generator) -> "ActorProfile":
        return cls(actor_id, float(rng.uniform(0.93, 1.06)),
                   float(rng.uniform(-40, 40)), float(rng.uniform(-8, 8)))

    def apply(self, xy: np.ndarray) -> np.ndarray:
        center = np.array([DEFAULT_FRAME_WIDTH / 2, DEFAULT_FRAME_HEIGHT / 2])
        return center + self.scale * (xy - center) + np.array([self.dx, self.dy])


def gen_session(script: GestureScript, seed: int, frame_rate: float = DEFAULT_FRAME_RATE,
                actor: ActorProfile | None = None, session_id: str | None = None,
                duration_ms: int | None = None) -> Session:
    """Render one session from a script. Same (script, seed, actor) -> same session."""
    if not frame_rate > 0:
        raise ScriptError("frame_rate must be positive")
    actor = actor or ActorProfile()
    rng = np.random.default_rng(seed)
    lo, hi = script.duration_ms
    duration = int(duration_ms if duration_ms is not None else rng.integers(lo, hi + 1))
    n_frames = int(np.floor(duration * frame_rate / 1000.0)) + 1
    t_ms = np.round(np.arange(n_frames) * 1000.0 / frame_rate).astype(np.int64)
    t_ms = t_ms[t_ms <= duration]
    frac_total = t_ms / duration

    pose = offsets_to_arrays(script.pose)
    coords = {m: np.broadcast_to(neutral_array(m) + pose[m], (len(t_ms), len(POINT_NAMES[m]), 2)).copy()
              for m in VISUAL_MODALITIES}
    for motion in script.motions:
        frac = frac_total if motion.cycle_ms is None else (t_ms % motion.cycle_ms) / motion.cycle_ms
        for m, off in motion.sample(frac).items():
            coords[m] += off

    clamped = False
    streams = {}
    for m in VISUAL_MODALITIES:
        xy = actor.apply(coords[m])
        if script.noise_px > 0:
            xy = xy + rng.uniform(-script.noise_px, script.noise_px, size=xy.shape)
        lim = np.array([DEFAULT_FRAME_WIDTH, DEFAULT_FRAME_HEIGHT], dtype=float)
        if (xy < 0).any() or (xy > lim).any():
            clamped = True
            xy = np.clip(xy, 0, lim)
        xy = np.round(xy, 2) + 0.0
        names = POINT_NAMES[m]
        streams[m] = [TrackedFrame(int(t), m, names, xy[i]) for i, t in enumerate(t_ms)]
    if clamped:
        warnings.warn(f"script {script.name}: coordinates clamped to the frame")

    speech = []
    for w in script.words:
        t = int(round(w.time_fraction * duration))
        conf = float(np.clip(round(w.confidence + rng.uniform(-0.05, 0.05), 3), 0.0, 1.0))
        speech.append(SpeechEvent(t, w.word, conf))
    speech.sort(key=lambda e: e.timestamp)

    return Session(session_id=session_id or f"{script.name}-{seed}", actor_id=actor.actor_id,
                   label=script.label, duration=duration, streams=streams, speech=speech,
                   frame_width=DEFAULT_FRAME_WIDTH, frame_height=DEFAULT_FRAME_HEIGHT)


@dataclass(frozen=True)
class DatasetEntry:
    session: Session
    seed: int
    script: str


def session_seed(seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([seed, *path]).generate_state(1)[0])


def gen_dataset(actor_count: int = 5, acts_per_class: int = 3, seed: int = 0,
                frame_rate: float = DEFAULT_FRAME_RATE,
                scripts: Iterable[GestureScript] | None = None) -> list[DatasetEntry]:
    """actor_count x 7 x acts_per_class sessions, each act using a different script variant."""
    if actor_count < 1 or acts_per_class < 1:
        raise ScriptError("counts must be >= 1")
    catalog = scripts_by_class(scripts)
    empty = [c.label for c, v in catalog.items() if not v]
    if empty:
        raise ScriptError(f"no scripts for {empty}")
    out = []
    for a in range(actor_count):
        actor = ActorProfile.sample(f"a{a + 1}", np.random.default_rng(session_seed(seed, a, 99)))
        for c in EmotionClass:
            variants = catalog[c]
            for j in range(acts_per_class):
                script = variants[(j + a) % len(variants)]
                s_seed = session_seed(seed, a, int(c), j)
                sid = f"{actor.actor_id}-{c.name.lower()}-{j + 1}"
                out.append(DatasetEntry(gen_session(script, s_seed, frame_rate, actor, sid), s_seed, script.name))
    return out


def manifest_entry(entry: DatasetEntry, data: bytes | None = None) -> dict:
    data = serialize_session(entry.session) if data is None else data
    return {"id": entry.session.session_id, "file": f"{entry.session.session_id}.jsonl",
            "label": int(entry.session.label), "seed": entry.seed, "script": entry.script,
            "hash": sha256_hex(data)}
