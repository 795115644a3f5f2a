"""Small builders shared by the tests."""

from __future__ import annotations

import numpy as np

from aggrofuse.registry import POINT_NAMES, VISUAL_MODALITIES, EmotionClass, Modality
from aggrofuse.session import Session, SpeechEvent, TrackedFrame
from aggrofuse.synth import neutral_array


def frame(modality, t, xy=None):
    modality = Modality(modality)
    xy = neutral_array(modality) if xy is None else xy
    return TrackedFrame(t, modality, POINT_NAMES[modality], xy)


def random_session(seed: int, n_frames: int = 5, n_words: int = 2, label=None) -> Session:
    rng = np.random.default_rng(seed)
    streams = {}
    for m in VISUAL_MODALITIES:
        if rng.random() < 0.2:
            continue
        ts = np.cumsum(rng.integers(1, 60, n_frames))
        base = neutral_array(m)
        streams[m] = [frame(m, int(t), np.round(np.clip(base + rng.normal(0, 10, base.shape), 0, [640, 480]), 3))
                      for t in ts]
    words = sorted(int(t) for t in rng.integers(0, 400, n_words))
    speech = [SpeechEvent(t, str(rng.choice(["kill", "hello", "ticked off", "why"])),
                          float(np.round(rng.uniform(0, 1), 3))) for t in words]
    label = EmotionClass(int(rng.integers(0, 7))) if label is None else EmotionClass(label)
    return Session(f"s{seed}", f"a{seed % 5}", label, 20000, streams, speech)


def speech_only_session(words, label=EmotionClass.ANGER) -> Session:
    return Session("speech-only", "a0", label, 20000, {},
                   [SpeechEvent(t, w, c) for t, w, c in words])


# -- fuzzed rule windows -----------------------------------------------------------------

RULE_POINTS = {
    1: ("hand", ["left_wrist", "left_elbow", "right_wrist", "right_elbow"]),
    2: ("hand", ["left_wrist", "left_elbow", "right_wrist", "right_elbow"]),
    3: ("hand", ["left_wrist", "right_wrist"]),
    4: ("hand", ["left_wrist", "right_wrist"]),
    5: ("head", ["head_center"]),
    6: ("face", ["right_eyebrow_top", "left_eyebrow_top", "upper_lip_top_left", "upper_lip_top_right"]),
    7: ("face", ["upper_lip_left", "upper_lip_right", "lower_lip_left", "lower_lip_right"]),
    8: ("face", ["left_eyebrow_top", "left_upper_eyelid", "left_eye_outer_corner",
                 "right_eyebrow_top", "right_upper_eyelid", "right_eye_outer_corner"]),
    9: ("head", ["chin_bottom"]),
    10: ("head", ["head_top_center"]),
}


def fuzz_window(rng, rule_id, width=640):
    """Random frames for one rule: (RuleWindow-ready frames, oracle dict).

    Relevant points get integer-valued perturbations so ties and exact
    threshold hits show up; traces use step sizes around the rule thresholds.
    """
    from aggrofuse.rules import RuleWindow

    mod, names = RULE_POINTS[rule_id]
    m = Modality(mod)
    k = int(rng.integers(1, 11))
    idx = [POINT_NAMES[m].index(n) for n in names]
    base = neutral_array(m)
    scale = width / 640
    xy = np.repeat(base[None], k, axis=0)
    if rule_id == 2:  # start from raised wrists so both outcomes occur
        xy[:, [POINT_NAMES[m].index("left_wrist"), POINT_NAMES[m].index("right_wrist")], 1] -= 70
    if rule_id in (1, 2, 6, 7, 8):
        xy[:, idx] += rng.integers(-30, 31, (k, len(idx), 2)) * rng.choice([1, 0.5])
    else:
        steps = rng.choice([0, 1, 3, 5, 7, 10, 15, 16, 20, 30], size=(k, len(idx), 2)) * scale
        signs = rng.choice([-1, 1], size=(k, len(idx), 2))
        if rng.random() < 0.5:  # zigzag
            signs = np.where(np.arange(k)[:, None, None] % 2 == 0, 1, -1) * signs[:1]
        xy[:, idx] += np.cumsum(steps * signs, axis=0)
        xy[:, idx] += rng.integers(-2, 3, (k, len(idx), 2))
    frames = [TrackedFrame(33 * i, m, POINT_NAMES[m], xy[i]) for i in range(k)]
    oracle = {mod: [dict(zip(POINT_NAMES[m], map(tuple, f.xy.tolist()))) for f in frames]}
    return RuleWindow({m: frames}, width), oracle
