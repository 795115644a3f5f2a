import json
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from aggrofuse.registry import (
    EXPECTED_POINT_COUNTS, JOINT_PAIRS, POINT_NAMES, VISUAL_MODALITIES, EmotionClass, Modality,
)
from aggrofuse.session import (
    Session, SessionFormatError, SpeechEvent, errors_only, parse_session, read_session,
    serialize_session, validate_session, write_session,
)
from helpers import frame, random_session


def test_emotion_codes_follow_class_column():
    assert [e.name for e in EmotionClass] == ["ANGER", "HAPPY", "SURPRISE", "DISGUST", "FEAR", "SAD", "NEUTRAL"]
    assert [int(e) for e in EmotionClass] == list(range(7))


def test_point_counts_and_pairs():
    counts = {m: len(POINT_NAMES[m]) for m in VISUAL_MODALITIES}
    assert counts == {Modality.HAND: 6, Modality.HEAD: 12, Modality.FACE: 60, Modality.BODY: 12}
    assert counts == EXPECTED_POINT_COUNTS
    for m in VISUAL_MODALITIES:
        assert len(set(POINT_NAMES[m])) == len(POINT_NAMES[m])
        assert JOINT_PAIRS[m]
    assert not Modality.SPEECH.is_visual


@pytest.mark.parametrize("seed", range(100))
def test_round_trip_is_byte_stable(seed):
    s = random_session(seed)
    data = serialize_session(s)
    back = parse_session(data)
    assert serialize_session(back) == data
    assert back.label == s.label and back.speech == s.speech
    for m in s.streams:
        assert back.frames(m) == s.frames(m)


def _header(**kw):
    h = {"session_id": "x", "actor_id": "a", "label": 0, "frame_width": 640, "frame_height": 480,
         "duration_ms": 20000}
    h.update(kw)
    return json.dumps(h)


def _frame_line(modality="hand", t=0, drop=0, rename=None):
    f = frame(modality, t)
    pts = [{"name": n, "x": float(x), "y": float(y)} for n, (x, y) in zip(f.names, f.xy)]
    pts = pts[: len(pts) - drop]
    if rename:
        pts[0]["name"] = rename
    return json.dumps({"t_ms": t, "modality": modality, "points": pts})


def test_malformed_line_reports_line_number():
    text = "\n".join([_header(), _frame_line(), "{not json"])
    with pytest.raises(SessionFormatError) as exc:
        parse_session(text)
    assert exc.value.line == 3 and "malformed" in str(exc.value)


def test_wrong_point_count_names_counts():
    text = "\n".join([_header(), _frame_line("head", drop=1)])
    with pytest.raises(SessionFormatError, match="wrong point count: head expects 12, got 11"):
        parse_session(text)


def test_unknown_point_and_non_monotonic_rejected():
    with pytest.raises(SessionFormatError, match="unknown point"):
        parse_session("\n".join([_header(), _frame_line(rename="elbow_of_doom")]))
    with pytest.raises(SessionFormatError, match="monotonic"):
        parse_session("\n".join([_header(), _frame_line(t=40), _frame_line(t=40)]))


def test_unknown_fields_warn_and_z_dropped():
    f = json.loads(_frame_line())
    f["points"][0]["z"] = 1.5
    f["extra"] = 1
    with pytest.warns(UserWarning, match="extra"):
        s = parse_session("\n".join([_header(), json.dumps(f)]))
    assert s.frames(Modality.HAND)[0].xy.shape == (6, 2)


def test_points_reordered_to_registry_order():
    f = json.loads(_frame_line("hand"))
    f["points"].reverse()
    s = parse_session("\n".join([_header(), json.dumps(f)]))
    assert s.frames(Modality.HAND)[0].names == POINT_NAMES[Modality.HAND]


def test_label_by_name_and_duration_default():
    h = json.loads(_header(label="sad"))
    del h["duration_ms"]
    s = parse_session("\n".join([json.dumps(h), _frame_line(t=16000)]))
    assert s.label == EmotionClass.SAD and s.duration == 16000


def test_validation_is_total_and_classifies():
    bad = Session("x", "a", EmotionClass.ANGER, 5000,
                  {Modality.HAND: [frame("hand", 10), frame("hand", 5)]},
                  [SpeechEvent(0, "", 1.5)])
    v = validate_session(bad)
    kinds = {(x.severity, x.field) for x in v}
    assert ("warning", "duration") in kinds
    assert ("error", "timestamp") in kinds
    assert ("error", "word") in kinds and ("error", "asr_confidence") in kinds
    assert all(x.severity == "warning" for x in validate_session(random_session(1)) if x.field == "duration")
    assert not errors_only(validate_session(random_session(1)))


def test_out_of_frame_point_is_an_error():
    xy = frame("body", 0).xy.copy()
    xy[0, 0] = 700
    s = Session("x", "a", EmotionClass.SAD, 20000, {Modality.BODY: [frame("body", 0, xy)]})
    assert [x.message for x in errors_only(validate_session(s))] == ["point outside the frame"]


def test_file_round_trip(tmp_path):
    s = random_session(3)
    data = write_session(s, tmp_path / "s.jsonl")
    assert (tmp_path / "s.jsonl").read_bytes() == data
    assert serialize_session(read_session(tmp_path / "s.jsonl")) == data


@given(st.lists(st.tuples(st.integers(0, 10_000), st.sampled_from(["kill", "Punch", "hello"]),
                          st.floats(0, 1)), max_size=5))
def test_speech_records_survive_round_trip(words):
    words = sorted(words, key=lambda w: w[0])
    s = Session("x", "a", EmotionClass.NEUTRAL, 20000, {}, [SpeechEvent(t, w, c) for t, w, c in words])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        back = parse_session(serialize_session(s))
    assert [(e.timestamp, e.asr_confidence) for e in back.speech] == [(t, c) for t, _, c in words]
