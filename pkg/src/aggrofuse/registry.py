"""Fixed point-name registries for the tracked modalities.

Each modality's points are split into anatomical groups. Registry order is
the concatenation of the groups, and the joint pairs used for location-feature
angles are the consecutive points inside each group.

Left/right names refer to the tracked person's own side. With the person facing
the sensor, their left side appears on the image right (larger x).
"""

from __future__ import annotations

from enum import Enum, IntEnum


class EmotionClass(IntEnum):
    ANGER = 0
    HAPPY = 1
    SURPRISE = 2
    DISGUST = 3
    FEAR = 4
    SAD = 5
    NEUTRAL = 6

    @property
    def label(self) -> str:
        return self.name.capitalize()


class Modality(str, Enum):
    HAND = "hand"
    HEAD = "head"
    FACE = "face"
    BODY = "body"
    SPEECH = "speech"

    @property
    def is_visual(self) -> bool:
        return self is not Modality.SPEECH


VISUAL_MODALITIES = (Modality.HAND, Modality.HEAD, Modality.FACE, Modality.BODY)

POINT_GROUPS: dict[Modality, tuple[tuple[str, ...], ...]] = {
    Modality.HAND: (
        ("left_shoulder", "left_elbow", "left_wrist"),
        ("right_shoulder", "right_elbow", "right_wrist"),
    ),
    # head and body point names are our own choice, the face list only
    # partly follows the commonly cited landmarks
    Modality.HEAD: (
        ("head_top_center", "head_center", "nose_bridge", "chin_bottom"),
        ("forehead_left", "temple_left", "ear_left", "jaw_left"),
        ("forehead_right", "temple_right", "ear_right", "jaw_right"),
    ),
    Modality.FACE: (
        ("left_eyebrow_outer", "left_eyebrow_mid_outer", "left_eyebrow_top",
         "left_eyebrow_mid_inner", "left_eyebrow_inner"),
        ("right_eyebrow_outer", "right_eyebrow_mid_outer", "right_eyebrow_top",
         "right_eyebrow_mid_inner", "right_eyebrow_inner"),
        ("left_eye_outer_corner", "left_upper_eyelid_outer", "left_upper_eyelid",
         "left_eye_inner_corner", "left_lower_eyelid", "left_lower_eyelid_outer"),
        ("right_eye_outer_corner", "right_upper_eyelid_outer", "right_upper_eyelid",
         "right_eye_inner_corner", "right_lower_eyelid", "right_lower_eyelid_outer"),
        ("nose_bridge_top", "nose_bridge_mid", "nose_bridge_low", "nose_tip"),
        ("nostril_left", "nostril_right"),
        ("mouth_left_corner", "upper_lip_left", "upper_lip_top_left",
         "upper_lip_center", "upper_lip_top_right", "upper_lip_right",
         "mouth_right_corner", "lower_lip_right", "lower_lip_bottom_right",
         "lower_lip_center", "lower_lip_bottom_left", "lower_lip_left"),
        ("inner_lip_left", "inner_upper_lip_center", "inner_lip_right",
         "inner_lower_lip_center"),
        ("left_temple", "left_cheek", "left_jaw", "left_jaw_low", "chin_left",
         "chin", "chin_right", "right_jaw_low", "right_jaw", "right_cheek",
         "right_temple"),
        ("forehead_left", "forehead_center", "forehead_right"),
        ("left_cheekbone", "right_cheekbone"),
    ),
    Modality.BODY: (
        ("head", "shoulder_center", "spine", "hip_center"),
        ("left_hip", "left_knee", "left_ankle", "left_foot"),
        ("right_hip", "right_knee", "right_ankle", "right_foot"),
    ),
}

POINT_NAMES: dict[Modality, tuple[str, ...]] = {
    m: tuple(name for group in groups for name in group)
    for m, groups in POINT_GROUPS.items()
}

POINT_INDEX: dict[Modality, dict[str, int]] = {
    m: {name: i for i, name in enumerate(names)} for m, names in POINT_NAMES.items()
}

JOINT_PAIRS: dict[Modality, tuple[tuple[str, str], ...]] = {
    m: tuple((g[i], g[i + 1]) for g in groups for i in range(len(g) - 1))
    for m, groups in POINT_GROUPS.items()
}

EXPECTED_POINT_COUNTS = {Modality.HAND: 6, Modality.HEAD: 12, Modality.FACE: 60, Modality.BODY: 12}

for _m, _n in EXPECTED_POINT_COUNTS.items():
    assert len(POINT_NAMES[_m]) == _n, (_m, len(POINT_NAMES[_m]))
    assert len(set(POINT_NAMES[_m])) == _n, _m


def point_count(modality: Modality) -> int:
    return len(POINT_NAMES[modality])
