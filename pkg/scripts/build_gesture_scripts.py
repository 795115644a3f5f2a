"""Rebuild src/aggrofuse/data/gesture_scripts.json, the stock gesture scripts.

Point offsets are in pixels at 640x480 relative to the neutral pose. Run from
anywhere; the output path is resolved relative to this file.
"""
import json
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "aggrofuse" / "data" / "gesture_scripts.json"

def both(d):
    out = {}
    for k, v in d.items():
        out[k] = v
        if "left" in k:
            out[k.replace("left", "right")] = [-v[0], v[1]]
    return out

def merge(*ds):
    out = {}
    for d in ds:
        for k, v in d.items():
            if k in out:
                out[k] = [out[k][0] + v[0], out[k][1] + v[1]]
            else:
                out[k] = list(v)
    return out

BROWS = ["outer", "mid_outer", "top", "mid_inner", "inner"]
HANDS_ON_HIPS = both({"hand.left_elbow": [22, 10], "hand.left_wrist": [-16, 8]})
GUARD = {"hand.left_elbow": [4, -10], "hand.left_wrist": [-20, -120],
         "hand.right_elbow": [-4, -6], "hand.right_wrist": [20, -100]}
RAISED = both({"hand.left_elbow": [20, -90], "hand.left_wrist": [30, -200]})
SCOWL = merge(
    both({"face.left_eyebrow_top": [-16, 2], "face.left_eyebrow_mid_inner": [-8, 3],
          "face.left_eyebrow_inner": [-5, 4], "face.upper_lip_top_left": [4, 0],
          "face.lower_lip_left": [7, 0], "face.left_upper_eyelid": [0, 9],
          "face.left_upper_eyelid_outer": [0, 6]}),
)
SMILE = merge(both({"face.mouth_left_corner": [6, -5], "face.left_cheek": [0, -4],
                    "face.left_lower_eyelid": [0, -2], "face.lower_lip_bottom_left": [0, 2]}),
              {"face.lower_lip_center": [0, 3]})
SURPRISE_FACE = merge(
    both({f"face.left_eyebrow_{b}": [0, -8] for b in BROWS}),
    both({"face.left_upper_eyelid": [0, -4], "face.left_upper_eyelid_outer": [0, -4],
          "face.lower_lip_left": [0, 10], "face.lower_lip_bottom_left": [0, 10], "face.chin_left": [0, 8]}),
    {"face.lower_lip_center": [0, 10], "face.inner_lower_lip_center": [0, 8], "face.chin": [0, 8]})
DISGUST_FACE = merge(
    both({"face.upper_lip_left": [0, -4], "face.upper_lip_top_left": [0, -4], "face.nostril_left": [0, -3],
          "face.left_eyebrow_top": [0, 2], "face.left_eyebrow_inner": [0, 2], "face.left_upper_eyelid": [0, 3]}),
    {"face.upper_lip_center": [0, -4], "face.nose_tip": [0, -3]})
FEAR_FACE = merge(
    both({f"face.left_eyebrow_{b}": [0, -6] for b in BROWS}),
    both({"face.left_eyebrow_inner": [-3, 0], "face.left_upper_eyelid": [0, -4],
          "face.left_upper_eyelid_outer": [0, -4], "face.mouth_left_corner": [5, 2]}))
SAD_FACE = merge(both({"face.left_eyebrow_inner": [0, -5], "face.left_eyebrow_mid_inner": [0, -5],
                       "face.mouth_left_corner": [0, 6], "face.left_upper_eyelid": [0, 2]}))
DUCK = {"hand.*": [0, 40], "head.*": [0, 40], "face.*": [0, 40], "body.head": [0, 40],
        "body.shoulder_center": [0, 40], "body.spine": [0, 25]}
HEAD_GROUP = ["head.*", "face.*", "body.head"]

def headmove(dx, dy):
    return {k: [dx, dy] for k in HEAD_GROUP}

def cyc(ms, frames):
    return {"cycle_ms": ms, "keyframes": [{"t": t, "offsets": o} for t, o in frames]}

def span(frames):
    return {"keyframes": [{"t": t, "offsets": o} for t, o in frames]}

def w(t, word, conf):
    return {"t": t, "word": word, "conf": conf}

SHAKE = cyc(133.33, [(0, {}), (0.25, headmove(20, 0)), (0.75, headmove(-20, 0)), (1, {})])
TREMOR = cyc(133.33, [(0, {}), (0.25, {"head.*": [4, 0]}), (0.75, {"head.*": [-4, 0]}), (1, {})])

scripts = [
    # anger
    dict(name="anger_hands_on_hips", label="anger", description="Stand with arms on hips, scowling.",
         pose=merge(HANDS_ON_HIPS, SCOWL), words=[w(0.2, "hate", 0.8), w(0.55, "angry", 0.75), w(0.8, "annoyed", 0.7)]),
    dict(name="anger_fist_fight_stance", label="anger", description="Stance for a fist fight, shaking the head.",
         pose=merge(GUARD, SCOWL), motions=[SHAKE], words=[w(0.3, "punch", 0.85), w(0.7, "loser", 0.7)]),
    dict(name="anger_punching", label="anger", description="Punching from a guard stance.",
         pose=merge(GUARD, SCOWL),
         motions=[cyc(600, [(0, {}), (0.5, {"hand.left_wrist": [-50, 0], "hand.right_wrist": [50, 0]}), (1, {})])],
         words=[w(0.25, "hit", 0.8), w(0.5, "kill", 0.9), w(0.85, "smack", 0.65)]),
    dict(name="anger_raising_arms_in_rage", label="anger", description="Raising arms in rage.",
         pose=SCOWL,
         motions=[cyc(900, [(0, {}), (0.4, merge(RAISED, {"head.*": [0, -20]})),
                            (0.6, merge(RAISED, {"head.*": [0, -20]})), (1, {})]), TREMOR],
         words=[w(0.4, "furious", 0.8), w(0.75, "enraged", 0.6)]),
    # happy
    dict(name="happy_raise_arms_in_joy", label="happy", description="Raise arms in joy, smiling.",
         pose=merge(RAISED, SMILE),
         motions=[cyc(1200, [(0, {}), (0.5, both({"hand.left_wrist": [15, 0]})), (1, {})])],
         words=[w(0.3, "great", 0.8), w(0.7, "yes", 0.85)]),
    dict(name="happy_jump_with_joy", label="happy", description="Jump with joy.",
         pose=SMILE, motions=[cyc(700, [(0, {}), (0.5, {"*": [0, -35]}), (1, {})])],
         words=[w(0.5, "wonderful", 0.75)]),
    dict(name="happy_laughing", label="happy", description="Laughing with a light head bob.",
         pose=SMILE, motions=[cyc(500, [(0, {}), (0.5, headmove(0, 6)), (1, {})])],
         words=[w(0.2, "haha", 0.6), w(0.6, "crazy", 0.55)]),
    dict(name="happy_fist_pumping", label="happy", description="Fist pumping in joy.",
         pose=merge(SMILE, {"hand.right_elbow": [-20, -60]}),
         motions=[cyc(500, [(0, {"hand.right_wrist": [10, -120]}), (0.5, {"hand.right_wrist": [10, -200]}),
                            (1, {"hand.right_wrist": [10, -120]})])],
         words=[w(0.4, "yes", 0.9)]),
    # surprise
    dict(name="surprise_arms_away_from_hips", label="surprise",
         description="Arms on the side slightly away from the hips.",
         pose=merge(both({"hand.left_wrist": [25, -10], "hand.left_elbow": [8, 0]}), SURPRISE_FACE),
         words=[w(0.3, "wow", 0.8), w(0.6, "what", 0.6)]),
    dict(name="surprise_raising_arms", label="surprise", description="Raising arms in surprise.",
         pose=SURPRISE_FACE, motions=[span([(0, {}), (0.05, RAISED), (1, RAISED)])],
         words=[w(0.1, "oh", 0.7)]),
    dict(name="surprise_covering_mouth", label="surprise", description="Covering mouth with a hand.",
         pose=merge(SURPRISE_FACE, {"hand.right_elbow": [-5, -40], "hand.right_wrist": [60, -170]}),
         words=[w(0.5, "really", 0.7)]),
    dict(name="surprise_moving_back", label="surprise", description="Moving back in surprise.",
         pose=SURPRISE_FACE, motions=[span([(0, {}), (0.3, {"*": [0, -20]}), (1, {"*": [0, -20]})])],
         words=[w(0.35, "whoa", 0.65)]),
    # disgust
    dict(name="disgust_shrug", label="disgust", description="Shrug with the shoulders.",
         pose=DISGUST_FACE,
         motions=[cyc(1500, [(0, {}), (0.5, merge(both({"hand.left_shoulder": [0, -14], "hand.left_elbow": [0, -10],
                                                        "hand.left_wrist": [0, -8]}),
                                                  {"body.shoulder_center": [0, -10]})), (1, {})])],
         words=[w(0.4, "gross", 0.8)]),
    dict(name="disgust_hold_nose_evade", label="disgust", description="Hold nose with one arm, evade with the other.",
         pose=merge(DISGUST_FACE, {"hand.right_elbow": [-5, -50], "hand.right_wrist": [64, -190],
                                   "hand.left_elbow": [35, -20], "hand.left_wrist": [70, -30]}),
         words=[w(0.3, "yuck", 0.75)]),
    dict(name="disgust_moving_sideways", label="disgust", description="Moving sideways away from something.",
         pose=DISGUST_FACE, motions=[span([(0, {}), (0.5, {"*": [-60, 0]}), (1, {})])],
         words=[w(0.6, "ew", 0.6)]),
    dict(name="disgust_looking_down", label="disgust", description="Looking down expressing disgust.",
         pose=merge(DISGUST_FACE, headmove(0, 12)), words=[w(0.5, "nasty", 0.7)]),
    # fear
    dict(name="fear_duck", label="fear", description="Duck.",
         pose=FEAR_FACE, motions=[cyc(3000, [(0, {}), (0.3, DUCK), (0.7, DUCK), (1, {})])],
         words=[w(0.3, "help", 0.8)]),
    dict(name="fear_moving_away", label="fear", description="Action of moving away in fear.",
         pose=FEAR_FACE, motions=[span([(0, {}), (1, {"*": [80, 0]})])],
         words=[w(0.5, "no", 0.8)]),
    dict(name="fear_evade_sideways", label="fear", description="Moving sideways trying to evade.",
         pose=FEAR_FACE, motions=[cyc(2500, [(0, {}), (0.5, {"*": [-50, 0]}), (1, {})])],
         words=[w(0.2, "stop", 0.75)]),
    dict(name="fear_insect_on_shirt", label="fear", description="Getting rid of an insect on the shirt.",
         pose=FEAR_FACE,
         motions=[cyc(400, [(0, {"hand.right_wrist": [40, -40]}), (0.5, {"hand.right_wrist": [65, -40]}),
                            (1, {"hand.right_wrist": [40, -40]})])],
         words=[w(0.45, "get", 0.5)]),
    # sad
    dict(name="sad_looking_down_slouched", label="sad", description="Move around with a slouched back, looking down.",
         pose=merge(SAD_FACE, headmove(0, 14), {"body.shoulder_center": [0, 8]},
                    both({"hand.left_shoulder": [0, 10]})),
         words=[w(0.5, "sorry", 0.6)]),
    dict(name="sad_hold_head_one_hand", label="sad", description="Hold head with one hand in despair.",
         pose=merge(SAD_FACE, {"hand.right_elbow": [-10, -60], "hand.right_wrist": [40, -200]}, headmove(-4, 6)),
         words=[w(0.4, "why", 0.7)]),
    dict(name="sad_crying", label="sad", description="Crying with a slow head bob.",
         pose=SAD_FACE, motions=[cyc(1200, [(0, {}), (0.5, headmove(0, 5)), (1, {})])],
         words=[w(0.3, "alone", 0.65), w(0.7, "miss", 0.6)]),
    # neutral
    dict(name="neutral_stand", label="neutral", description="Stand in neutral position in front of the sensor."),
    dict(name="neutral_weight_shift", label="neutral", description="Neutral stance with a slow weight shift.",
         motions=[cyc(4000, [(0, {}), (0.25, {"*": [8, 0]}), (0.75, {"*": [-8, 0]}), (1, {})])],
         words=[w(0.5, "okay", 0.8)]),
    dict(name="neutral_idle_glance", label="neutral", description="Neutral stance glancing around.",
         motions=[cyc(3000, [(0, {}), (0.5, headmove(10, 0)), (1, {})])],
         words=[w(0.3, "hello", 0.85)]),
]
for s in scripts:
    s.setdefault("noise_px", 2.0)
    s.setdefault("duration_ms", [15000, 25000])
    s.setdefault("pose", {})
    s.setdefault("motions", [])
    s.setdefault("words", [])

doc = {"format": "aggrofuse-scripts", "version": 1, "scripts": scripts}
text = json.dumps(doc, indent=1)
OUT.write_text(text + "\n")
print(len(scripts), len(text))
