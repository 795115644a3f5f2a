"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Each test collects its checks, records one summary line, then asserts. The
terminal summary therefore lists every criterion even when some fail.
"""

import json
import time
from pathlib import Path

import numpy as np
import pytest

from aggrofuse.cli import EXIT_OK, main
from aggrofuse.config import RunConfig
from aggrofuse.evaluation import ConfusionMatrix, f_measure, metrics, metrics_from_confusion
from aggrofuse.experiment import compare_pathways
from aggrofuse.features import FeatureKind, combined_matrix, default_config, location_features, temporal_features
from aggrofuse.fusion import (
    FrameDecision, FusionConfig, ModalityOutcome, Source, counted_outcomes, fuse_instant, session_aggregate,
)
from aggrofuse.lexicon import classify_utterance, load_lexicon
from aggrofuse.pipeline import GEOMETRIC, RULES, pathways, train_pathway, training_rows
from aggrofuse.registry import POINT_NAMES, VISUAL_MODALITIES, EmotionClass, Modality
from aggrofuse.rules import RuleKind, RuleWindow, evaluate_rule, load_rulesets, rule_confidence, stock_anger_rules
from aggrofuse.session import SpeechEvent
from aggrofuse.svm import TrainConfig, kfold_cv, train_binary, train_multiclass
from aggrofuse.synth import gen_dataset, gen_session, load_scripts, neutral_array
from helpers import frame, fuzz_window
from oracles import (
    dual_value, plurality_oracle, qp_active_set_oracle, rbf_gram, rule_oracle, temporal_oracle,
    window_confidence_oracle,
)

KKT_TOL = 1e-2


# -- 1: R/N arithmetic ---------------------------------------------------------------

def test_criterion_01_rule_confidence_arithmetic(acceptance_line):
    t0 = time.perf_counter()
    hand = neutral_array(Modality.HAND)
    # wrists tucked inside the elbows and below them: Rule 1 holds on every hand frame
    hand[2, 0] = hand[1, 0] - 8
    hand[5, 0] = hand[4, 0] + 8
    window = RuleWindow({Modality.HAND: [frame("hand", 33 * i, hand) for i in range(5)],
                         Modality.FACE: [frame("face", 132)]})
    out = rule_confidence(stock_anger_rules(), window)
    names = {m: POINT_NAMES[m] for m in (Modality.HAND, Modality.FACE)}
    oracle_window = {m.value: [dict(zip(names[m], map(tuple, f.xy))) for f in fs]
                     for m, fs in window.frames.items()}
    fired, evaluated = window_confidence_oracle(oracle_window, 1.0)
    elapsed = time.perf_counter() - t0
    ok = ((out.fired, out.evaluated) == (5, 15) == (fired, evaluated)
          and abs(out.confidence - 0.3333) <= 1e-4 and abs(out.confidence - 5 / 15) <= 1e-12
          and elapsed < 1.0)
    acceptance_line(1, ok, f"R/N = {out.fired}/{out.evaluated} = {out.confidence:.6f}, {elapsed:.3f}s")
    assert ok


# -- 2: session aggregation -----------------------------------------------------------

def test_criterion_02_session_aggregation(acceptance_line):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    flags = np.zeros(50, bool)
    flags[rng.choice(50, 37, replace=False)] = True
    decisions = [FrameDecision(10 * i, bool(f), (int(f),) + (0,) * 6, ()) for i, f in enumerate(flags)]
    s = session_aggregate(decisions)
    elapsed = time.perf_counter() - t0
    ok = (s.anger_detections, s.fusion_runs) == (37, 50) and s.confidence == 0.74 and elapsed < 1.0
    acceptance_line(2, ok, f"{s.anger_detections}/{s.fusion_runs} = {s.confidence!r}, {elapsed:.3f}s")
    assert ok


# -- 3: fusion threshold ---------------------------------------------------------------

def _random_outcome_set(rng):
    mods, srcs = list(Modality), list(Source)
    return [(mods[rng.integers(5)], srcs[rng.integers(3)], int(rng.integers(7)),
             float(rng.choice([0.0, 0.1, 0.2179, 0.218, 0.3, 0.5, 0.7, 0.9, 1.0])), int(rng.integers(0, 1000)))
            for _ in range(int(rng.integers(0, 10)))]


def test_criterion_03_fusion_threshold(acceptance_line):
    t0 = time.perf_counter()
    at = fuse_instant([ModalityOutcome(Modality.HAND, EmotionClass.ANGER, 0.218, 0, Source.SVM)])
    below = fuse_instant([ModalityOutcome(Modality.HAND, EmotionClass.ANGER, 0.2179, 0, Source.SVM)])
    boundary = at.anger and at.votes[0] == 1 and not below.anger and below.votes[0] == 0

    grid = [0.0, 0.1, 0.2, 0.2179, 0.218, 0.3, 0.5, 0.7, 0.9, 1.0]
    rng = np.random.default_rng(3)
    agree = monotone = 0
    n = 10_000
    for _ in range(n):
        raw = _random_outcome_set(rng)
        outs = [ModalityOutcome(m, EmotionClass(c), conf, t, s) for m, s, c, conf, t in raw]
        now = int(rng.integers(0, 1200))
        collapse = bool(rng.integers(2))
        t1, t2 = sorted(rng.choice(grid, 2, replace=False))
        ok_set = True
        for T in (t1, t2):
            d = fuse_instant(outs, FusionConfig(threshold=T, collapse_sources=collapse), now)
            anger, tally = plurality_oracle(raw, T, 500, now, collapse)
            ok_set &= d.anger == anger and list(d.votes) == tally
        agree += ok_set
        lo = counted_outcomes(outs, FusionConfig(threshold=t1), now)
        hi = counted_outcomes(outs, FusionConfig(threshold=t2), now)
        monotone += set(hi) <= set(lo)
    elapsed = time.perf_counter() - t0
    ok = boundary and agree == n and monotone == n and elapsed < 30
    acceptance_line(3, ok, f"0.218 counted={at.anger}, 0.2179 counted={below.anger}; "
                           f"oracle agreement {agree}/{n}, monotone {monotone}/{n}, {elapsed:.1f}s")
    assert ok


# -- 4: feature dimensions ------------------------------------------------------------

def test_criterion_04_feature_dimensions(acceptance_line):
    t0 = time.perf_counter()
    expected_n = {Modality.HAND: 6, Modality.HEAD: 12, Modality.FACE: 60, Modality.BODY: 12}
    dims_ok = True
    dims = []
    for m, n in expected_n.items():
        cfg = default_config(m)
        a, b = frame(m, 0), frame(m, 33, neutral_array(m) + 1.0)
        loc, tmp = location_features(a, cfg), temporal_features(a, b, cfg)
        k = len(cfg.joint_pairs)
        dims_ok &= (len(POINT_NAMES[m]) == n and loc.dim == 2 * n + k and tmp.dim == 2 * n
                    and loc.kind is FeatureKind.LOCATION and tmp.kind is FeatureKind.TEMPORAL
                    and combined_matrix(np.array([0, 33]), np.stack([a.xy, b.xy]), cfg).shape == (1, 4 * n + k))
        dims.append(f"{m.value} n={n} m={k}")

    rng = np.random.default_rng(4)
    matched = 0
    worst = 0.0
    for i in range(200):
        m = VISUAL_MODALITIES[i % 4]
        cfg = default_config(m)
        n = expected_n[m]
        p0 = rng.uniform(0, 640, (n, 2))
        p1 = p0 + rng.normal(0, 20, (n, 2))
        t_a = int(rng.integers(0, 10_000))
        t_b = t_a + int(rng.integers(1, 200))
        got = temporal_features(frame(m, t_a, p0), frame(m, t_b, p1), cfg).values
        want = np.array(temporal_oracle(t_a, [tuple(p) for p in p0], t_b, [tuple(p) for p in p1]))
        err = float(np.abs(got - want).max())
        worst = max(worst, err)
        matched += err <= 1e-9
    elapsed = time.perf_counter() - t0
    ok = dims_ok and matched == 200 and elapsed < 10
    acceptance_line(4, ok, f"dims ok={dims_ok} ({', '.join(dims)}); temporal oracle {matched}/200, "
                           f"max err {worst:.1e}, {elapsed:.2f}s")
    assert ok


# -- 5: SVM ------------------------------------------------------------------------------

def _blobs(n_per, k=7, dim=5, spread=0.3, seed=0):
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-5, 5, (k, dim))
    X = np.concatenate([c + spread * rng.standard_normal((n_per, dim)) for c in centers])
    return X, np.repeat(np.arange(k), n_per)


def _kkt_gap(alpha, y, f, C):
    """Largest KKT violation, recomputed point by point."""
    worst = 0.0
    for a, yi, fi in zip(alpha, y, f):
        m = yi * fi
        if a <= 0:
            worst = max(worst, 1 - m)
        elif a >= C:
            worst = max(worst, m - 1)
        else:
            worst = max(worst, abs(m - 1))
    return worst


def _multiclass_kkt(model, X, labels):
    """Worst KKT gap and equality residual over all pairwise machines of ``model``."""
    Xs = model.scaler.transform(X) if model.scaler is not None else np.asarray(X, float)
    gap = resid = 0.0
    for (a, b), pm in model.pairs.items():
        idx = np.flatnonzero((labels == a) | (labels == b))
        y = np.where(labels[idx] == a, 1.0, -1.0)
        alpha = pm.diagnostics["alpha"]
        f = pm.decision(Xs[idx])
        gap = max(gap, _kkt_gap(alpha, y, f, pm.C))
        resid = max(resid, abs(float(alpha @ y)))
    return gap, resid


def test_criterion_05_svm(acceptance_line):
    t0 = time.perf_counter()
    # (a) six points against the exact QP optimum
    gaps = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(6, 2))
        y = np.array([1, 1, 1, -1, -1, -1.0])
        if seed % 2:
            X[3] = X[0] + 0.05
        m = train_binary(X, y, TrainConfig(C=1.0, gamma=0.5, tolerance=1e-6))
        best, _ = qp_active_set_oracle(X, y, 1.0, 0.5)
        own = dual_value(m.diagnostics["alpha"], y, rbf_gram(X, 0.5))
        gaps.append(abs(own - best))
    a_ok = max(gaps) <= 1e-3

    # (b) KKT on every model trained here, on its own data
    kkt = []
    X, y7 = _blobs(100)
    full = train_multiclass(X, y7, TrainConfig(gamma=0.1))
    kkt.append(_multiclass_kkt(full, X, y7))
    Xb, yb7 = _blobs(20, k=2, spread=1.5, seed=3)
    yb = np.where(yb7 == 0, 1.0, -1.0)
    for C in (0.1, 1.0, 10.0):
        bm = train_binary(Xb, yb, TrainConfig(C=C, gamma=0.2))
        f = rbf_gram(Xb, 0.2) @ (bm.diagnostics["alpha"] * yb) + bm.bias
        kkt.append((_kkt_gap(bm.diagnostics["alpha"], yb, f, C), abs(float(bm.diagnostics["alpha"] @ yb))))
    cfg = RunConfig(frames_per_session=6)
    sessions = [e.session for e in gen_dataset(1, 2, seed=11)]
    rulesets = load_rulesets()
    for pw in pathways(cfg).values():
        trained = train_pathway(sessions, pw, cfg, rulesets, cross_validate=False)
        rows = training_rows(sessions, pw, cfg, rulesets)
        for mod, model in trained.models.items():
            kkt.append(_multiclass_kkt(model, *rows[mod]))
    b_ok = all(g <= KKT_TOL and r <= 1e-9 for g, r in kkt)

    # (c) separable, (d) shuffled
    tcfg = TrainConfig(gamma=0.1, k=10, seed=0)
    sep = kfold_cv(X, y7, tcfg).mean_accuracy
    shuf = kfold_cv(X, np.random.default_rng(0).permutation(y7), tcfg).mean_accuracy
    c_ok = len(X) == 700 and sep >= 0.95
    d_ok = abs(shuf - 1 / 7) <= 0.1
    elapsed = time.perf_counter() - t0
    ok = a_ok and b_ok and c_ok and d_ok and elapsed < 120
    acceptance_line(5, ok, f"(a) max |dual - QP| {max(gaps):.1e}; (b) {len(kkt)} models, "
                           f"max KKT gap {max(g for g, _ in kkt):.1e}; (c) CV {sep:.3f}; "
                           f"(d) shuffled {shuf:.3f}; {elapsed:.1f}s")
    assert ok


# -- 6: rule engine ----------------------------------------------------------------------

def test_criterion_06_rule_engine(acceptance_line):
    t0 = time.perf_counter()
    rules = {r.rule_id: r for r in stock_anger_rules()}
    agree = total = 0
    fired = {}
    for rid, rule in rules.items():
        rng = np.random.default_rng(6000 + rid)
        for i in range(200):
            width = [640, 1280, 320][i % 3]
            window, oracle = fuzz_window(rng, rid, width)
            got = evaluate_rule(rule, window)
            if rule.kind is not RuleKind.INSTANTANEOUS and len(oracle[rule.modality.value]) < 2:
                want = None
            else:
                want = rule_oracle(rid, oracle, width / 640)
            total += 1
            agree += got == want
            fired[rid] = fired.get(rid, 0) + bool(got)

    hips = [s for s in load_scripts() if s.name == "anger_hands_on_hips"][0]
    frames_ok = frames_n = 0
    for seed in range(3):
        s = gen_session(hips, seed, duration_ms=15000)
        for f in s.streams[Modality.HAND]:
            frames_n += 1
            frames_ok += evaluate_rule(rules[1], RuleWindow({Modality.HAND: [f]}, s.frame_width)) is True
    elapsed = time.perf_counter() - t0
    ok = agree == total == 2000 and all(fired[r] > 0 for r in rules) and frames_ok == frames_n and elapsed < 30
    acceptance_line(6, ok, f"oracle agreement {agree}/{total} (every rule fires somewhere); "
                           f"hands-on-hips Rule 1 on {frames_ok}/{frames_n} frames, {elapsed:.1f}s")
    assert ok


# -- 7: lexicon gate -------------------------------------------------------------------

def test_criterion_07_lexicon_gate(acceptance_line):
    t0 = time.perf_counter()
    lex = load_lexicon()
    punch = classify_utterance(lex, SpeechEvent(0, "punch", 0.8))
    weak = classify_utterance(lex, SpeechEvent(0, "kill", 0.30))
    gate_ok = (punch is not None and punch.emotion == EmotionClass.ANGER and punch.source is Source.LEXICON
               and weak is None)
    rng = np.random.default_rng(7)
    case_ok = 0
    words = sorted(lex.words)
    for w in words:
        variants = [w.upper(), w.lower(), w.title(),
                    "".join(c.upper() if rng.random() < 0.5 else c.lower() for c in w)]
        case_ok += all(classify_utterance(lex, SpeechEvent(0, v, 0.9)) is not None for v in variants)
    elapsed = time.perf_counter() - t0
    ok = gate_ok and case_ok == len(words) and elapsed < 1.0
    acceptance_line(7, ok, f"punch/0.8 votes={punch is not None}, kill/0.30 votes={weak is not None}; "
                           f"case-insensitive {case_ok}/{len(words)} words, {elapsed:.3f}s")
    assert ok


# -- 8: end to end ---------------------------------------------------------------------

@pytest.mark.slow
def test_criterion_08_end_to_end(acceptance_line, tmp_path, capsys):
    t0 = time.perf_counter()
    codes = [main(["--out", str(tmp_path), "--seed", "0", "gen"]),
             main(["--out", str(tmp_path), "--seed", "0", "train"]),
             main(["--out", str(tmp_path), "--seed", "0", "eval"])]
    cli_secs = time.perf_counter() - t0
    capsys.readouterr()
    n_sessions = len(json.loads((tmp_path / "data" / "manifest.json").read_text())["sessions"])
    results = json.loads((tmp_path / "eval" / "results.json").read_text())
    cli_f = {}
    for name, rows in results["pathways"].items():
        m = metrics([r["predicted"] for r in rows], [r["label"] for r in rows])
        cli_f[name] = m.of(EmotionClass.ANGER).f_measure

    sweep = [compare_pathways(seed) for seed in range(10)]
    wins = sum(c.rules_not_worse for c in sweep)
    fs = ", ".join(f"{c.anger_f(GEOMETRIC):.2f}/{c.anger_f(RULES):.2f}" for c in sweep)
    ok = codes == [EXIT_OK] * 3 and n_sessions == 105 and cli_secs < 300 and wins >= 9
    acceptance_line(8, ok, f"CLI gen/train/eval on {n_sessions} sessions in {cli_secs:.0f}s "
                           f"(anger F geo {cli_f.get(GEOMETRIC, 0):.2f}, rules {cli_f.get(RULES, 0):.2f}); "
                           f"rules >= geometric in {wins}/10 seeds [geo/rules: {fs}]")
    assert ok


# -- 9: metrics ------------------------------------------------------------------------

def test_criterion_09_metric_engine(acceptance_line):
    F = f_measure(0.744, 0.8)
    f_ok = round(F, 3) == 0.771 and abs(F - 0.77) <= 0.01
    rng = np.random.default_rng(9)
    rows_ok = micro_ok = True
    for i in range(500):
        n = int(rng.integers(1, 60))
        labels = rng.integers(0, 7 if i % 2 else 4, n)  # half the cases leave classes without support
        preds = rng.integers(0, 7, n)
        m = metrics(preds, labels)
        sums = m.confusion.rates.sum(axis=1)
        rows_ok &= bool(np.all(np.abs(sums[~m.confusion.zero_support] - 1) <= 1e-9))
        rows_ok &= bool(np.all(sums[m.confusion.zero_support] == 0))
        micro_ok &= m.micro_recall == m.accuracy
    cm = np.zeros((7, 7), int)
    cm[0, 0], cm[0, 6], cm[6, 0] = 8, 2, 1  # recall 0.8, precision 8/9
    anger = metrics_from_confusion(ConfusionMatrix(cm)).of(EmotionClass.ANGER)
    table_ok = anger.recall == 0.8 and anger.f_measure == f_measure(8 / 9, 0.8)
    ok = f_ok and rows_ok and micro_ok and table_ok
    acceptance_line(9, ok, f"F(0.744, 0.8) = {F:.4f}; normalized rows sum to 1: {rows_ok}; "
                           f"micro recall == accuracy: {micro_ok}")
    assert ok


# -- 10: determinism -----------------------------------------------------------------

def _tree(root: Path) -> dict[str, bytes]:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_criterion_10_determinism(acceptance_line, tmp_path, capsys):
    trees, outputs = [], []
    for run in ("a", "b"):
        out = tmp_path / run
        cmds = [["gen", "--actors", "1", "--acts", "2"], ["train", "--folds", "2"], ["eval"],
                ["report", "--format", "csv", "--file", str(out / "eval" / "copy.csv")], ["report"]]
        codes = [main(["--out", str(out), "--seed", "4", *c]) for c in cmds]
        session = sorted((out / "data").glob("*anger*.jsonl"))[0]
        codes.append(main(["--out", str(out), "--seed", "4", "run", str(session)]))
        codes.append(main(["--out", str(out), "--seed", "4", "run", "--pathway", "geometric", str(session)]))
        outputs.append(capsys.readouterr().out.replace(str(out), "<out>"))
        trees.append((codes, _tree(out)))
    (codes_a, a), (codes_b, b) = trees
    differing = sorted(k for k in a.keys() | b.keys() if a.get(k) != b.get(k))
    kinds = sorted({k.split("/")[0] for k in a})
    ok = codes_a == codes_b == [EXIT_OK] * 7 and not differing and outputs[0] == outputs[1]
    acceptance_line(10, ok, f"{len(a)} files across {kinds} byte-identical over two runs; "
                            f"differing: {differing[:3] or 'none'}; stdout identical: {outputs[0] == outputs[1]}")
    assert ok
