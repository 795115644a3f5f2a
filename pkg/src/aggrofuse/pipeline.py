"""End-to-end wiring: training rows, per-modality models and session replay.

Two pathways share the same code. The geometric pathway classifies location
plus temporal features only. The rule pathway appends the smoothed rule
confidences to every feature row and, at each visual frame, casts an extra
anger vote for a modality whose own rules reach the fusion threshold.

Replay merges every visual stream and the speech events into one timestamp
ordered sequence. From the second frame of a stream on, each frame yields an
SVM outcome that triggers a fusion run; a speech event triggers a run only when
the word is in the anger lexicon.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .config import RunConfig
from .features import ModalityConfig, combined_matrix, default_config
from .fusion import FrameDecision, FusionState, ModalityOutcome, SessionDecision, Source, session_aggregate
from .lexicon import Lexicon, classify_utterance
from .registry import VISUAL_MODALITIES, EmotionClass, Modality
from .rules import RuleSet, confidence_trace, vote_from_confidence
from .session import Session
from .svm import MulticlassModel, kfold_cv, train_multiclass

GEOMETRIC = "geometric"
RULES = "rules"
_EVENT_RANK = {m: i for i, m in enumerate(Modality)}


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class Pathway:
    name: str
    rule_features: bool
    rule_votes: bool


def pathways(cfg: RunConfig) -> dict[str, Pathway]:
    return {GEOMETRIC: Pathway(GEOMETRIC, False, False),
            RULES: Pathway(RULES, cfg.use_rules_as_features, cfg.rule_vote_enabled)}


def _smoothed_at(ruleset: RuleSet, session: Session, ts: np.ndarray, cfg: RunConfig) -> np.ndarray:
    tr = confidence_trace(ruleset, session, cfg.window, cfg.smoothing)
    if len(tr.timestamps) == 0:
        return np.zeros(len(ts))
    pos = np.searchsorted(tr.timestamps, ts, side="right") - 1
    sm = tr.smoothed
    return np.where(pos >= 0, sm[np.maximum(pos, 0)], 0.0)


class SessionInputs:
    """Per-session feature matrices, cached per modality and pathway."""

    def __init__(self, session: Session, rulesets: Mapping[EmotionClass, RuleSet], cfg: RunConfig):
        self.session = session
        self.rulesets = rulesets
        self.cfg = cfg
        self._rule_cols: np.ndarray | None = None
        self._rule_ts: np.ndarray | None = None

    def _rule_columns(self) -> tuple[np.ndarray, np.ndarray]:
        """Smoothed confidence of every emotion ruleset at every visual tick."""
        if self._rule_cols is None:
            ticks = np.unique(np.concatenate(
                [self.session.stream_array(m)[0] for m in VISUAL_MODALITIES] + [np.zeros(0, np.int64)]))
            cols = np.zeros((len(ticks), len(EmotionClass)))
            for emotion, rs in self.rulesets.items():
                cols[:, int(emotion)] = _smoothed_at(rs, self.session, ticks, self.cfg)
            self._rule_ts, self._rule_cols = ticks, cols
        return self._rule_ts, self._rule_cols

    def matrix(self, modality: Modality, mcfg: ModalityConfig, pathway: Pathway) -> tuple[np.ndarray, np.ndarray]:
        """(timestamps, rows) with one row per frame from the second on."""
        ts, xy = self.session.stream_array(modality)
        X = combined_matrix(ts, xy, mcfg)
        ts = ts[1:]
        if pathway.rule_features:
            rts, cols = self._rule_columns()
            pos = np.searchsorted(rts, ts)
            X = np.concatenate([X, cols[pos]], axis=1)
        return ts, X

    def rule_votes(self, modality: Modality, ts: np.ndarray) -> np.ndarray | None:
        """Smoothed anger confidence of the modality's own rules, or None without rules."""
        anger = self.rulesets.get(EmotionClass.ANGER)
        if anger is None:
            return None
        own = anger.for_modality(modality)
        if not len(own):
            return None
        return _smoothed_at(own, self.session, ts, self.cfg)


def modality_configs(cfg: RunConfig) -> dict[Modality, ModalityConfig]:
    return {m: default_config(m, cfg.gamma(m)) for m in VISUAL_MODALITIES}


def sample_rows(n: int, k: int) -> np.ndarray:
    """k evenly spaced row indices out of n (all of them when n <= k)."""
    if n <= k:
        return np.arange(n)
    return np.unique(np.round(np.linspace(0, n - 1, k)).astype(int))


def training_rows(sessions: Iterable[Session], pathway: Pathway, cfg: RunConfig,
                  rulesets: Mapping[EmotionClass, RuleSet]) -> dict[Modality, tuple[np.ndarray, np.ndarray]]:
    """Per modality (X, y) with frames_per_session evenly spaced rows per session."""
    mcfgs = modality_configs(cfg)
    parts: dict[Modality, tuple[list, list]] = {m: ([], []) for m in VISUAL_MODALITIES}
    for s in sessions:
        inputs = SessionInputs(s, rulesets, cfg)
        for m in VISUAL_MODALITIES:
            _, X = inputs.matrix(m, mcfgs[m], pathway)
            if len(X) == 0:
                continue
            idx = sample_rows(len(X), cfg.frames_per_session)
            parts[m][0].append(X[idx])
            parts[m][1].append(np.full(len(idx), int(s.label)))
    out = {}
    for m, (xs, ys) in parts.items():
        if xs:
            out[m] = (np.concatenate(xs), np.concatenate(ys))
    return out


@dataclass(frozen=True)
class TrainedPathway:
    pathway: Pathway
    models: dict[Modality, MulticlassModel]
    cv_accuracy: dict[Modality, float]
    cv_confusion: dict[Modality, np.ndarray]


def train_pathway(sessions: list[Session], pathway: Pathway, cfg: RunConfig,
                  rulesets: Mapping[EmotionClass, RuleSet], cross_validate: bool = True) -> TrainedPathway:
    rows = training_rows(sessions, pathway, cfg, rulesets)
    if not rows:
        raise PipelineError("no visual frames to train on")
    models, acc, conf = {}, {}, {}
    for m, (X, y) in rows.items():
        tcfg = cfg.train_config(m)
        models[m] = train_multiclass(X, y, tcfg)
        models[m].meta.update({"modality": m.value, "pathway": pathway.name, "rows": int(len(y))})
        if cross_validate:
            cv = kfold_cv(X, y, tcfg)
            acc[m], conf[m] = cv.mean_accuracy, cv.total_confusion
    return TrainedPathway(pathway, models, acc, conf)


@dataclass(frozen=True)
class SessionResult:
    session_id: str
    label: EmotionClass
    predicted: EmotionClass
    summary: SessionDecision
    decisions: tuple[FrameDecision, ...]


def session_class(decisions: Iterable[FrameDecision], summary: SessionDecision) -> EmotionClass:
    """Anger when the session verdict says so, else the most frequent other frame winner."""
    if summary.verdict:
        return EmotionClass.ANGER
    counts = np.zeros(len(EmotionClass), dtype=np.int64)
    for d in decisions:
        w = d.winner
        if w is not None and w != EmotionClass.ANGER:
            counts[int(w)] += 1
    if counts.sum() == 0:
        return EmotionClass.NEUTRAL
    return EmotionClass(int(np.argmax(counts)))


def replay(session: Session, models: Mapping[Modality, MulticlassModel], pathway: Pathway,
           cfg: RunConfig, rulesets: Mapping[EmotionClass, RuleSet], lexicon: Lexicon) -> FusionState:
    """Feed the session's events in timestamp order through classifiers and fusion."""
    inputs = SessionInputs(session, rulesets, cfg)
    mcfgs = modality_configs(cfg)
    events: list[tuple[int, int, int, object]] = []
    for m, model in models.items():
        ts, X = inputs.matrix(m, mcfgs[m], pathway)
        if len(ts) == 0:
            continue
        if X.shape[1] != model.dim:
            raise PipelineError(f"{m.value} model expects {model.dim} features, session gives {X.shape[1]}")
        pred, conf = model.predict_batch(X)
        votes = inputs.rule_votes(m, ts) if pathway.rule_votes else None
        for i, t in enumerate(ts):
            events.append((int(t), _EVENT_RANK[m], i, (m, int(pred[i]), float(conf[i]),
                                                       None if votes is None else float(votes[i]))))
    for i, ev in enumerate(session.speech):
        events.append((ev.timestamp, _EVENT_RANK[Modality.SPEECH], i, ev))
    events.sort(key=lambda e: e[:3])

    state = FusionState(cfg.fusion_config())
    for t, _, _, payload in events:
        if isinstance(payload, tuple):
            m, cls, conf, rule_conf = payload
            if rule_conf is not None:
                vote = vote_from_confidence(rule_conf, cfg.threshold, m, t)
                if vote is None:
                    state.retract(m, Source.RULE)
                else:
                    state.store(vote)
            state.submit(ModalityOutcome(m, EmotionClass(cls), conf, t, Source.SVM))
        else:
            outcome = classify_utterance(lexicon, payload)
            if outcome is not None:
                state.submit(outcome)
    return state


def run_session(session: Session, models: Mapping[Modality, MulticlassModel], pathway: Pathway,
                cfg: RunConfig, rulesets: Mapping[EmotionClass, RuleSet], lexicon: Lexicon) -> SessionResult:
    state = replay(session, models, pathway, cfg, rulesets, lexicon)
    summary = session_aggregate(state.decisions, state.cfg)
    return SessionResult(session.session_id, session.label, session_class(state.decisions, summary),
                         summary, tuple(state.decisions))
