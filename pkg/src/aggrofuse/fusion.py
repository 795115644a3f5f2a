"""Event-driven decision-level fusion by majority vote.

Each modality raises an outcome event (class + confidence) whenever it finishes
a recognition. The fusion state keeps the latest outcome per voter slot and
re-runs the vote on every event. Only outcomes with confidence >= T that are no
older than the staleness window take part; each slot casts one vote for its
class. The frame is angry when Anger has strictly more votes than any other
class. The session confidence is the fraction of fusion runs that came out
angry.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .registry import EmotionClass, Modality

DEFAULT_THRESHOLD = 0.218
DEFAULT_STALENESS_MS = 500
DEFAULT_SESSION_THRESHOLD = 0.5

N_CLASSES = len(EmotionClass)


class FusionError(RuntimeError):
    pass


class Source(str, Enum):
    SVM = "svm"
    RULE = "rule"
    LEXICON = "lexicon"


@dataclass(frozen=True)
class ModalityOutcome:
    modality: Modality
    emotion: EmotionClass
    confidence: float
    timestamp: int
    source: Source = Source.SVM

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class FusionConfig:
    threshold: float = DEFAULT_THRESHOLD
    staleness_ms: int = DEFAULT_STALENESS_MS
    session_threshold: float = DEFAULT_SESSION_THRESHOLD
    # one voter per modality instead of one per (modality, source)
    collapse_sources: bool = False

    def __post_init__(self):
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        if not self.staleness_ms > 0:
            raise ValueError("staleness must be positive")
        if not 0.0 <= self.session_threshold <= 1.0:
            raise ValueError("session threshold must lie in [0, 1]")

    def slot(self, outcome: ModalityOutcome) -> str:
        if self.collapse_sources:
            return outcome.modality.value
        return f"{outcome.modality.value}/{outcome.source.value}"


@dataclass(frozen=True)
class FrameDecision:
    timestamp: int
    anger: bool
    votes: tuple[int, ...]
    participants: tuple[str, ...]

    @property
    def winner(self) -> EmotionClass | None:
        """Class with a strict plurality of votes, if any."""
        best = max(self.votes)
        if best == 0 or self.votes.count(best) > 1:
            return None
        return EmotionClass(self.votes.index(best))

    def to_record(self) -> dict:
        return {"t_ms": self.timestamp,
                "votes": {e.name.lower(): self.votes[e] for e in EmotionClass},
                "participants": list(self.participants), "anger": self.anger}


@dataclass(frozen=True)
class SessionDecision:
    anger_detections: int
    fusion_runs: int
    confidence: float
    verdict: bool

    def to_record(self) -> dict:
        return {"detections": self.anger_detections, "runs": self.fusion_runs,
                "confidence": self.confidence, "verdict": self.verdict}


def counted_outcomes(outcomes: Iterable[ModalityOutcome], cfg: FusionConfig,
                     now: int | None = None) -> dict[str, ModalityOutcome]:
    """Outcomes that take part in a vote, keyed by voter slot."""
    outcomes = list(outcomes)
    if now is None:
        now = max((o.timestamp for o in outcomes), default=0)
    latest: dict[str, ModalityOutcome] = {}
    for o in outcomes:
        if o.confidence < cfg.threshold or now - o.timestamp > cfg.staleness_ms:
            continue
        key = f"{o.modality.value}/{o.source.value}"
        if key not in latest or o.timestamp >= latest[key].timestamp:
            latest[key] = o
    if not cfg.collapse_sources:
        return latest
    # collapsed: a modality says Anger if any of its sources does
    merged: dict[str, ModalityOutcome] = {}
    for key in sorted(latest):
        o = latest[key]
        slot = cfg.slot(o)
        cur = merged.get(slot)
        if cur is None:
            merged[slot] = o
        elif (o.emotion == EmotionClass.ANGER) != (cur.emotion == EmotionClass.ANGER):
            if o.emotion == EmotionClass.ANGER:
                merged[slot] = o
        elif (o.timestamp, o.confidence) > (cur.timestamp, cur.confidence):
            merged[slot] = o
    return merged


def fuse_instant(outcomes: Iterable[ModalityOutcome], cfg: FusionConfig | None = None,
                 now: int | None = None) -> FrameDecision:
    """One majority vote over the available outcomes."""
    cfg = cfg or FusionConfig()
    outcomes = list(outcomes)
    if now is None:
        now = max((o.timestamp for o in outcomes), default=0)
    voters = counted_outcomes(outcomes, cfg, now)
    votes = [0] * N_CLASSES
    for o in voters.values():
        votes[int(o.emotion)] += 1
    anger = votes[0] > 0 and all(votes[0] > v for v in votes[1:])
    return FrameDecision(now, anger, tuple(votes), tuple(sorted(voters)))


class FusionState:
    """Latest outcome per voter slot plus the log of fusion runs for one session."""

    def __init__(self, cfg: FusionConfig | None = None):
        self.cfg = cfg or FusionConfig()
        self.outcomes: dict[tuple[Modality, Source], ModalityOutcome] = {}
        self.decisions: list[FrameDecision] = []

    def store(self, outcome: ModalityOutcome) -> None:
        """Record an outcome without running the vote."""
        self.outcomes[(outcome.modality, outcome.source)] = outcome

    def retract(self, modality: Modality, source: Source) -> None:
        self.outcomes.pop((modality, source), None)

    def run(self, now: int) -> FrameDecision:
        decision = fuse_instant(self.outcomes.values(), self.cfg, now)
        self.decisions.append(decision)
        return decision

    def submit(self, outcome: ModalityOutcome) -> FrameDecision:
        """Store the outcome (replacing that slot's previous one) and fuse."""
        self.store(outcome)
        return self.run(outcome.timestamp)

    def summary(self) -> SessionDecision:
        return session_aggregate(self.decisions, self.cfg)


def submit_outcome(state: FusionState, outcome: ModalityOutcome) -> FrameDecision:
    return state.submit(outcome)


def session_aggregate(decisions: Iterable[FrameDecision],
                      cfg: FusionConfig | None = None) -> SessionDecision:
    cfg = cfg or FusionConfig()
    decisions = list(decisions)
    if not decisions:
        raise FusionError("no fusion activity")
    detections = sum(1 for d in decisions if d.anger)
    confidence = detections / len(decisions)
    return SessionDecision(detections, len(decisions), confidence, confidence >= cfg.session_threshold)


def decision_log(decisions: Iterable[FrameDecision], summary: SessionDecision | None = None) -> str:
    """Line-delimited JSON: one record per fusion run, then the session summary."""
    lines = [json.dumps(d.to_record(), separators=(",", ":")) for d in decisions]
    if summary is not None:
        lines.append(json.dumps({"summary": summary.to_record()}, separators=(",", ":")))
    return "".join(line + "\n" for line in lines)
