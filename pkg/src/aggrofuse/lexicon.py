"""Dictionary lookup of anger words in recognised speech.

Two lexicon file formats are accepted:

* plain text, one word or phrase per line, ``#`` starts a comment;
* XML, ``<lexicon emotion="anger" gate="0.3"><word>Beat</word>...</lexicon>``.

Entries are lower-cased and whitespace-normalised, so ``"Ticked  off"`` is stored
as the single token ``"ticked off"``.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .fusion import ModalityOutcome, Source
from .registry import EmotionClass, Modality
from .session import SpeechEvent

DEFAULT_GATE = 0.3


class LexiconError(ValueError):
    pass


def normalize(word: str) -> str:
    return " ".join(word.lower().split())


@dataclass(frozen=True)
class Lexicon:
    words: frozenset[str]
    gate: float = DEFAULT_GATE

    def __post_init__(self):
        if not self.words:
            raise LexiconError("lexicon is empty")
        if not 0.0 <= self.gate <= 1.0:
            raise LexiconError(f"gate {self.gate} outside [0, 1]")
        bad = [w for w in self.words if w != normalize(w) or not w]
        if bad:
            raise LexiconError(f"entries must be lower-case and trimmed: {sorted(bad)[:3]}")

    @classmethod
    def from_words(cls, words, gate: float = DEFAULT_GATE) -> "Lexicon":
        return cls(frozenset(w for w in (normalize(x) for x in words) if w), gate)

    def __contains__(self, word: str) -> bool:
        return normalize(word) in self.words

    def __len__(self) -> int:
        return len(self.words)


def parse_lexicon(text: str, gate: float | None = None) -> Lexicon:
    stripped = text.lstrip("﻿").strip()
    file_gate = None
    if stripped.startswith("<"):
        try:
            root = ET.fromstring(stripped)
        except ET.ParseError as exc:
            raise LexiconError(f"malformed lexicon XML: {exc}") from None
        words = [(el.text or "") for el in root.iter("word")]
        if "gate" in root.attrib:
            try:
                file_gate = float(root.attrib["gate"])
            except ValueError:
                raise LexiconError(f"bad gate attribute {root.attrib['gate']!r}") from None
    else:
        words = [line.split("#", 1)[0] for line in stripped.splitlines()]
    words = [w for w in words if w.strip()]
    if not words:
        raise LexiconError("lexicon is empty")
    g = gate if gate is not None else (file_gate if file_gate is not None else DEFAULT_GATE)
    return Lexicon.from_words(words, g)


def load_lexicon(path=None, gate: float | None = None) -> Lexicon:
    """Load a lexicon file, or the shipped anger lexicon when ``path`` is None."""
    if path is None:
        text = resources.files("aggrofuse.data").joinpath("anger_lexicon.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_lexicon(text, gate)


def classify_utterance(lexicon: Lexicon, event: SpeechEvent) -> ModalityOutcome | None:
    """Anger outcome when the word is in the lexicon and its ASR confidence beats the gate."""
    if normalize(event.word) in lexicon.words and event.asr_confidence > lexicon.gate:
        return ModalityOutcome(Modality.SPEECH, EmotionClass.ANGER, float(event.asr_confidence),
                               event.timestamp, Source.LEXICON)
    return None
