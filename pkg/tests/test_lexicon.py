import pytest
from hypothesis import given, strategies as st

from aggrofuse.fusion import Source
from aggrofuse.lexicon import Lexicon, LexiconError, classify_utterance, load_lexicon, normalize, parse_lexicon
from aggrofuse.registry import EmotionClass, Modality
from aggrofuse.session import SpeechEvent
from aggrofuse.synth import load_scripts

STOCK = load_lexicon()


def test_stock_lexicon_contents():
    assert len(STOCK) == 80  # 82 printed entries, two repeated
    for w in ("punch", "kill", "ticked off", "ill-tempered", "fuming", "resentful"):
        assert w in STOCK
    assert STOCK.gate == 0.3


def test_xml_and_text_forms_agree(tmp_path):
    from importlib import resources
    xml = resources.files("aggrofuse.data").joinpath("anger_lexicon.xml").read_text("utf-8")
    assert parse_lexicon(xml).words == STOCK.words


def test_gate_is_strict():
    assert classify_utterance(STOCK, SpeechEvent(10, "punch", 0.8)).emotion == EmotionClass.ANGER
    assert classify_utterance(STOCK, SpeechEvent(10, "kill", 0.30)) is None
    assert classify_utterance(STOCK, SpeechEvent(10, "kill", 0.3000001)) is not None
    assert classify_utterance(STOCK, SpeechEvent(10, "hello", 0.99)) is None


def test_outcome_fields():
    o = classify_utterance(STOCK, SpeechEvent(1234, "Ticked  Off", 0.7))
    assert (o.modality, o.source, o.timestamp, o.confidence) == (Modality.SPEECH, Source.LEXICON, 1234, 0.7)


@given(st.sampled_from(sorted(STOCK.words)), st.data())
def test_case_insensitive_over_stock_lexicon(word, data):
    flips = data.draw(st.lists(st.booleans(), min_size=len(word), max_size=len(word)))
    variant = "".join(c.upper() if f else c for c, f in zip(word, flips))
    variant = data.draw(st.sampled_from(["", " ", "\t"])) + variant.replace(" ", "  ")
    assert classify_utterance(STOCK, SpeechEvent(0, variant, 0.9)) is not None


def test_every_stock_word_in_all_caps():
    for w in STOCK.words:
        assert w.upper() in STOCK


def test_gate_override_and_errors():
    lex = parse_lexicon("Rage\n# comment\n", gate=0.5)
    assert lex.words == frozenset({"rage"}) and lex.gate == 0.5
    assert classify_utterance(lex, SpeechEvent(0, "rage", 0.5)) is None
    with pytest.raises(LexiconError):
        parse_lexicon("# nothing here\n")
    with pytest.raises(LexiconError):
        parse_lexicon("<lexicon><word>x</word")
    with pytest.raises(LexiconError):
        Lexicon(frozenset({"Upper"}))
    assert normalize("  Ticked \t Off ") == "ticked off"


def test_scripted_anger_words_are_in_the_lexicon():
    for s in load_scripts():
        if s.label == EmotionClass.ANGER:
            assert all(w.word in STOCK for w in s.words), s.name
