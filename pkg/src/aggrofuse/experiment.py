"""In-process pathway comparison on a freshly generated synthetic dataset.

Does the same work as ``gen``, ``train`` and ``eval`` on the command line, but
keeps sessions in memory and skips cross-validation. This makes multi-seed
sweeps cheap.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .config import RunConfig
from .evaluation import Metrics, metrics, split_dataset
from .lexicon import load_lexicon
from .pipeline import GEOMETRIC, RULES, pathways, run_session, train_pathway
from .registry import EmotionClass
from .rules import load_rulesets
from .synth import gen_dataset


@dataclass(frozen=True)
class Comparison:
    seed: int
    metrics: dict[str, Metrics]

    def anger_f(self, pathway: str) -> float:
        return self.metrics[pathway].of(EmotionClass.ANGER).f_measure

    @property
    def rules_not_worse(self) -> bool:
        return self.anger_f(RULES) >= self.anger_f(GEOMETRIC)


def compare_pathways(seed: int, cfg: RunConfig | None = None) -> Comparison:
    """Generate, split, train both pathways and evaluate them on the held-out sessions."""
    cfg = (cfg or RunConfig()).with_overrides(seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        entries = gen_dataset(cfg.actors, cfg.acts, cfg.seed, cfg.frame_rate)
    sessions = [e.session for e in entries]
    train, test = split_dataset(sessions, cfg.split, cfg.seed)
    rulesets = load_rulesets(cfg.ruleset)
    lexicon = load_lexicon(cfg.lexicon, cfg.lexicon_gate)
    out = {}
    for name, pw in pathways(cfg).items():
        models = train_pathway(train, pw, cfg, rulesets, cross_validate=False).models
        results = [run_session(s, models, pw, cfg, rulesets, lexicon) for s in test]
        out[name] = metrics([int(r.predicted) for r in results], [int(r.label) for r in results])
    return Comparison(seed, out)
