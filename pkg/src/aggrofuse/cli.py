"""Command line: gen, train, run, eval and report.

Layout under the run directory (``--out``)::

    data/<session>.jsonl, data/manifest.json        gen
    models/split.json, models/manifest.json         train
    models/<pathway>/<modality>.json, models/cv_report.txt
    runs/<session>.<pathway>.jsonl                  run
    eval/report.txt, eval/report.csv, eval/results.json, eval/manifest.json

Exit codes: 0 success, 1 usage error, 2 data error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig
from .evaluation import ConfusionMatrix, EvaluationError, Metrics, metrics, metrics_from_confusion, report, split_dataset
from .fusion import FusionError, decision_log
from .io import atomic_write_bytes, atomic_write_text, json_text, sha256_hex
from .lexicon import LexiconError, load_lexicon
from .pipeline import GEOMETRIC, RULES, PipelineError, pathways, run_session, train_pathway
from .registry import VISUAL_MODALITIES, EmotionClass, Modality
from .rules import RuleConfigError, load_rulesets
from .session import SessionFormatError, parse_session, serialize_session
from .svm import MulticlassModel, SVMError
from .synth import ScriptError, gen_dataset, manifest_entry

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# -- paths and loading ------------------------------------------------------------

class Paths:
    def __init__(self, cfg: RunConfig):
        self.run = Path(cfg.output)
        self.data = self._under(cfg.data_dir)
        self.models = self._under(cfg.model_dir)
        self.runs = self.run / "runs"
        self.eval = self.run / "eval"

    def _under(self, p: str) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.run / p


def _load_resources(cfg: RunConfig):
    for p in (cfg.ruleset, cfg.lexicon):
        if p is not None and not Path(p).is_file():
            raise DataError(f"file not found: {p}")
    return load_rulesets(cfg.ruleset), load_lexicon(cfg.lexicon, cfg.lexicon_gate)


def _read_manifest(paths: Paths) -> dict:
    mpath = paths.data / "manifest.json"
    if not paths.data.is_dir():
        raise DataError(f"data directory not found: {paths.data}")
    if not mpath.is_file():
        raise DataError(f"no manifest in {paths.data}")
    try:
        return json.loads(mpath.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"unreadable manifest: {exc}") from None


def _load_session_file(path: Path, expected_hash: str | None = None):
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None
    if expected_hash is not None and sha256_hex(data) != expected_hash:
        raise DataError(f"{path.name}: content does not match the manifest hash")
    return parse_session(data)


def _load_sessions(paths: Paths, ids: list[str] | None = None) -> list:
    manifest = _read_manifest(paths)
    entries = manifest["sessions"]
    if ids is not None:
        by_id = {e["id"]: e for e in entries}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise DataError(f"sessions missing from the manifest: {missing[:3]}")
        entries = [by_id[i] for i in ids]
    return [_load_session_file(paths.data / e["file"], e.get("hash")) for e in entries]


def _model_path(paths: Paths, pathway: str, modality: Modality) -> Path:
    return paths.models / pathway / f"{modality.value}.json"


def _load_models(paths: Paths, pathway: str) -> dict[Modality, MulticlassModel]:
    models = {}
    for m in VISUAL_MODALITIES:
        p = _model_path(paths, pathway, m)
        if p.is_file():
            try:
                models[m] = MulticlassModel.loads(p.read_text("utf-8"))
            except (KeyError, ValueError) as exc:
                raise DataError(f"unreadable model {p}: {exc}") from None
    return models


def _config_echo(cfg: RunConfig, **extra) -> dict:
    # the run directory says where results went, not how they were made
    d = cfg.to_dict()
    d.pop("output")
    return {**d, **extra}


# -- commands ---------------------------------------------------------------------

def cmd_gen(args, cfg: RunConfig) -> int:
    paths = Paths(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        entries = gen_dataset(cfg.actors, cfg.acts, cfg.seed, cfg.frame_rate)
    paths.data.mkdir(parents=True, exist_ok=True)
    records = []
    for e in entries:
        data = serialize_session(e.session)
        atomic_write_bytes(paths.data / f"{e.session.session_id}.jsonl", data)
        records.append(manifest_entry(e, data))
    manifest = {"seed": cfg.seed, "actors": cfg.actors, "acts_per_class": cfg.acts,
                "frame_rate": cfg.frame_rate, "sessions": records}
    atomic_write_text(paths.data / "manifest.json", json_text(manifest))
    print(f"wrote {len(records)} sessions to {paths.data}")
    return EXIT_OK


def _cv_metrics(confusion) -> Metrics:
    return metrics_from_confusion(ConfusionMatrix(confusion))


def cmd_train(args, cfg: RunConfig) -> int:
    paths = Paths(cfg)
    manifest = _read_manifest(paths)
    entries = manifest["sessions"]
    try:
        train_e, test_e = split_dataset(entries, cfg.split, cfg.seed, label=lambda e: e["label"])
    except EvaluationError as exc:
        raise DataError(str(exc)) from None
    train = _load_sessions(paths, [e["id"] for e in train_e])
    rulesets, _ = _load_resources(cfg)
    chosen = [GEOMETRIC, RULES] if args.pathway == "both" else [args.pathway]

    paths.models.mkdir(parents=True, exist_ok=True)
    atomic_write_text(paths.models / "split.json", json_text(
        {"seed": cfg.seed, "fraction": cfg.split,
         "train": [e["id"] for e in train_e], "test": [e["id"] for e in test_e]}))
    files = {}
    cv_results: dict[str, Metrics] = {}
    for name in chosen:
        pw = pathways(cfg)[name]
        trained = train_pathway(train, pw, cfg, rulesets)
        for m, model in trained.models.items():
            p = _model_path(paths, name, m)
            p.parent.mkdir(parents=True, exist_ok=True)
            text = model.dumps()
            atomic_write_text(p, text)
            files[str(p.relative_to(paths.models))] = sha256_hex(text.encode())
            cv_results[f"{name}/{m.value}"] = _cv_metrics(trained.cv_confusion[m])
            print(f"{name:9s} {m.value:5s} {cfg.folds}-fold CV accuracy {trained.cv_accuracy[m]:.4f}")
    echo = _config_echo(cfg, pathways=chosen)
    atomic_write_text(paths.models / "cv_report.txt", report(cv_results, "text", echo))
    atomic_write_text(paths.models / "manifest.json", json_text({"config": echo, "files": files}))
    return EXIT_OK


def cmd_run(args, cfg: RunConfig) -> int:
    paths = Paths(cfg)
    session = _load_session_file(Path(args.session))
    models = _load_models(paths, args.pathway)
    if not models:
        raise DataError(f"no {args.pathway} models in {paths.models}")
    rulesets, lexicon = _load_resources(cfg)
    result = run_session(session, models, pathways(cfg)[args.pathway], cfg, rulesets, lexicon)
    paths.runs.mkdir(parents=True, exist_ok=True)
    out = paths.runs / f"{session.session_id}.{args.pathway}.jsonl"
    atomic_write_text(out, decision_log(result.decisions, result.summary))
    print(json.dumps({"session": session.session_id, "pathway": args.pathway,
                      "predicted": result.predicted.label, **result.summary.to_record()}, sort_keys=True))
    return EXIT_OK


def _results_json(cfg: RunConfig, per_pathway: dict[str, list]) -> dict:
    return {"config": _config_echo(cfg),
            "pathways": {name: [{"id": r.session_id, "label": int(r.label), "predicted": int(r.predicted),
                                 **r.summary.to_record()} for r in res]
                         for name, res in per_pathway.items()}}


def _metrics_of(results: dict) -> dict[str, Metrics]:
    return {name: metrics([r["predicted"] for r in rows], [r["label"] for r in rows])
            for name, rows in results["pathways"].items()}


def cmd_eval(args, cfg: RunConfig) -> int:
    paths = Paths(cfg)
    split_path = paths.models / "split.json"
    if not split_path.is_file():
        raise DataError(f"no split file in {paths.models}; run train first")
    test_ids = json.loads(split_path.read_text("utf-8"))["test"]
    if not test_ids:
        raise DataError("no test sessions")
    sessions = _load_sessions(paths, test_ids)
    rulesets, lexicon = _load_resources(cfg)
    per_pathway = {}
    for name, pw in pathways(cfg).items():
        models = _load_models(paths, name)
        if models:
            per_pathway[name] = [run_session(s, models, pw, cfg, rulesets, lexicon) for s in sessions]
    if not per_pathway:
        raise DataError(f"no trained models in {paths.models}")

    results = _results_json(cfg, per_pathway)
    mets = _metrics_of(results)
    echo = results["config"]
    paths.eval.mkdir(parents=True, exist_ok=True)
    outputs = {"results.json": json_text(results), "report.txt": report(mets, "text", echo),
               "report.csv": report(mets, "csv", echo)}
    for name, text in outputs.items():
        atomic_write_text(paths.eval / name, text)
    atomic_write_text(paths.eval / "manifest.json", json_text(
        {"files": {k: sha256_hex(v.encode()) for k, v in sorted(outputs.items())}, "test": test_ids}))
    sys.stdout.write(outputs["report.txt"])
    return EXIT_OK


def cmd_report(args, cfg: RunConfig) -> int:
    paths = Paths(cfg)
    rpath = paths.eval / "results.json"
    if not rpath.is_file():
        raise DataError(f"no evaluation results in {paths.eval}; run eval first")
    results = json.loads(rpath.read_text("utf-8"))
    text = report(_metrics_of(results), args.format, results["config"])
    if args.file:
        atomic_write_text(Path(args.file), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# -- entry point -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="aggrofuse", description="Multimodal anger detection by decision-level fusion.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="JSON file with run configuration fields")
    p.add_argument("--seed", type=int, help="seed for generation, splitting and cross-validation")
    p.add_argument("--out", help="run directory (default from config: out)")
    p.add_argument("--data-dir", help="session directory (relative paths resolve under --out)")
    p.add_argument("--model-dir", help="model directory (relative paths resolve under --out)")
    p.add_argument("--ruleset", help="ruleset JSON file (default: stock anger rules)")
    p.add_argument("--lexicon", help="lexicon file (default: stock anger lexicon)")
    p.add_argument("--threshold", type=float, help="fusion confidence threshold T")
    p.add_argument("--staleness-ms", type=int, help="how long an outcome stays available to fusion")
    p.add_argument("--session-threshold", type=float, help="session confidence needed for an anger verdict")
    p.add_argument("--collapse-votes", action="store_true", default=None,
                   help="one voter per modality instead of one per (modality, source)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--actors", type=int)
    g.add_argument("--acts", type=int, help="acts per class and actor")
    g.add_argument("--frame-rate", type=float)

    t = sub.add_parser("train", help="train per-modality models with k-fold cross-validation")
    t.add_argument("--folds", type=int)
    t.add_argument("--C", type=float, dest="C")
    t.add_argument("--split", type=float, help="training fraction")
    t.add_argument("--pathway", choices=["both", GEOMETRIC, RULES], default="both")
    t.add_argument("--no-scale", action="store_true", help="train on unscaled features")
    t.add_argument("--no-rule-features", action="store_true")
    t.add_argument("--frames-per-session", type=int)

    r = sub.add_parser("run", help="replay one session through classifiers and fusion")
    r.add_argument("session", help="session file")
    r.add_argument("--pathway", choices=[GEOMETRIC, RULES], default=RULES)
    r.add_argument("--no-rule-votes", action="store_true")

    e = sub.add_parser("eval", help="evaluate both pathways on the held-out sessions")
    e.add_argument("--no-rule-votes", action="store_true")

    rp = sub.add_parser("report", help="render the last evaluation")
    rp.add_argument("--format", choices=["text", "csv"], default="text")
    rp.add_argument("--file", help="write to this file instead of stdout")
    return p


def resolve_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    over = dict(
        seed=args.seed, output=args.out, data_dir=args.data_dir, model_dir=args.model_dir,
        ruleset=args.ruleset, lexicon=args.lexicon, threshold=args.threshold,
        staleness_ms=args.staleness_ms, session_threshold=args.session_threshold,
        collapse_rule_and_svm_votes=args.collapse_votes,
        actors=getattr(args, "actors", None), acts=getattr(args, "acts", None),
        frame_rate=getattr(args, "frame_rate", None), folds=getattr(args, "folds", None),
        C=getattr(args, "C", None), split=getattr(args, "split", None),
        frames_per_session=getattr(args, "frames_per_session", None),
    )
    if getattr(args, "no_scale", False):
        over["scale_features"] = False
    if getattr(args, "no_rule_features", False):
        over["use_rules_as_features"] = False
    if getattr(args, "no_rule_votes", False):
        over["rule_vote_enabled"] = False
    return cfg.with_overrides(**over)


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "run": cmd_run, "eval": cmd_eval, "report": cmd_report}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = resolve_config(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, cfg)
    except (DataError, SessionFormatError, RuleConfigError, LexiconError, ScriptError,
            FusionError, EvaluationError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (PipelineError, SVMError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
