import json

import pytest

from aggrofuse.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from aggrofuse.evaluation import confusion_from_csv
from aggrofuse.session import Session, write_session
from aggrofuse.registry import EmotionClass
from helpers import speech_only_session


def run(tmp, *args):
    return main(["--out", str(tmp), *args])


@pytest.fixture(scope="module")
def trained_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    assert run(d, "--seed", "3", "gen", "--actors", "1", "--acts", "2") == EXIT_OK
    assert run(d, "--seed", "3", "train", "--folds", "2") == EXIT_OK
    return d


def test_gen_small_dataset(tmp_path):
    assert run(tmp_path, "gen", "--actors", "1", "--acts", "1") == EXIT_OK
    manifest = json.loads((tmp_path / "data" / "manifest.json").read_text())
    assert len(manifest["sessions"]) == 7
    assert len(list((tmp_path / "data").glob("*.jsonl"))) == 7
    assert {"id", "file", "label", "seed", "hash"} <= set(manifest["sessions"][0])


def test_gen_is_deterministic(tmp_path):
    run(tmp_path / "a", "--seed", "5", "gen", "--actors", "1", "--acts", "1")
    run(tmp_path / "b", "--seed", "5", "gen", "--actors", "1", "--acts", "1")
    assert (tmp_path / "a/data/manifest.json").read_bytes() == (tmp_path / "b/data/manifest.json").read_bytes()


def test_usage_errors(tmp_path, capsys):
    assert main([]) == EXIT_USAGE
    assert run(tmp_path, "gen", "--actors", "many") == EXIT_USAGE
    assert run(tmp_path, "gen", "--actors", "0") == EXIT_USAGE
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"colour": "red"}')
    assert main(["--config", str(cfg), "gen"]) == EXIT_USAGE
    assert "unknown config keys" in capsys.readouterr().err


def test_missing_data_dir(tmp_path, capsys):
    assert run(tmp_path / "nothing", "train") == EXIT_DATA
    assert "data directory not found" in capsys.readouterr().err


def test_train_outputs(trained_dir):
    for pathway in ("geometric", "rules"):
        assert sorted(p.name for p in (trained_dir / "models" / pathway).glob("*.json")) == \
            ["body.json", "face.json", "hand.json", "head.json"]
    split = json.loads((trained_dir / "models" / "split.json").read_text())
    assert len(split["train"]) == 7 and len(split["test"]) == 7
    assert "== rules/hand ==" in (trained_dir / "models" / "cv_report.txt").read_text()


def test_tampered_session_is_a_data_error(tmp_path):
    run(tmp_path, "gen", "--actors", "1", "--acts", "2")
    for victim in (tmp_path / "data").glob("*.jsonl"):
        victim.write_bytes(victim.read_bytes().replace(b'"x":', b'"x": ', 1))
    assert run(tmp_path, "train", "--folds", "2") == EXIT_DATA


def test_run_speech_only_session(trained_dir, tmp_path, capsys):
    s = speech_only_session([(t, "kill", 0.9) for t in range(0, 3000, 500)])
    path = tmp_path / "speech.jsonl"
    write_session(s, path)
    assert run(trained_dir, "run", str(path)) == EXIT_OK
    out = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert out["verdict"] and out["runs"] == 6 and out["detections"] == 6
    log = (trained_dir / "runs" / "speech-only.rules.jsonl").read_text().splitlines()
    assert json.loads(log[-1])["summary"]["confidence"] == 1.0


def test_run_empty_session(trained_dir, tmp_path, capsys):
    path = tmp_path / "empty.jsonl"
    write_session(Session("empty", "a0", EmotionClass.NEUTRAL, 20000), path)
    assert run(trained_dir, "run", str(path)) == EXIT_DATA
    assert "no fusion activity" in capsys.readouterr().err


def test_run_missing_models(tmp_path):
    path = tmp_path / "s.jsonl"
    write_session(speech_only_session([(0, "kill", 0.9)]), path)
    assert run(tmp_path, "run", str(path)) == EXIT_DATA


def test_eval_and_report_are_deterministic(trained_dir, capsys):
    assert run(trained_dir, "eval") == EXIT_OK
    first = {p: (trained_dir / "eval" / p).read_bytes() for p in ("report.txt", "report.csv", "manifest.json")}
    assert run(trained_dir, "eval") == EXIT_OK
    assert first == {p: (trained_dir / "eval" / p).read_bytes() for p in first}
    text = first["report.txt"].decode()
    assert "== geometric ==" in text and "== rules ==" in text and text.startswith("# config ")
    capsys.readouterr()
    assert run(trained_dir, "report", "--format", "csv") == EXIT_OK
    csv_text = capsys.readouterr().out
    assert csv_text == first["report.csv"].decode()
    assert set(confusion_from_csv(csv_text)) == {"geometric", "rules"}


def test_eval_without_test_sessions(trained_dir, tmp_path):
    import shutil
    d = tmp_path / "copy"
    shutil.copytree(trained_dir, d)
    split = json.loads((d / "models" / "split.json").read_text())
    split["test"] = []
    (d / "models" / "split.json").write_text(json.dumps(split))
    assert run(d, "eval") == EXIT_DATA


def test_missing_ruleset_file(trained_dir):
    assert run(trained_dir, "--ruleset", "/nonexistent/rules.json", "eval") == EXIT_DATA


def test_config_file_is_echoed_in_report(trained_dir, tmp_path):
    import shutil
    d = tmp_path / "cfg"
    shutil.copytree(trained_dir, d)
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"threshold": 0.3, "staleness_ms": 400}))
    assert main(["--config", str(cfg), "--out", str(d), "eval"]) == EXIT_OK
    header = (d / "eval" / "report.txt").read_text().splitlines()[0]
    echoed = json.loads(header.removeprefix("# config "))
    assert echoed["threshold"] == 0.3 and echoed["staleness_ms"] == 400 and "output" not in echoed
