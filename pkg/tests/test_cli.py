import csv
import io
import json
import subprocess
import sys

import pytest

from birkhoff_perf.cli import build_parser, main
from birkhoff_perf.corpus import SynthConfig, generate_synthetic

SUBCOMMANDS = ("extract", "align", "synth", "train", "score", "evaluate", "ablate")


@pytest.fixture(scope="module")
def small_corpus(tmp_path_factory):
    return generate_synthetic(SynthConfig(seed=3, n_pieces=10), tmp_path_factory.mktemp("cli"))


@pytest.fixture(scope="module")
def model_path(small_corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("model") / "model.json"
    assert main(["train", str(small_corpus), "--seed", "3", "--workers", "1", "-o", str(out)]) == 0
    return out


@pytest.mark.parametrize("command", SUBCOMMANDS)
def test_help_exits_zero_without_touching_disk(command, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as exc:
        main([command, "--help"])
    assert exc.value.code == 0
    assert "usage" in capsys.readouterr().out
    assert list(tmp_path.iterdir()) == []


def test_usage_errors_exit_one(capsys):
    for argv in ([], ["bogus"], ["train", "m.json"], ["train", "m.json", "-o", "x", "--ratio", "1.5"]):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 1


def test_defaults():
    args = build_parser().parse_args(["train", "m.json", "-o", "x"])
    assert (args.lr, args.iterations, args.ratio, args.ablate_target) == (0.01, 1000, 0.8, None)


def test_extract_formats(small_corpus, capsys):
    d = small_corpus.parent
    score, human = str(d / "piece_000_score.mid"), str(d / "piece_000_human.mid")
    assert main(["extract", score, human]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"pd", "rd", "dh", "bs", "ds", "phe", "rhe", "adc", "tv", "kc", "flags"}
    assert main(["extract", score, human, "--format", "csv"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 2 and float(rows[1][0]) == doc["pd"]
    assert main(["extract", score, human, "--format", "text"]) == 0
    assert "adc" in capsys.readouterr().out


def test_align_json(small_corpus, capsys):
    d = small_corpus.parent
    assert main(["align", str(d / "piece_001_score.mid"), str(d / "piece_001_score.mid")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc) == {"matches", "missing_score", "extra_perf", "total_cost"}
    assert doc["missing_score"] == [] and doc["total_cost"] == 0.0


def test_train_is_byte_deterministic(small_corpus, model_path, tmp_path, capsys):
    again = tmp_path / "again.json"
    assert main(["train", str(small_corpus), "--seed", "3", "--workers", "2", "-o", str(again)]) == 0
    assert again.read_bytes() == model_path.read_bytes()
    printed = capsys.readouterr().out.splitlines()
    assert printed[0].startswith("iter     0") and printed[-1].startswith("final")
    meta = json.loads(model_path.read_text())["training_meta"]
    assert meta["final_loss"] < meta["initial_loss"]
    assert meta["split"] == {"ratio": 0.8, "seed": 3}


def test_score_report(small_corpus, model_path, capsys):
    d = small_corpus.parent
    s = str(d / "piece_002_score.mid")
    assert main(["score", str(model_path), s, s]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert set(rep) == {"basic_features", "aesthetic_features", "measure", "class_probabilities",
                        "predicted_class", "alignment_stats"}  # fmt: skip
    assert rep["basic_features"]["pd"] == 0.0
    assert abs(sum(rep["class_probabilities"].values()) - 1) < 1e-12


def test_evaluate_and_dump(small_corpus, model_path, tmp_path, capsys):
    dump, out = tmp_path / "dist.csv", tmp_path / "eval.json"
    argv = ["evaluate", str(model_path), str(small_corpus), "--workers", "1"]
    assert main([*argv, "--dump-distributions", str(dump), "-o", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert 0 <= doc["evaluation"]["accuracy"] <= 1
    rows = list(csv.reader(dump.open()))
    assert rows[0][-5:] == ["H", "S", "C", "R", "M"] and len(rows) == 1 + 6
    assert main([*argv, "--format", "text"]) == 0
    assert "kappa" in capsys.readouterr().out


def test_ablate_text(small_corpus, capsys):
    argv = ["ablate", str(small_corpus), "--iterations", "50", "--workers", "1", "--format", "text"]
    assert main(argv) == 0
    assert "w/o redundancy" in capsys.readouterr().out


def test_missing_class_exits_two(small_corpus, tmp_path, capsys):
    doc = json.loads(small_corpus.read_text())
    doc["entries"] = [e for e in doc["entries"] if e["label"] != "ai"]
    for e in doc["entries"]:
        for key in ("score", "performance"):
            e[key] = str(small_corpus.parent / e[key])
    manifest = tmp_path / "no_ai.json"
    manifest.write_text(json.dumps(doc))
    out = tmp_path / "m.json"
    assert main(["train", str(manifest), "--workers", "1", "-o", str(out)]) == 2
    assert "MissingClass" in capsys.readouterr().err
    assert not out.exists()


def test_unreadable_files_exit_two(model_path, tmp_path):
    bad = tmp_path / "bad.mid"
    bad.write_bytes(b"garbage")
    assert main(["score", str(model_path), str(bad), str(bad)]) == 2
    assert main(["extract", str(tmp_path / "none.mid"), str(bad)]) == 2


def test_synth_and_module_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "birkhoff_perf", "synth", str(tmp_path / "c"),
                           "--n-pieces", "2"], capture_output=True, text=True)  # fmt: skip
    assert proc.returncode == 0
    assert len(json.loads((tmp_path / "c" / "manifest.json").read_text())["entries"]) == 6


def test_human_renditions_scored_human(synth_manifest, synth_split, tmp_path, capsys):
    model = tmp_path / "m42.json"
    assert main(["train", str(synth_manifest), "--seed", "42", "-o", str(model)]) == 0
    _, test = synth_split
    humans = [s for s in test if s.label == "human"]
    hits = 0
    for s in humans:
        piece = synth_manifest.parent / s.piece_id
        capsys.readouterr()
        assert main(["score", str(model), f"{piece}_score.mid", f"{piece}_human.mid"]) == 0
        hits += json.loads(capsys.readouterr().out)["predicted_class"] == "human"
    assert hits >= 0.9 * len(humans)
