import csv
import json
import shutil

import pytest

from voicewell.cli import main


def _header_len(path):
    with open(path, newline="") as fh:
        return len(next(csv.reader(fh))) - 3  # minus subject, session, question


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["synth", "--out", str(root / "corpus"), "--subjects", "5", "--sessions", "1", "--seed", "3"]) == 0
    return root


@pytest.fixture(scope="module")
def features(corpus):
    out = corpus / "features"
    assert main(["extract", "--manifest", str(corpus / "corpus" / "manifest.json"), "--out", str(out)]) == 0
    return out


def test_synth_rejects_too_few_subjects(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path), "--subjects", "4"]) == 2
    assert "at least 5" in capsys.readouterr().err


def test_extract_writes_dimensioned_caches(features):
    assert _header_len(features / "features_sentence.csv") == 2357
    assert _header_len(features / "features_paragraph.csv") == 2357
    assert _header_len(features / "features_spontaneous.csv") == 2364
    assert _header_len(features / "features_concatenated.csv") == 16506


def test_extract_rerun_uses_cache(corpus, features, capsys):
    assert main(["extract", "--manifest", str(corpus / "corpus" / "manifest.json"), "--out", str(features)]) == 0
    assert "0 extracted, 5 cached" in capsys.readouterr().out


def test_corrupt_audio_is_reported_and_others_continue(corpus, tmp_path, capsys):
    copy = tmp_path / "corpus"
    shutil.copytree(corpus / "corpus", copy)
    (copy / "S002" / "session1" / "Q4.wav").write_bytes(b"RIFF0000garbage")
    code = main(["extract", "--manifest", str(copy / "manifest.json"), "--out", str(tmp_path / "f"), "--format", "npz"])
    out = capsys.readouterr()
    assert code == 1
    assert "4 extracted, 0 cached, 1 failed" in out.out
    assert "S002/1" in out.err and "Q4" in out.err


def test_missing_lexicon_is_a_usage_error(corpus, tmp_path):
    args = ["extract", "--manifest", str(corpus / "corpus" / "manifest.json"), "--out", str(tmp_path)]
    assert main(args + ["--depression-lexicon", str(tmp_path / "none.txt")]) == 2


def test_cv_single_measurement_and_plot(corpus, features, tmp_path):
    out = tmp_path / "cv"
    args = [
        "cv",
        "--manifest", str(corpus / "corpus" / "manifest.json"),
        "--features", str(features),
        "--measurement", "psqi",
        "--source", "concatenated",
        "--epochs", "2",
        "--n-select", "10",
        "--n-perm", "1000",
        "--out", str(out),
    ]  # fmt: skip
    assert main(args) == 0
    results = json.loads((out / "results.json").read_text())
    assert [(r["measurement"], r["source"]) for r in results] == [("PSQI", "concatenated")]
    rows = list(csv.reader(open(out / "table3.csv")))
    assert [r[0] for r in rows[1:]] == ["PSQI"]
    assert (out / "scatter_PSQI.svg").exists()
    assert main(["plot", "--predictions", str(out / "predictions.csv"), "--measurement", "PSQI", "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "scatter_PSQI.svg").exists()


def test_n_perm_floor(corpus, features, tmp_path):
    args = ["cv", "--manifest", str(corpus / "corpus" / "manifest.json"), "--features", str(features)]
    assert main(args + ["--n-perm", "999", "--out", str(tmp_path)]) == 2


def test_unknown_measurement_exits_with_usage():
    with pytest.raises(SystemExit) as exc:
        main(["cv", "--manifest", "m", "--features", "f", "--measurement", "BDI", "--out", "o"])
    assert exc.value.code == 2
