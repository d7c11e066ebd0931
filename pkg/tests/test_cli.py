import json

import numpy as np
import pytest

from chebycf.cli import main
from chebycf.evaluation import CSV_HEADER


@pytest.fixture
def split(tmp_path):
    rng = np.random.default_rng(0)
    train, test = [], []
    for u in range(40):
        items = rng.choice(30, 8, replace=False)
        train.append(f"{u} " + " ".join(map(str, items[:6])))
        test.append(f"{u} " + " ".join(map(str, items[6:])))
    d = tmp_path / "toy"
    d.mkdir()
    (d / "train.txt").write_text("\n".join(train) + "\n")
    (d / "test.txt").write_text("\n".join(test) + "\n")
    return tmp_path, d / "train.txt", d / "test.txt"


def data_args(split):
    _, train, test = split
    return ["--train", str(train), "--test", str(test)]


def test_fit_evaluate_recommend(split, tmp_path):
    model = tmp_path / "m.bin"
    assert main(["fit", *data_args(split), "--phi", "3", "--alpha", "0.2", "--eta", "8", "--beta", "0.2", "--out", str(model)]) == 0
    cfg = json.loads((tmp_path / "m.bin.config.json").read_text())
    assert cfg["params"]["phi"] == 3.0

    csv = tmp_path / "metrics.csv"
    assert main(["evaluate", *data_args(split), "--model", str(model), "--n", "5", "--out", str(csv)]) == 0
    lines = csv.read_text().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 2

    rec = tmp_path / "rec.txt"
    assert main(["recommend", *data_args(split), "--model", str(model), "--users", "0", "3", "--n", "5", "--out", str(rec)]) == 0
    out = rec.read_text().splitlines()
    assert out[0].startswith("# config:")
    assert len(out) == 3
    assert out[1].startswith("0\t") and len(out[1].split("\t")[1].split()) == 5


def test_dataset_from_env(split, tmp_path, monkeypatch):
    root, _, _ = split
    monkeypatch.setenv("CHEBYCF_DATA_ROOT", str(root))
    assert main(["fit", "--dataset", "toy", "--out", str(tmp_path / "m.bin")]) == 0


def test_outputs_reproducible(split, tmp_path):
    outs = []
    for run in range(2):
        model = tmp_path / f"m{run}.bin"
        csv = tmp_path / f"e{run}.csv"
        main(["fit", *data_args(split), "--alpha", "0.1", "--eta", "8", "--out", str(model)])
        main(["evaluate", *data_args(split), "--model", str(model), "--out", str(csv)])
        # drop the timing column
        metrics = [line.rsplit(",", 1)[0] for line in csv.read_text().splitlines()]
        outs.append((model.read_bytes(), metrics))
    assert outs[0] == outs[1]


def test_grid(split, tmp_path):
    csv = tmp_path / "grid.csv"
    model = tmp_path / "best.bin"
    args = ["grid", *data_args(split), "--phi", "1", "2", "--alpha", "0", "0.2", "--eta", "8", "--beta", "0", "0.3",
            "--out", str(csv), "--model-out", str(model)]
    assert main(args) == 0
    lines = csv.read_text().splitlines()
    assert lines[0] == CSV_HEADER and len(lines) == 2 + 8
    assert lines[-1].startswith("BEST,")
    assert model.is_file()


def test_export_filter(capsys):
    assert main(["export-filter", "--phi", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "lambda,weight" and len(lines) == 1002
    assert "0,0.5" in lines


def test_verify(tmp_path):
    out = tmp_path / "verify.txt"
    assert main(["verify", "--instances", "1", "--out", str(out)]) == 0
    assert "checks passed" in out.read_text()


def test_verify_failure_exit(monkeypatch):
    from chebycf import verify

    bad = [verify.CheckResult("x", "y", 1.0, 0.0)]
    monkeypatch.setattr(verify, "run_checks", lambda seed, instances: bad)
    assert main(["verify"]) == 5


def test_usage_errors(split, tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--bogus"])
    assert exc.value.code == 2
    assert main(["fit", "--out", str(tmp_path / "m")]) == 2
    assert main(["fit", *data_args(split), "--phi", "-1", "--out", str(tmp_path / "m")]) == 2


def test_missing_file(tmp_path):
    assert main(["fit", "--train", str(tmp_path / "no"), "--test", str(tmp_path / "no"), "--out", str(tmp_path / "m")]) == 3


def test_malformed_dataset(tmp_path):
    (tmp_path / "a").write_text("0 1 x\n")
    (tmp_path / "b").write_text("")
    assert main(["fit", "--train", str(tmp_path / "a"), "--test", str(tmp_path / "b"), "--out", str(tmp_path / "m")]) == 6


def test_model_errors(split, tmp_path):
    model = tmp_path / "m.bin"
    main(["fit", *data_args(split), "--out", str(model)])
    raw = model.read_bytes()
    model.write_bytes(raw[:-5])
    assert main(["evaluate", *data_args(split), "--model", str(model), "--out", str(tmp_path / "e.csv")]) == 4

    model.write_bytes(raw)
    (tmp_path / "other_train").write_text("0 1 2\n1 0\n")
    (tmp_path / "other_test").write_text("0 0\n")
    other = ["--train", str(tmp_path / "other_train"), "--test", str(tmp_path / "other_test")]
    assert main(["evaluate", *other, "--model", str(model), "--out", str(tmp_path / "e.csv")]) == 4
    assert main(["recommend", *other, "--model", str(model)]) == 4
