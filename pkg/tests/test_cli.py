import csv
import json

import pytest

from parc.cli import DEFAULT_SEED, main


@pytest.fixture(autouse=True)
def _in_tmp(tmp_path, monkeypatch):
    # commands without an output file drop their manifest in the working directory
    monkeypatch.chdir(tmp_path)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def pwa_csv(tmp_path, capsys):
    path = tmp_path / "pwa.csv"
    assert run(capsys, "synth", "--experiment", "pwa", "--n-samples", 300, "--out", path)[0] == 0
    return path


def test_synth_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run(capsys, "synth", "--experiment", "nonlinear", "--n-samples", 50, "--seed", 3, "--out", a)
    run(capsys, "synth", "--experiment", "nonlinear", "--n-samples", 50, "--seed", 3, "--out", b)
    assert a.read_bytes() == b.read_bytes()
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["seed"] == 3 and "numpy" in manifest["versions"]
    assert manifest["outputs"][str(a)]


def test_fit_predict_evaluate_agree(tmp_path, capsys, pwa_csv):
    model = tmp_path / "m.json"
    code, out, _ = run(capsys, "fit", "--data", pwa_csv, "--target", "y", "-K", 6,
                       "--sigma", 0, "--model", model)
    assert code == 0
    fitted = json.loads(out)
    code, out, _ = run(capsys, "predict", "--model", model, "--data", pwa_csv,
                       "--out", tmp_path / "p.csv")
    assert code == 0 and json.loads(out) == fitted["train"]
    results = tmp_path / "r.csv"
    for _ in range(2):
        code, out, _ = run(capsys, "evaluate", "--model", model, "--data", pwa_csv,
                           "--results", results)
        assert json.loads(out) == fitted["train"]
    rows = list(csv.reader(results.open()))
    assert rows[0] == ["model", "data", "target", "metric", "value"] and len(rows) == 3
    assert float(rows[1][4]) == fitted["train"]["r2"][0]
    preds = list(csv.reader((tmp_path / "p.csv").open()))
    assert preds[0] == ["y"] and len(preds) == 301


def test_fit_is_reproducible(tmp_path, capsys, pwa_csv):
    for name in ("a.json", "b.json"):
        run(capsys, "fit", "--data", pwa_csv, "--target", "y", "-K", 4, "--model", tmp_path / name)
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    manifest = json.loads((tmp_path / "a.json.manifest.json").read_text())
    assert manifest["config"]["K"] == 4 and manifest["seed"] == DEFAULT_SEED


def test_config_file_and_override(tmp_path, capsys, pwa_csv):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("seed: 5\nparc:\n  K: 3\n  sigma: 0.5\ndata:\n  targets: [y]\n")
    model = tmp_path / "m.json"
    assert run(capsys, "fit", "--config", cfg, "--data", pwa_csv, "--model", model)[0] == 0
    stored = json.loads(model.read_text())["config"]
    assert (stored["K"], stored["sigma"], stored["seed"]) == (3, 0.5, 5)
    run(capsys, "fit", "--config", cfg, "--data", pwa_csv, "-K", 2, "--seed", 1, "--model", model)
    stored = json.loads(model.read_text())["config"]
    assert (stored["K"], stored["sigma"], stored["seed"]) == (2, 0.5, 1)


def test_unknown_config_key(tmp_path, capsys, pwa_csv):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("parc:\n  bogus: 1\n")
    code, _, err = run(capsys, "fit", "--config", cfg, "--data", pwa_csv, "--target", "y",
                       "--model", tmp_path / "m.json")
    assert code == 1 and "bogus" in json.loads(err)["message"]


def test_errors_are_one_json_line(tmp_path, capsys):
    code, out, err = run(capsys, "fit", "--data", tmp_path / "none.csv", "--target", "y",
                         "--model", tmp_path / "m.json")
    assert code == 1 and out == ""
    lines = err.strip().splitlines()
    assert len(lines) == 1 and json.loads(lines[0])["error"] == "CliError"


def test_bad_config_value(tmp_path, capsys, pwa_csv):
    code, _, err = run(capsys, "fit", "--data", pwa_csv, "--target", "y", "-K", 0,
                       "--model", tmp_path / "m.json")
    assert code == 1 and json.loads(err)["error"] == "ParcError"


def test_optimize_and_export(tmp_path, capsys, pwa_csv):
    model = tmp_path / "m.json"
    run(capsys, "fit", "--data", pwa_csv, "--target", "y", "-K", 3, "--model", model)
    lp = tmp_path / "t.lp"
    code, out, _ = run(capsys, "optimize", "--model", model, "--y-ref", 0.2, "--export-lp", lp,
                       "--gap", 1e-9, "--node-limit", 100, "--box-expand", 0.0)
    assert code == 0
    res = json.loads(out)
    assert res["status"] == "optimal" and abs(abs(res["y_hat"][0] - 0.2) - res["epsilon"]) < 1e-6
    lp2 = tmp_path / "u.lp"
    assert run(capsys, "export-lp", "--model", model, "--y-ref", 0.2, "--box-expand", 0.0,
               "--out", lp2)[0] == 0
    assert lp.read_bytes() == lp2.read_bytes()
    code, _, err = run(capsys, "optimize", "--model", model, "--y-ref", 1, 2)
    assert code == 1 and "y-ref" in json.loads(err)["message"]


def test_select_k(tmp_path, capsys, pwa_csv):
    code, out, _ = run(capsys, "select-k", "--data", pwa_csv, "--target", "y",
                       "--k-range", "1,3", "--folds", 3, "--out", tmp_path / "k.csv")
    assert code == 0
    res = json.loads(out)
    assert res["best_K"] == 3 and set(res["scores"]) == {"1", "3"}


def test_benchmark_single_repetition(tmp_path, capsys):
    out_csv = tmp_path / "b.csv"
    code, out, _ = run(capsys, "benchmark", "--experiment", "nonlinear", "--repetitions", 1,
                       "--n-samples", 200, "--Ks", 1, 3, "--sigmas", 1, "--separations", "softmax",
                       "--out", out_csv)
    assert code == 0 and "R2 train" in out
    rows = list(csv.DictReader(out_csv.open()))
    assert len(rows) == 2 and all(float(r["r2_train_std"]) == 0.0 for r in rows)


def test_categorical_targets_round_trip(tmp_path, capsys):
    data = tmp_path / "d.csv"
    lines = ["x1,x2,y,label"]
    for k in range(60):
        x1, x2 = (k % 10) / 10, (k // 10) / 6
        lines.append(f"{x1},{x2},{x1 + x2},{'up' if x1 > x2 else 'down'}")
    data.write_text("\n".join(lines) + "\n")
    model = tmp_path / "m.json"
    code, out, _ = run(capsys, "fit", "--data", data, "--target", "y", "--target", "label",
                       "-K", 2, "--model", model)
    assert code == 0
    fitted = json.loads(out)
    assert fitted["train"]["accuracy"][0] > 0.9
    code, out, _ = run(capsys, "predict", "--model", model, "--data", data, "--out", tmp_path / "p.csv")
    assert json.loads(out) == fitted["train"]
    preds = list(csv.reader((tmp_path / "p.csv").open()))
    assert preds[0] == ["y", "label"] and {r[1] for r in preds[1:]} <= {"up", "down"}
    code, out, _ = run(capsys, "optimize", "--model", model, "--y-ref", 1.0, "--category", "label=up")
    assert code == 0 and json.loads(out)["categories"] == ["up"]
    assert (tmp_path / "parc-run.manifest.json").exists()
