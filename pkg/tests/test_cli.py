import json

import pytest

from quadobs.cli import PRESETS, build_config, config_hash, main, run


def run_cli(tmp_path, *argv):
    code = main(list(argv) + ["--out", str(tmp_path)])
    docs = sorted(tmp_path.glob("*.json"))
    return code, docs


def load(path):
    return json.loads(path.read_text(encoding="utf-8"))


def result_of(tmp_path, *argv):
    code, docs = run_cli(tmp_path, *argv)
    assert code == 0
    assert len(docs) == 1
    return load(docs[0])


def test_classify_kolmogorov(tmp_path):
    doc = result_of(tmp_path, "classify", "--preset", "kolmogorov")
    res = doc["result"]
    assert res["I"] == [] and res["J"] == [1, 2]
    assert res["kalman_rank"] == 2 and res["k0"] == 1


def test_classify_harmonic_and_laplacian(tmp_path):
    res = result_of(tmp_path / "h", "classify", "--preset", "harmonic")["result"]
    assert res["singular_dim"] == 0 and res["k0"] == 0
    res = result_of(tmp_path / "l", "classify", "--preset", "laplacian")["result"]
    assert res["singular_dim"] == 1


@pytest.mark.parametrize("preset,I", [("kfp", [3, 4]), ("kfp-1", [1, 3, 4]), ("kfp-12", [1, 2, 3, 4])])
def test_classify_kfp(tmp_path, preset, I):
    res = result_of(tmp_path, "classify", "--preset", preset)["result"]
    assert res["I"] == I and res["predicted_I"] == I


def test_bounds_small_example(tmp_path, capsys):
    res = result_of(tmp_path, "bounds", "--bound", "decay-cubes", "--gamma", "0.5", "--a", "0",
                    "--L", "1", "--d", "1", "--lambda", "1", "--K", "1")["result"]
    assert res["value"] == pytest.approx(3 / 16)
    assert "0.1875" in capsys.readouterr().out


def test_unknown_command_exit_code(tmp_path):
    assert main(["frobnicate"]) != 0
    assert main([]) != 0


def test_config_errors_exit_two(tmp_path):
    assert main(["classify", "--preset", "nope", "--out", str(tmp_path)]) == 2
    assert main(["bounds", "--bound", "mystery", "--gamma", "0.5", "--lambda", "1",
                 "--out", str(tmp_path)]) == 2
    assert main(["classify", "--set", 'symbol.oscillator={"dim": 1, "I": [2]}',
                 "--out", str(tmp_path)]) == 2
    assert main(["classify", "--out", str(tmp_path)]) == 2


def test_hypothesis_violation_exit_four(tmp_path):
    code = main(["verify-dissipation", "--preset", "kolmogorov",
                 "--set", "dissipation.comparison_I=[1]", "--set", "dissipation.N_cut=12",
                 "--out", str(tmp_path)])
    assert code == 4
    assert main(["bounds", "--gamma", "1.5", "--lambda", "1", "--out", str(tmp_path)]) == 4


def test_report_empty(tmp_path):
    code = main(["report", str(tmp_path / "none-*.json"), "--out", str(tmp_path)])
    assert code == 0
    doc = load(next(tmp_path.glob("report-*.json")))
    assert doc["result"]["inputs"] == 0 and doc["result"]["tables"] == []


def harmonic_dissipation(out, lam):
    return main(["verify-dissipation", "--preset", "harmonic",
                 "--set", f"dissipation.lambda={lam}", "--set", "dissipation.comparison_I=[1]",
                 "--set", "dissipation.N_cut=20", "--out", str(out)])


def test_report_merges_dissipation_tables(tmp_path):
    runs = tmp_path / "runs"
    assert harmonic_dissipation(runs, 3) == 0
    assert harmonic_dissipation(runs, 5) == 0
    out = tmp_path / "out"
    assert main(["report", str(runs / "*.json"), "--out", str(out)]) == 0
    table = (out / "report-verify-dissipation.csv").read_text().splitlines()
    assert table[0] == "config_hash,t,decay"
    assert len({row.split(",")[0] for row in table[1:]}) == 2
    assert len(table) == 1 + 2 * 10


def test_report_schema_mismatch(tmp_path):
    runs = tmp_path / "runs"
    result_of(runs, "classify", "--preset", "harmonic")
    (runs / "old.json").write_text(json.dumps({"schema_version": 0, "experiment": "classify"}))
    assert main(["report", str(runs / "*.json"), "--out", str(tmp_path / "out")]) == 2


@pytest.mark.parametrize("argv", [
    ("classify", "--preset", "kfp"),
    ("synthesize", "--preset", "decay-cubes", "--seed", "5"),
    ("bounds", "--bound", "sharp-cost", "--gamma", "0.5", "--T", "2", "--rho", "1"),
])
def test_determinism(tmp_path, argv):
    a = result_of(tmp_path / "a", *argv)
    b = result_of(tmp_path / "b", *argv)
    pa = sorted((tmp_path / "a").iterdir())
    pb = sorted((tmp_path / "b").iterdir())
    assert [p.name for p in pa] == [p.name for p in pb]
    for x, y in zip(pa, pb):
        assert x.read_bytes() == y.read_bytes()
    assert a["config_hash"] == b["config_hash"]


def test_seed_changes_output(tmp_path):
    a = result_of(tmp_path / "a", "synthesize", "--preset", "decay-cubes", "--seed", "1")
    b = result_of(tmp_path / "b", "synthesize", "--preset", "decay-cubes", "--seed", "2")
    assert a["seed"] == 1 and b["seed"] == 2
    assert a["result"]["w0_norm"] != b["result"]["w0_norm"]


@pytest.mark.parametrize("preset", sorted(PRESETS))
def test_config_echo_round_trip(tmp_path, preset):
    cfg = build_config("classify", preset, None, 3, ["extra.knob=0.25"])
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    again = build_config("classify", None, str(path), None, [])
    assert again == cfg
    assert config_hash(again) == config_hash(cfg)


def test_config_file_and_output_env(tmp_path, monkeypatch):
    cfg = {"symbol": {"ou": {"kind": "kolmogorov", "m": 2}}, "seed": 9}
    path = tmp_path / "k.json"
    path.write_text(json.dumps(cfg))
    monkeypatch.setenv("OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["classify", "--config", str(path)]) == 0
    doc = load(next((tmp_path / "env").glob("classify-*.json")))
    assert doc["seed"] == 9 and doc["result"]["I"] == []
    assert doc["result"]["kalman_rank"] == 4


def test_run_without_output_dir():
    doc, written = run(build_config("bounds", overrides=["bounds.gamma=0.5", "bounds.lambda=4"]))
    assert written == [] and doc["result"]["bound"] == "decay-cubes"
