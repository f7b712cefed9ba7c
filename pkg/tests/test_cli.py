import json
import os

import numpy as np
import pytest

from geomediate.cli import run
from geomediate.core_model import Dataset


@pytest.fixture
def park_csv(tmp_path):
    """Synthetic stand-in for the grid survey: five saliencies, SA, AC."""
    rng = np.random.default_rng(0)
    n = 90
    X = rng.integers(1, 6, (n, 5)).astype(float)
    sa = 0.4 * X[:, 0] - 0.3 * X[:, 1] + rng.normal(0, 0.6, n)
    ac = 0.6 * sa - 0.15 * X[:, 1] + rng.normal(0, 0.6, n)
    d = Dataset(coords=rng.uniform(0, 1200, (n, 2)), predictors=X,
                predictor_names=("S_NS", "S_TS", "S_CS", "S_RS", "S_ToS"), mediator=sa,
                outcome=ac, mediator_name="SA", outcome_name="AC")
    path = tmp_path / "park.csv"
    d.to_csv(path)
    return path


def files(d):
    return {p: (d / p).read_bytes() for p in sorted(os.listdir(d))}


def test_mediate_happy_path(park_csv, tmp_path, capsys):
    out = tmp_path / "med"
    code = run(["mediate", "--in", str(park_csv), "--mediator", "SA", "--outcome", "AC",
                "--B", "200", "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert "S_TS -> SA -> AC" in text and "CFI" in text
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 42 and manifest["command"] == "mediate"
    assert manifest["config"]["B"] == 200
    assert "threads" not in manifest["config"]
    assert set(manifest["outputs"]) == {"mediation.csv", "fit_indices.json", "scaling.json"}


def test_unknown_flag_is_usage_error(capsys):
    assert run(["ols", "--bogus"]) == 2
    assert "usage:" in capsys.readouterr().err
    assert run([]) == 2
    assert run(["frobnicate"]) == 2


def test_missing_input_is_usage_error(tmp_path, capsys):
    assert run(["ols", "--out", str(tmp_path)]) == 2


def test_rank_deficient_mgwr_reports_location(tmp_path, capsys):
    rng = np.random.default_rng(1)
    n = 40
    x1 = rng.standard_normal(n)
    d = Dataset(coords=rng.uniform(0, 100, (n, 2)), predictors=np.column_stack([x1, 2 * x1]),
                predictor_names=("a", "b"), mediator=rng.standard_normal(n),
                outcome=rng.standard_normal(n), mediator_name="SA", outcome_name="AC")
    d.to_csv(tmp_path / "bad.csv")
    code = run(["mgwr", "--in", str(tmp_path / "bad.csv"), "--id", "id", "--out",
                str(tmp_path / "o")])
    assert code == 1
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] == "LocalRankDeficient"
    assert isinstance(err["location"], int)


def test_data_error_json(tmp_path, capsys):
    code = run(["ols", "--in", str(tmp_path / "nope.csv"), "--out", str(tmp_path)])
    assert code == 1
    assert json.loads(capsys.readouterr().err)["error"] == "IoError"
    (tmp_path / "x.csv").write_text("u,v,S1,SA,AC\n0,0,1,2,3\n")
    assert run(["ols", "--in", str(tmp_path / "x.csv"), "--out", str(tmp_path)]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "TooFewRows"


@pytest.mark.parametrize("argv", [
    ["moran", "--permutations", "199"],
    ["mediate", "--B", "300"],
    ["mediate-spatial", "--max-iter", "30"],
])
def test_threads_do_not_change_outputs(argv, park_csv, tmp_path):
    outs = []
    for threads in ("1", "3"):
        out = tmp_path / f"t{threads}"
        assert run([argv[0], "--in", str(park_csv), "--id", "id", "--threads", threads,
                    "--out", str(out), *argv[1:]]) == 0
        outs.append(files(out))
    assert outs[0] == outs[1]


def test_config_file_and_flag_override(park_csv, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"B": 120, "ci_level": 0.9, "seed": 7}))
    out = tmp_path / "c"
    assert run(["mediate", "--config", str(cfg), "--in", str(park_csv), "--B", "80",
                "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["B"] == 80
    assert manifest["config"]["ci_level"] == 0.9
    assert manifest["seed"] == 7
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"no_such_option": 1}))
    assert run(["mediate", "--config", str(bad), "--in", str(park_csv)]) == 2


def test_env_output_directory(park_csv, tmp_path, monkeypatch):
    monkeypatch.setenv("GEOMEDIATE_OUT", str(tmp_path / "env"))
    assert run(["ols", "--in", str(park_csv)]) == 0
    assert (tmp_path / "env" / "ols.csv").exists()


def test_gwr_and_mgwr_outputs(park_csv, tmp_path):
    assert run(["gwr", "--in", str(park_csv), "--id", "id", "--out", str(tmp_path / "g")]) == 0
    summary = json.loads((tmp_path / "g" / "gwr_summary.json").read_text())
    assert {"bandwidth", "aicc", "r_squared", "hat_trace"} <= set(summary)
    assert run(["mgwr", "--in", str(park_csv), "--id", "id", "--out", str(tmp_path / "m")]) == 0
    header = (tmp_path / "m" / "mgwr_bandwidths.csv").read_text().splitlines()[0].split(",")
    assert header[:3] == ["term", "bandwidth", "enp"]
    assert {"adj_r_squared", "aicc", "residual_morans_i", "residual_z", "residual_p"} <= set(header)


def test_synth_then_spatial_then_map(tmp_path):
    assert run(["synth", "--n", "120", "--p", "1", "--out", str(tmp_path / "s")]) == 0
    assert (tmp_path / "s" / "truth.json").exists()
    assert run(["mediate-spatial", "--in", str(tmp_path / "s" / "synth.csv"), "--id", "id",
                "--mediator", "M", "--outcome", "y", "--out", str(tmp_path / "sp")]) == 0
    effects = tmp_path / "sp" / "spatial_effects.csv"
    assert "discrepancy" in effects.read_text().splitlines()[0]
    for fmt, name in (("geojson", "map.geojson"), ("svg", "map.svg"), ("csv", "map.csv")):
        assert run(["map", "--in", str(effects), "--column", "indirect", "--predictor", "x1",
                    "--mask-column", "indirect_sig", "--format", fmt, "--ncols", "30",
                    "--out", str(tmp_path / fmt)]) == 0
        assert (tmp_path / fmt / name).exists()
    doc = json.loads((tmp_path / "geojson" / "map.geojson").read_text())
    assert doc["type"] == "FeatureCollection" and doc["features"]


def test_synth_config_fields(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"n": 50, "p": 1, "mediator_fields": [
        {"kind": "constant", "level": 0.0},
        {"kind": "sign_flip_boundary", "amplitude": 0.8, "width": 0.1}]}))
    assert run(["synth", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    truth = json.loads((tmp_path / "a" / "truth.json").read_text())
    alpha = np.array(truth["alpha"])[:, 1]
    assert alpha.min() < 0 < alpha.max()
