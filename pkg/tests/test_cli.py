import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from stitforest.cli import run
from stitforest.regress import Dataset
from stitforest.rng import stream

SMALL_GEOMETRY = dict(version=1, leaf_trees=500, zero_cell_reps=2000, ks_reps=500, campbell_reps=20,
                      erlang_reps=5000, deter_reps=3000, scaling_reps=300)


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_help_and_bad_command():
    assert run(["--help"]) == 0
    assert run(["nope"]) == 2
    assert run(["experiment", "unknown-kind"]) == 2


def test_missing_version_is_config_error(tmp_path):
    out = tmp_path / "out"
    cfg = write_json(tmp_path / "c.json", {"seed": 1})
    assert run(["experiment", "bias", "--config", cfg, "--out", str(out)]) == 2
    assert not out.exists()


def test_unknown_key_is_config_error(tmp_path, capsys):
    out = tmp_path / "out"
    cfg = write_json(tmp_path / "c.json", {"version": 1, "lifetimes": [2.0], "bogus": 1})
    assert run(["experiment", "bias", "--config", cfg, "--out", str(out)]) == 2
    assert "bogus" in capsys.readouterr().err
    assert not out.exists()


def test_bad_values_are_config_errors(tmp_path):
    assert run(["experiment", "bias", "--config", write_json(tmp_path / "a.json", {"version": 2})]) == 2
    assert run(["experiment", "bias", "--seed", "-1", "--out", str(tmp_path)]) == 2
    assert run(["experiment", "bias", "--threads", "0", "--out", str(tmp_path)]) == 2
    cfg = write_json(tmp_path / "b.json", {"version": 1, "checks": ["nope"]})
    assert run(["experiment", "geometry", "--config", cfg, "--out", str(tmp_path / "g")]) == 2


def test_runtime_error_exit_1(tmp_path):
    cfg = write_json(tmp_path / "c.json", {"version": 1, "data": str(tmp_path / "missing.csv"),
                                           "sampler": {"kind": "mondrian", "lifetime": 2.0}})
    assert run(["fit", "--config", cfg, "--out", str(tmp_path / "o")]) == 1


def test_bias_csv_golden_across_runs_and_threads(tmp_path):
    cfg = write_json(tmp_path / "c.json", {"version": 1, "lifetimes": [2.0, 5.0], "n_x": 200, "n_mc": 20,
                                           "replicates": 6})
    texts = []
    for i, threads in enumerate(("1", "1", "2")):
        out = tmp_path / f"o{i}"
        assert run(["experiment", "bias", "--config", cfg, "--seed", "17", "--threads", threads,
                    "--out", str(out), "--assert"]) == 0
        texts.append((out / "bias.csv").read_bytes())
    assert texts[0] == texts[1] == texts[2]
    rows = read_rows(tmp_path / "o0" / "bias.csv")
    assert [float(r["lambda"]) for r in rows] == [2.0, 5.0]
    assert all(r["pass"] == "true" for r in rows)


def test_seed_changes_output(tmp_path):
    cfg = write_json(tmp_path / "c.json", {"version": 1, "lifetimes": [3.0], "n_x": 100, "n_mc": 10,
                                           "replicates": 3})
    for seed in ("1", "2"):
        assert run(["experiment", "bias", "--config", cfg, "--seed", seed, "--out", str(tmp_path / seed)]) == 0
    assert (tmp_path / "1" / "bias.csv").read_bytes() != (tmp_path / "2" / "bias.csv").read_bytes()


def test_geometry_assert_fails_only_on_proof_constant_rows(tmp_path):
    cfg = write_json(tmp_path / "c.json", SMALL_GEOMETRY)
    out = tmp_path / "o"
    assert run(["experiment", "geometry", "--config", cfg, "--seed", "2", "--out", str(out), "--assert"]) == 3
    rows = read_rows(out / "geometry.csv")
    failing = {r["check_id"] for r in rows if r["pass"] == "false"}
    assert failing
    assert all(c.startswith("deter_") and not c.startswith("deter_corrected") for c in failing)


def test_geometry_without_deter_passes(tmp_path):
    cfg = dict(SMALL_GEOMETRY, checks=["leaf_count", "zero_cell", "erlang"])
    path = write_json(tmp_path / "c.json", cfg)
    out = tmp_path / "o"
    assert run(["experiment", "geometry", "--config", path, "--seed", "2", "--out", str(out), "--assert",
                "--plot"]) == 0
    assert (out / "geometry.svg").read_text().lstrip().startswith("<?xml")


def test_suboptimality_small(tmp_path):
    cfg = write_json(tmp_path / "c.json", {"version": 1, "lifetimes": [5.0], "weights": [[0.7, 0.3]],
                                           "n": 1000, "replicates": 4, "n_test": 300})
    out = tmp_path / "o"
    assert run(["experiment", "suboptimality", "--config", cfg, "--out", str(out), "--assert"]) == 0
    rows = read_rows(out / "suboptimality.csv")
    assert len(rows) == 1 and float(rows[0]["empirical_risk"]) >= float(rows[0]["lower_bound"])


def test_equivalence_small(tmp_path):
    from stitforest.labx.geometry import DEFAULT_EQUIVALENCE

    cfg = write_json(tmp_path / "c.json", {"version": 1, "reps": 200, "configs": [DEFAULT_EQUIVALENCE[0]]})
    out = tmp_path / "o"
    assert run(["experiment", "equivalence", "--config", cfg, "--out", str(out), "--assert"]) == 0
    assert len(read_rows(out / "equivalence.csv")) == 3


@pytest.mark.parametrize("sampler", [
    {"kind": "mondrian", "lifetime": 4.0},
    {"kind": "stit", "lifetime": 3.0, "directions": [[1.0, 0.0], [0.6, 0.8]], "weights": [0.5, 0.5]},
    {"kind": "oblique", "lifetime": 3.0, "matrix": [[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]]},
], ids=["mondrian", "stit", "oblique"])
def test_sample_tessellation(tmp_path, sampler):
    cfg = write_json(tmp_path / "c.json", {"version": 1, "sampler": sampler})
    out = tmp_path / "o"
    assert run(["sample-tessellation", "--config", cfg, "--seed", "4", "--out", str(out), "--plot"]) == 0
    tree = json.loads((out / "tessellation.json").read_text())
    assert tree["dim"] == 2
    assert (out / "tessellation.svg").exists()
    first = (out / "tessellation.json").read_bytes()
    assert run(["sample-tessellation", "--config", cfg, "--seed", "4", "--out", str(out)]) == 0
    assert (out / "tessellation.json").read_bytes() == first


def test_fit_predict_flow(tmp_path):
    g = stream(5)
    X = g.random((300, 2))
    Dataset(X, X[:, 0] + 0.1 * g.standard_normal(300)).to_csv(tmp_path / "train.csv")
    Q = g.random((25, 2))
    np.savetxt(tmp_path / "q.csv", Q, delimiter=",", header="x0,x1", comments="")
    fit_cfg = write_json(tmp_path / "fit.json", {"version": 1, "data": str(tmp_path / "train.csv"), "M": 3,
                                                 "sampler": {"kind": "mondrian", "lifetime": 4.0}})
    assert run(["fit", "--config", fit_cfg, "--seed", "8", "--out", str(tmp_path / "m")]) == 0
    pred_cfg = write_json(tmp_path / "pred.json", {"version": 1, "model": str(tmp_path / "m" / "model.json"),
                                                   "points": str(tmp_path / "q.csv")})
    assert run(["predict", "--config", pred_cfg, "--out", str(tmp_path / "p")]) == 0
    rows = read_rows(tmp_path / "p" / "predictions.csv")
    assert len(rows) == 25
    from stitforest.regress import load_model

    model = load_model(tmp_path / "m" / "model.json")
    assert np.array_equal([float(r["prediction"]) for r in rows], model.predict(Q))


def test_console_script_runs(tmp_path):
    res = subprocess.run([sys.executable, "-m", "stitforest", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "experiment" in res.stdout
