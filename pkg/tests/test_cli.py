import json

import numpy as np
import pytest

from bartgp.cli import EXIT_DATA, EXIT_OK, EXIT_USAGE, main
from bartgp.data import read_csv, write_csv


@pytest.fixture()
def regression_csvs(tmp_path):
    gen = np.random.default_rng(0)
    X = gen.normal(size=(50, 3))
    y = 2.0 * X[:, 0] + 0.4 * gen.normal(size=50)
    write_csv(tmp_path / "train.csv",
              {"x1": X[:, 0], "x2": X[:, 1], "x3": X[:, 2], "y": y})
    Xte = gen.normal(size=(12, 3)) * 1.8
    write_csv(tmp_path / "test.csv", {"x1": Xte[:, 0], "x2": Xte[:, 1], "x3": Xte[:, 2]})
    return tmp_path


def _fit_args(d, model="m.json", seed="1"):
    return ["fit", "--train", str(d / "train.csv"), "--response-col", "y",
            "--model", str(d / model), "--sweeps", "20", "--burnin", "4",
            "--seed", seed]


def test_fit_is_byte_deterministic(regression_csvs, capsys):
    d = regression_csvs
    assert main(_fit_args(d, "a.json")) == EXIT_OK
    assert main(_fit_args(d, "b.json")) == EXIT_OK
    assert (d / "a.json").read_bytes() == (d / "b.json").read_bytes()
    assert main(_fit_args(d, "c.json", seed="2")) == EXIT_OK
    assert (d / "a.json").read_bytes() != (d / "c.json").read_bytes()


def test_predict_roundtrip(regression_csvs):
    d = regression_csvs
    assert main(_fit_args(d)) == EXIT_OK
    rc = main(["predict", "--model", str(d / "m.json"), "--test", str(d / "test.csv"),
               "--out", str(d / "p.csv"), "--alpha", "0.1", "--seed", "3"])
    assert rc == EXIT_OK
    out = read_csv(d / "p.csv")
    assert out.n == 12 and out.p == 4  # point_id, mean, lo, hi
    lo, hi = out.X[:, 2], out.X[:, 3]
    assert np.all(lo <= hi)


def test_gp_predict_contract_columns(regression_csvs):
    d = regression_csvs
    assert main(_fit_args(d)) == EXIT_OK
    rc = main(["gp-predict", "--model", str(d / "m.json"), "--train", str(d / "train.csv"),
               "--response-col", "y", "--test", str(d / "test.csv"),
               "--out", str(d / "gp.csv"), "--alpha", "0.1", "--seed", "4"])
    assert rc == EXIT_OK
    header = (d / "gp.csv").read_text().splitlines()[0]
    assert header == "point_id,mean,lo,hi,exterior_any_leaf"
    out = read_csv(d / "gp.csv")
    frac = out.X[:, 4]
    assert np.all((frac >= 0.0) & (frac <= 1.0))


def test_gp_predict_requires_train(regression_csvs, capsys):
    d = regression_csvs
    assert main(_fit_args(d)) == EXIT_OK
    rc = main(["gp-predict", "--model", str(d / "m.json"), "--response-col", "y",
               "--test", str(d / "test.csv"), "--out", str(d / "x.csv")])
    assert rc == EXIT_USAGE
    err = capsys.readouterr().err
    assert "error: usage:" in err and "condition" in err


def test_missing_file_is_data_error(regression_csvs, capsys):
    d = regression_csvs
    rc = main(["predict", "--model", str(d / "nope.json"), "--test", str(d / "test.csv"),
               "--out", str(d / "p.csv")])
    assert rc == EXIT_DATA
    assert capsys.readouterr().err.startswith("error: data:")


def test_bad_subcommand_is_usage_error(capsys):
    assert main(["not-a-command"]) == EXIT_USAGE


def test_version(capsys):
    assert main(["version"]) == EXIT_OK
    assert capsys.readouterr().out.strip()


def test_conformal_baseline_via_predict(regression_csvs):
    d = regression_csvs
    rc = main(["predict", "--baseline", "cv+", "--folds", "5",
               "--train", str(d / "train.csv"), "--response-col", "y",
               "--test", str(d / "test.csv"), "--out", str(d / "cv.csv"),
               "--trees", "4", "--sweeps", "10", "--burnin", "2", "--seed", "5"])
    assert rc == EXIT_OK
    out = read_csv(d / "cv.csv")
    assert out.n == 12


def test_bench_subcommand(tmp_path):
    spec = {"dgp": "linear",
            "params": {"n_train": 30, "n_test": 20, "num_trees": 3, "num_sweeps": 8,
                       "burn_in": 2},
            "methods": ["xbart"], "reps": 1, "alpha": 0.1, "seed": 1,
            "output": str(tmp_path / "r.csv")}
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(spec))
    assert main(["bench", "--spec", str(p)]) == EXIT_OK
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "method,region,rep,rmse,coverage,il,time_s"
    assert len(lines) == 1 + 3 + 6  # header, 1 rep x 3 regions, mean/sd x 3


def test_causal_cli_roundtrip(tmp_path):
    gen = np.random.default_rng(1)
    n = 150
    X = gen.normal(size=(n, 2))
    pi = np.clip(0.5 + 0.3 * X[:, 0], 0.05, 0.95)
    z = (gen.uniform(size=n) < pi).astype(float)
    y = X[:, 0] + 2.0 * z + 0.3 * gen.normal(size=n)
    write_csv(tmp_path / "train.csv", {"x1": X[:, 0], "x2": X[:, 1], "z": z, "y": y})
    write_csv(tmp_path / "test.csv", {"x1": X[:8, 0], "x2": X[:8, 1]})
    rc = main(["causal-fit", "--train", str(tmp_path / "train.csv"), "--response-col", "y",
               "--treatment-col", "z", "--model", str(tmp_path / "cm.json"),
               "--lmu", "5", "--ltau", "5", "--sweeps", "12", "--burnin", "2",
               "--nmin-arm", "5", "--seed", "2"])
    assert rc == EXIT_OK
    rc = main(["causal-predict", "--model", str(tmp_path / "cm.json"),
               "--test", str(tmp_path / "test.csv"), "--out", str(tmp_path / "c.csv")])
    assert rc == EXIT_OK
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "point_id,cate_mean,lo,hi"
    rc = main(["causal-predict", "--model", str(tmp_path / "cm.json"), "--gp",
               "--train", str(tmp_path / "train.csv"), "--response-col", "y",
               "--treatment-col", "z", "--test", str(tmp_path / "test.csv"),
               "--out", str(tmp_path / "cgp.csv"), "--seed", "3"])
    assert rc == EXIT_OK
    header = (tmp_path / "cgp.csv").read_text().splitlines()[0]
    assert header == "point_id,cate_mean,lo,hi,nonoverlap_any_leaf"
