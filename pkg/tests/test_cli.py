import csv
import json

import numpy as np
import pytest

from epkr.cli import main
from epkr.data import gen_toy


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def printed(text, label):
    line = next(l for l in text.splitlines() if l.startswith(label))
    return float(line.split(":")[1])


def write_toy_csv(path, m=100, seed=7, sigma_sq=0.0, header=False):
    data = gen_toy(m, sigma_sq, seed)
    with open(path, "w") as fh:
        if header:
            fh.write("x,y\n")
        for x, y in zip(data.inputs[:, 0], data.targets):
            fh.write(f"{float(x)!r},{float(y)!r}\n")
    return data


def test_fit_smoke_and_determinism(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    code, out, _ = run(capsys, "fit", "--toy", "100", "0.0", "--method", "epkr", "--s", "5", "--seed", "1", "-o", str(a))
    assert code == 0 and a.exists() and "TrainRMSE" in out
    run(capsys, "fit", "--toy", "100", "0.0", "--method", "epkr", "--s", "5", "--seed", "1", "-o", str(b))
    assert a.read_bytes() == b.read_bytes()
    model = json.loads(a.read_text())
    assert {"variant", "degree", "basis", "coefficients", "clip_bound", "normalization"} <= set(model)


def test_fit_guard_n_exceeds_m(capsys):
    code, _, err = run(capsys, "fit", "--toy", "50", "0.0", "--method", "epkr", "--s", "60")
    assert code == 1 and "n = 61" in err and "m = 50" in err


def test_fit_high_degree_on_hundred_points_fails_cleanly(capsys):
    code, _, err = run(capsys, "fit", "--toy", "100", "0.0", "--method", "epkr", "--s", "60")
    assert code == 3 and "rank" in err and err.count("\n") == 1


def test_usage_errors_exit_one(capsys):
    assert run(capsys, "fit", "--bogus")[0] == 1
    assert run(capsys, "fit", "--toy", "50", "0.1", "--method", "pkr", "--s", "3")[0] == 1
    assert run(capsys)[0] == 1
    assert run(capsys, "--help")[0] == 0


def test_missing_file_exit_two(tmp_path, capsys):
    code, _, err = run(capsys, "fit", "--data", str(tmp_path / "none.csv"), "--s", "2")
    assert code == 2 and "no such file" in err


def test_bad_cell_exit_two(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("1,2\nabc,3\n")
    code, _, err = run(capsys, "fit", "--data", str(p), "--s", "1")
    assert code == 2 and "row 2" in err


def test_fit_predict_round_trip(tmp_path, capsys):
    data_path = tmp_path / "train.csv"
    write_toy_csv(data_path, sigma_sq=0.1)
    model_path = tmp_path / "m.json"
    _, out, _ = run(capsys, "fit", "--data", str(data_path), "--method", "epkr", "--s", "6", "-o", str(model_path))
    preds = tmp_path / "p.csv"
    code, out2, _ = run(capsys, "predict", str(model_path), str(data_path), "-o", str(preds))
    assert code == 0
    assert printed(out2, "TestRMSE") == pytest.approx(printed(out, "TrainRMSE"), abs=1e-10)
    rows = list(csv.DictReader(open(preds)))
    assert len(rows) == 100
    bound = json.loads(model_path.read_text())["clip_bound"]
    assert all(abs(float(r["prediction"])) <= bound for r in rows)


@pytest.mark.parametrize(
    "args",
    [
        ("--method", "pkr", "--s", "4", "--lam", "1e-4"),
        ("--method", "cbr-epkr", "--s", "4", "--lam", "1e-3"),
        ("--method", "gkr", "--delta", "0.2", "--lam", "1e-4"),
        ("--method", "epkr", "--select", "cv"),
        ("--method", "epkr", "--select", "holdout", "--centers", "first"),
        ("--method", "pkr", "--select", "cv", "--s-cap", "6"),
    ],
)
def test_fit_predict_all_methods(tmp_path, capsys, args):
    data_path = tmp_path / "train.csv"
    write_toy_csv(data_path, m=60, sigma_sq=0.05, header=True)
    model_path = tmp_path / "m.json"
    code, out, _ = run(capsys, "fit", "--data", str(data_path), "--header", *args, "-o", str(model_path))
    assert code == 0
    code, _, err = run(capsys, "predict", str(model_path), str(data_path), "--header")
    assert code == 0
    assert printed(err, "TestRMSE") == pytest.approx(printed(out, "TrainRMSE"), abs=1e-10)


def test_predict_zero_model_and_no_clip(tmp_path, capsys):
    model = {
        "variant": "EPKR", "degree": 2, "width": None, "lambda": 0.0, "clip_bound": 0.5,
        "center_strategy": None, "basis": [[0.1], [0.4], [0.9]], "coefficients": [0.0, 0.0, 0.0],
        "normalization": None, "notes": [],
    }
    mp = tmp_path / "zero.json"
    mp.write_text(json.dumps(model))
    xs = tmp_path / "x.csv"
    xs.write_text("0.2\n0.5\n")
    code, out, _ = run(capsys, "predict", str(mp), str(xs))
    assert code == 0 and out.splitlines()[1:] == ["0", "0"]
    model["coefficients"] = [5.0, 0.0, 0.0]
    mp.write_text(json.dumps(model))
    _, out, _ = run(capsys, "predict", str(mp), str(xs))
    assert all(float(v) == 0.5 for v in out.splitlines()[1:])
    _, out, _ = run(capsys, "predict", str(mp), str(xs), "--no-clip")
    assert all(float(v) > 0.5 for v in out.splitlines()[1:])


def test_predict_errors(tmp_path, capsys):
    mp = tmp_path / "bad.json"
    mp.write_text("{not json")
    xs = tmp_path / "x.csv"
    xs.write_text("0.2,0.1,0.3\n")
    assert run(capsys, "predict", str(mp), str(xs))[0] == 2
    good = tmp_path / "m.json"
    run(capsys, "fit", "--toy", "30", "0.0", "--s", "2", "-o", str(good))
    code, _, err = run(capsys, "predict", str(good), str(xs))
    assert code == 2 and "columns" in err


def test_csv_normalization_applied_in_predict(tmp_path, capsys):
    rng = np.random.default_rng(0)
    x = rng.uniform(10, 30, (80, 2))
    y = np.sin(x[:, 0] / 5) + 0.01 * x[:, 1]
    p = tmp_path / "d.csv"
    np.savetxt(p, np.c_[x, y], delimiter=",")
    mp = tmp_path / "m.json"
    _, out, _ = run(capsys, "fit", "--data", str(p), "--s", "4", "-o", str(mp))
    record = json.loads(mp.read_text())["normalization"]
    assert record is not None and record["radial"] >= 1
    _, _, err = run(capsys, "predict", str(mp), str(p))
    assert printed(err, "TestRMSE") == pytest.approx(printed(out, "TrainRMSE"), abs=1e-10)


def test_toy_table_command(tmp_path, capsys):
    out_csv = tmp_path / "t.csv"
    args = ("toy-table", "--replicates", "1", "--m", "60", "--m-test", "30", "--methods", "EPKR,PKR", "-o", str(out_csv))
    assert run(capsys, *args)[0] == 0
    rows = list(csv.DictReader(open(out_csv)))
    assert [r["method"] for r in rows] == ["EPKR", "PKR"]
    assert list(rows[0]) == [
        "method", "param_s", "param_lambda", "param_delta", "train_rmse", "test_rmse",
        "train_seconds", "test_seconds", "sparsity", "replicates", "seed",
    ]


def test_sweep_commands(tmp_path, capsys):
    for over, extra in (
        ("lambda", ("--method", "cbr-epkr", "--s", "4", "--grid", "1e-4,1e-2,1")),
        ("s", ("--grid", "1,2,3")),
        ("m", ("--grid", "40,80")),
    ):
        out_csv = tmp_path / f"{over}.csv"
        code, _, _ = run(capsys, "sweep", over, *extra, "--replicates", "2", "--m", "60", "--m-test", "30", "-o", str(out_csv))
        assert code == 0
        rows = list(csv.DictReader(open(out_csv)))
        assert len(rows) in (2, 3) and rows[0]["variable"] == over


def test_sweep_auto_degree(capsys):
    code, out, err = run(capsys, "sweep", "lambda", "--method", "cbr-epkr", "--grid", "1e-3,1e-1", "--replicates", "1", "--m", "60", "--m-test", "30")
    assert code == 0 and "CV-selected s" in err and out.startswith("variable,")


def test_diagnostics_eig_single_case(tmp_path, capsys):
    report = tmp_path / "r.json"
    code, _, err = run(capsys, "diagnostics", "--eig", "d=2", "s=2", "seeds=100", "-o", str(report))
    data = json.loads(report.read_text())
    case = data["eig_bound"][0]
    assert case["trials"] == 100 and (case["d"], case["s"]) == (2, 2)
    assert code == (0 if case["passed"] else 3)
    if not case["passed"]:
        assert "FAIL eig_bound d=2 s=2" in err


def test_diagnostics_norm_equiv(capsys):
    code, out, _ = run(capsys, "diagnostics", "--norm-equiv", "s=2", "m=600", "seeds=20")
    case = json.loads(out)["norm_equivalence"][0]
    assert code == 0 and case["passed"] and case["m"] == 600


def test_diagnostics_bad_key_value(capsys):
    assert run(capsys, "diagnostics", "--eig", "d2")[0] == 1


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "epkr", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and "0.1.0" in res.stdout
