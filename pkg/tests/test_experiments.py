import csv
import io

import numpy as np
import pytest

from epkr.data import gen_toy
from epkr.experiments import (
    SWEEP_COLUMNS,
    ExperimentReport,
    compare_centers,
    loglog_slope,
    reports_to_csv,
    run_toy_table,
    span_invariance_rms,
    sweep_lambda,
    sweep_m,
    sweep_s,
    toy_replicate,
    write_csv,
)

TIMING = {"train_seconds", "test_seconds"}


@pytest.fixture(scope="module")
def small_table():
    return run_toy_table(2, seed=3, m=90, m_test=50, s_cap=12, methods=("GKR", "PKR", "EPKR", "EPKR1"))


def test_table_schema(small_table):
    assert [r.method for r in small_table] == ["GKR", "PKR", "EPKR", "EPKR1"]
    text = reports_to_csv(small_table)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 4
    assert tuple(rows[0].keys()) == ExperimentReport.COLUMNS
    assert ExperimentReport.COLUMNS == (
        "method", "param_s", "param_lambda", "param_delta", "train_rmse", "test_rmse",
        "train_seconds", "test_seconds", "sparsity", "replicates", "seed",
    )


def test_table_invariants(small_table):
    for r in small_table:
        assert r.train_rmse >= 0 and r.test_rmse >= 0
        assert r.train_seconds >= 0 and r.test_seconds >= 0
        assert r.sparsity >= 1 and r.replicates == 2
        assert r.test_rmse == pytest.approx(np.mean([row["test_rmse"] for row in r.per_replicate]))
    by = {r.method: r for r in small_table}
    assert by["GKR"].param_delta is not None and by["GKR"].param_s is None
    assert by["EPKR"].param_lambda is None
    assert by["EPKR"].sparsity == np.mean([row["params"]["s"] + 1 for row in by["EPKR"].per_replicate])
    assert by["PKR"].sparsity == 90


def test_table_deterministic_except_timing(small_table):
    again = run_toy_table(2, seed=3, m=90, m_test=50, s_cap=12, methods=("GKR", "PKR", "EPKR", "EPKR1"))
    for a, b in zip(small_table, again):
        ra, rb = a.row(), b.row()
        assert {k: v for k, v in ra.items() if k not in TIMING} == {k: v for k, v in rb.items() if k not in TIMING}


def test_threads_do_not_change_results(monkeypatch):
    base = run_toy_table(3, seed=1, m=60, m_test=30, s_cap=8, methods=("EPKR",), workers=1)
    par = run_toy_table(3, seed=1, m=60, m_test=30, s_cap=8, methods=("EPKR",), workers=3)
    assert base[0].test_rmse == par[0].test_rmse and base[0].param_s == par[0].param_s


def test_replicates_use_independent_streams():
    a_train, a_test = toy_replicate(0, 0, 50, 50, 0.1)
    b_train, _ = toy_replicate(0, 1, 50, 50, 0.1)
    assert not np.array_equal(a_train.inputs, b_train.inputs)
    assert not np.array_equal(a_train.inputs, a_test.inputs)


def test_sweeps_shape_and_columns():
    lam_rows = sweep_lambda("cbr-epkr", 4, [1e-4, 1e-2, 1.0], replicates=2, m=60, m_test=40)
    assert [r["value"] for r in lam_rows] == [1e-4, 1e-2, 1.0]
    assert all(set(r) == set(SWEEP_COLUMNS) for r in lam_rows)
    pkr_rows = sweep_lambda("pkr", 4, [1e-4, 1e-2], replicates=2, m=60, m_test=40)
    assert len(pkr_rows) == 2
    s_rows = sweep_s("epkr", [1, 3, 30], replicates=2, m=60, m_test=40)
    assert s_rows[-1]["verified_fraction"] < 1 <= s_rows[0]["verified_fraction"]
    m_rows = sweep_m([50, 100], replicates=2, m_test=40)
    assert [r["s"] for r in m_rows] == [2, 2]


def test_sweep_csv_round_trip():
    rows = sweep_lambda("cbr-epkr", 3, [1e-3, 1e-1], replicates=1, m=40, m_test=20)
    text = write_csv(rows, SWEEP_COLUMNS)
    parsed = list(csv.DictReader(io.StringIO(text)))
    assert float(parsed[1]["mean_test_rmse"]) == pytest.approx(rows[1]["mean_test_rmse"])


def test_large_lambda_shrinks_to_zero_error_level():
    rows = sweep_lambda("cbr-epkr", 4, [1e-6, 1e6], replicates=2, m=80, m_test=200)
    assert rows[1]["mean_test_rmse"] > rows[0]["mean_test_rmse"]


def test_loglog_slope_exact_power():
    m = np.array([100, 200, 400, 800])
    assert loglog_slope(m, 3.0 * m**-0.75) == pytest.approx(-0.75, abs=1e-12)


def test_compare_centers_keys():
    out = compare_centers(4, replicates=2, m=60, m_test=40)
    assert set(out) == {"uniform-ball", "first-samples", "equispaced-1d", "gaussian"}
    assert all(v > 0 for v in out.values())


def test_span_invariance_small():
    assert span_invariance_rms(gen_toy(200, 0.1, seed=2), 5) <= 1e-6


def test_unknown_method_rejected():
    with pytest.raises(Exception):
        run_toy_table(1, methods=("SVM",))
    with pytest.raises(Exception):
        sweep_lambda("gkr", 3, [0.1])
