import csv
import json
import math
import shutil
from pathlib import Path

import pytest

from qmetric.cli import EXIT_CONFIG, EXIT_CONTRACT, EXIT_NUMERICAL, EXIT_OK, main, run

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0] == "# qmetric-trace v1"
    return list(csv.DictReader(lines[1:]))


def test_certify_half_identity(tmp_path):
    res = run(CONFIGS / "certify_half.json", tmp_path, "certify")
    assert res.code == EXIT_OK
    rep = json.loads((tmp_path / "report.json").read_text())
    assert all(c["verdict"] == "pass" for c in rep["certifications"])
    assert rep["status"] == "ok"


def test_certify_expected_failure_is_contract_violation():
    cfg = {"experiment": "certify", "n": 2, "operator": {"kind": "scaled_identity", "scale": 2.0},
           "property": {"kind": "nonexpansive"}}
    assert run(cfg).code == EXIT_CONTRACT
    assert run(cfg | {"expect": "fail"}).code == EXIT_OK


def test_divergent_iteration(tmp_path):
    res = run(CONFIGS / "iterate_divergent.json", tmp_path, "iterate")
    assert res.code == EXIT_NUMERICAL
    assert res.report["divergence_k"] > 500


def test_pdhg_lasso_writes_outputs(tmp_path):
    res = run(CONFIGS / "pdhg_lasso.json", tmp_path, "pdhg")
    assert res.code == EXIT_OK, res.message
    assert set(res.outputs) == {"trace.csv", "report.json"}
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["fejer_monotone"] and rep["block_metric_pd"]
    assert rep["max_equivalence_residual"] <= 1e-10
    rows = read_csv(tmp_path / "trace.csv")
    assert rows[0]["k"] == "0"


@pytest.mark.parametrize("name,verb", [("iterate_affine", "iterate"), ("ppa_strong", "resolvent"),
                                       ("regime", "regime")])
def test_shipped_configs_ok(tmp_path, name, verb):
    res = run(CONFIGS / f"{name}.json", tmp_path, verb)
    assert res.code == EXIT_OK, res.message


@pytest.mark.parametrize("raw", [
    {"experiment": "nope"},
    {"experiment": "certify", "n": 2, "operator": {"kind": "scaled_identity", "scale": 0.5}},
    {"experiment": "banach_picard", "n": 2, "operator": {"kind": "mystery"}},
    {"experiment": "banach_picard", "n": 2, "operator": {"kind": "scaled_identity", "scale": 0.5},
     "run": {"max_iter": 0}},
    {"experiment": "banach_picard", "n": 2, "operator": {"kind": "scaled_identity", "scale": 0.5},
     "run": {"bogus": 1}},
    {"experiment": "rppa", "n": 2, "monotone": {"kind": "zero"}, "run": {"gamma": 2.0}},
])
def test_bad_configs(raw):
    assert run(raw).code == EXIT_CONFIG


def test_verb_mismatch_and_missing_file(tmp_path):
    assert run(CONFIGS / "certify_half.json", None, "pdhg").code == EXIT_CONFIG
    assert run(tmp_path / "absent.json").code == EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["certify", str(bad), "-o", str(tmp_path / "o")]) == EXIT_CONFIG


def test_main_exit_code(tmp_path, capsys):
    assert main(["certify", str(CONFIGS / "certify_half.json"), "-o", str(tmp_path)]) == EXIT_OK
    assert "ok (0)" in capsys.readouterr().out


def test_csv_deterministic(tmp_path):
    for cfg in ("pdhg_lasso", "iterate_affine", "ppa_strong"):
        verb = {"pdhg_lasso": "pdhg", "iterate_affine": "iterate", "ppa_strong": "resolvent"}[cfg]
        a, b = tmp_path / f"{cfg}_a", tmp_path / f"{cfg}_b"
        assert run(CONFIGS / f"{cfg}.json", a, verb).code == EXIT_OK
        assert run(CONFIGS / f"{cfg}.json", b, verb).code == EXIT_OK
        assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
        assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_bound_rows_rederivable(tmp_path):
    assert run(CONFIGS / "iterate_affine.json", tmp_path).code == EXIT_OK
    rows = read_csv(tmp_path / "trace.csv")
    d0 = float(rows[0]["dist_Q"])
    factor = math.sqrt(0.75 / 0.25)  # a = gamma alpha = 1.5 * 0.5
    for row in rows[:-1]:
        k = int(row["k"])
        assert float(row["bound_PointwiseSqrtK"]) == pytest.approx(factor * d0 / math.sqrt(k + 1), rel=1e-14)
        assert float(row["seq_err_Q"]) <= float(row["bound_PointwiseSqrtK"])
    nu = 1 - 0.75 + 0.75 * 1e-8
    for prev, row in zip(rows, rows[1:]):
        if row["bound_QLinear"]:
            assert float(row["bound_QLinear"]) == pytest.approx(math.sqrt(nu) * float(prev["dist_Q"]), rel=1e-12)


def test_batch_isolation(tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text(json.dumps({"experiment": "certify"}))
    good = tmp_path / "certify_half.json"
    shutil.copy(CONFIGS / "certify_half.json", good)
    out = tmp_path / "out"
    code = main(["batch", str(broken), str(good), str(CONFIGS / "pdhg_lasso.json"), "-o", str(out)])
    assert code == EXIT_CONFIG
    assert json.loads((out / "broken" / "report.json").read_text())["status"] == "config_error"
    assert json.loads((out / "certify_half" / "report.json").read_text())["status"] == "ok"
    assert (out / "pdhg_lasso" / "trace.csv").exists()


def test_seed_override_changes_samples(tmp_path):
    a = run(CONFIGS / "certify_half.json", overrides={"seed": 1})
    b = run(CONFIGS / "certify_half.json", overrides={"seed": 2})
    assert a.code == b.code == EXIT_OK
    assert a.report["seed"] == 1 and b.report["seed"] == 2
    ca, cb = a.report["certifications"][0], b.report["certifications"][0]
    assert ca["seed"] == 1 and ca["worst_pair"] != cb["worst_pair"]
