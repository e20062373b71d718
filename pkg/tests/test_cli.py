import io
import json

import numpy as np
import pytest

from skipfree.cli import dumps, jsonable, run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    status = run(list(argv), out, err)
    return status, out.getvalue(), err.getvalue()


def test_validate_preset():
    status, out, _ = call("validate", "--model", "pure-death")
    assert status == 0 and json.loads(out)["valid"]


def test_validate_config_file(tmp_path):
    p = tmp_path / "m.json"
    p.write_text(json.dumps({"schema_version": 1, "down_rate": 1.0, "killing": {"rule": "sites", "sites": {"1": 1.0}}, "n_max": 30}))
    status, out, _ = call("validate", "--model", str(p))
    assert status == 0 and json.loads(out)["model"]["n_max"] == 30


def test_qsd_geometric():
    status, out, _ = call("qsd", "--model", "pure-death", "--theta", "0.5")
    probs = json.loads(out)["probs"]
    np.testing.assert_allclose(probs[:20], 0.5 ** np.arange(1, 21), rtol=1e-12)


def test_cmd_flag_equivalent_to_positional():
    assert call("--cmd", "decay", "--model", "pure-death")[1] == call("decay", "--model", "pure-death")[1]


@pytest.mark.parametrize(
    "argv, code, name",
    [
        (["decay", "--model", "no-such-model"], 2, "ConfigError"),
        (["exit", "--model", "pure-death", "--i", "3", "--N", "2"], 2, "InvalidQuery"),
        (["qsd", "--model", "pure-death", "--theta", "1.01"], 3, "NegativeMass"),
        (["qsd", "--model", "linear-killing", "--theta", "1.0", "--n-max", "100"], 4, "SmallKillingNotEstablished"),
    ],
)
def test_exit_codes(argv, code, name):
    status, out, err = call(*argv)
    assert status == code and name in err and out == ""


def test_json_round_trip():
    status, out, _ = call("decay", "--model", "bd-drift-down", "--n-max", "100")
    data = json.loads(out)
    assert dumps(data) == out
    assert all(isinstance(v, float) for v in data["estimates"])


def test_non_finite_becomes_null():
    assert jsonable({"a": float("inf"), "b": np.float64("nan"), "c": np.int64(3)}) == {"a": None, "b": None, "c": 3}


def test_csv_output():
    status, out, _ = call("decay", "--model", "pure-death", "--format", "csv")
    lines = out.strip().splitlines()
    assert lines[0] == "level,lambda" and len(lines) == 6


def test_simulate_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["simulate", "--model", "single-kill-site", "--x0", "5", "--n-paths", "500", "--seed", "9"]
    assert call(*args, "--out", str(a))[0] == 0
    assert call(*args, "--out", str(b))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_curve_csv():
    status, out, _ = call("simulate", "--model", "quadratic-death", "--x0", "6", "--n-paths", "2000",
                          "--t-grid", "0,0.5,1", "--format", "csv")
    assert status == 0 and out.splitlines()[0] == "t,tv,survivors,noise_floor"


def test_doob_and_classify_and_exit():
    status, out, _ = call("doob", "--model", "single-kill-site", "--n-max", "60", "--level", "4", "--q", "0.3")
    rows = json.loads(out)["rows"]
    assert status == 0 and rows[0]["down"] == pytest.approx(2.0)
    assert rows[0]["G_closed_form"] == pytest.approx(rows[0]["G_transformed"], rel=1e-12)
    status, out, _ = call("classify", "--model", "quadratic-death")
    assert json.loads(out)["regime"] == "Unique"
    status, out, _ = call("exit", "--model", "pure-death", "--i", "2", "--N", "5", "--omega", "1")
    assert json.loads(out)["downcross"] == pytest.approx(0.25)


def test_potential_table():
    status, out, _ = call("potential", "--model", "pure-death", "--omega", "1", "--level", "3")
    rows = {(r["i"], r["j"]): r["W"] for r in json.loads(out)["rows"]}
    assert rows[(0, 3)] == 4.0


def test_verify():
    status, out, _ = call("verify", "--n-models", "3")
    assert status == 0 and json.loads(out)["passed"]
