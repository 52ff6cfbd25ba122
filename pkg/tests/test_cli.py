import csv
import io
import json

import numpy as np
import pytest

from heomcp import __version__
from heomcp.cli import run


def call(capsys, *argv):
    code = run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_certify_jc(capsys):
    code, out, _ = call(capsys, "certify", "--model", "jaynes_cummings", "--gamma", "10", "--zeta", "1")
    assert code == 0
    data = json.loads(out)
    assert data["result"]["certificate"]["status"] == "certified"
    assert data["version"] == __version__
    assert data["config"]["parameters"] == {"gamma": 10.0, "zeta": 1.0}
    assert data["config"]["tol_v"] == 1e-9


def test_output_is_deterministic(capsys):
    argv = ["certify", "--model", "bath", "--gamma-plus", "1.2", "--gamma-minus", "0.8", "--omega", "1", "--xi", "0.5"]
    _, a, _ = call(capsys, *argv)
    _, b, _ = call(capsys, *argv)
    assert a == b


def test_uncertified_exit_code(capsys):
    code, out, _ = call(capsys, "certify", "--model", "spin_boson", "--gamma", "3", "--delta", "2", "--beta", "0.8")
    assert code == 1
    assert json.loads(out)["result"]["analytic"]["status"] == "not_available"


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["certify"],
    ["certify", "--model", "jaynes_cummings", "--gamma", "1"],
    ["certify", "--model", "jaynes_cummings", "--gamma", "1", "--zeta", "x"],
    ["certify", "--model", "jaynes_cummings", "--gamma", "1", "--zeta", "1", "--foo", "2"],
    ["certify", "--model", "jaynes_cummings", "--gamma"],
    ["certify", "--model", "jaynes_cummings", "--model-json", "m.json"],
    ["sweep", "--model", "jaynes_cummings", "--gamma", "1", "--zeta", "1"],
    ["sweep", "--model", "jaynes_cummings", "--gamma", "0:1", "--zeta", "1"],
    ["bound-floor", "--model", "spin_boson", "--gamma", "1", "--delta", "0.2", "--beta", "0.2", "--delta-min", "-1"],
    ["models", "--gamma", "1"],
])
def test_usage_errors(capsys, argv):
    assert run(argv) == 2


def test_malformed_json_model(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert run(["certify", "--model-json", str(path)]) == 2


def test_json_model(capsys, tmp_path):
    model = {"levels": 2, "blocks": [
        {"i": 1, "j": 1, "terms": [{"coeff": 0.25, "left": "sz", "right": "sz"}, {"coeff": -0.25, "left": "id", "right": "id"}]},
        {"i": 1, "j": 2, "terms": [{"coeff": 1.0, "left": "id", "right": "id"}]},
        {"i": 2, "j": 1, "terms": [{"coeff": 4.0, "left": "sz", "right": "sz"}, {"coeff": -4.0, "left": "id", "right": "id"}]},
        {"i": 2, "j": 2, "terms": [{"coeff": 0.5, "left": "sz", "right": "sz"}]}]}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(model))
    code, out, _ = call(capsys, "certify", "--model-json", str(path))
    assert code == 0
    assert json.loads(out)["result"]["certificate"]["status"] == "certified"


def test_models_listing(capsys):
    code, out, _ = call(capsys, "models")
    assert code == 0
    assert set(json.loads(out)["result"]) == {"jaynes_cummings", "reviving_2level", "reviving_3level", "bath",
                                              "spin_boson"}


def test_propagate_csv(capsys, tmp_path):
    path = tmp_path / "p.csv"
    code, _, _ = call(capsys, "propagate", "--model", "reviving_2level", "--gamma1", "0.5", "--gamma2", "0.5",
                      "--alpha", "4", "--t-end", "1", "--dt", "0.25", "--format", "csv", "--output", str(path))
    assert code == 0
    rows = list(csv.reader(path.open()))
    assert rows[0][:2] == ["t", "eig1"] and len(rows) == 6


def test_propagate_coherence(capsys):
    code, out, _ = call(capsys, "propagate", "--model", "reviving_2level", "--gamma1", "0.5", "--gamma2", "0.5",
                        "--alpha", "4", "--t-end", "1", "--dt", "0.5", "--coherence", "x")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["t", "x"] and float(rows[1][1]) == 1.0


def test_certify_after_tp(capsys):
    code, out, _ = call(capsys, "certify-after-tp", "--model", "spin_boson", "--gamma", "3", "--delta", "2",
                        "--beta", "0.8")
    assert code == 0
    cert = json.loads(out)["result"]["certificate"]
    assert cert["status"] == "certified_after_tp"
    assert 0.54 <= cert["diagnostics"]["t_p"] <= 0.66


def test_nonmarkov(capsys, tmp_path):
    path = tmp_path / "n.csv"
    code, out, _ = call(capsys, "nonmarkov", "--model", "reviving_2level", "--gamma1", "0.5", "--gamma2", "0.5",
                        "--alpha", "0", "--csv", str(path))
    assert code == 0
    assert abs(json.loads(out)["result"]["N"]) <= 1e-6
    assert path.read_text().startswith("t,N")


def test_synthesize(capsys):
    code, out, _ = call(capsys, "synthesize", "--preset", "generalized", "--gamma", "0.5", "--alpha", "0.3")
    assert code == 0
    data = json.loads(out)["result"]
    assert data["synthesis"]["depth"] == 3 and data["synthesis"]["deviation"] <= 1e-8
    assert run(["synthesize", "--preset", "reviving", "--zeta", "1"]) == 2


def test_sweep_csv(capsys, monkeypatch):
    argv = ["sweep", "--model", "reviving_3level", "--alpha-tilde", "-1:3:3", "--beta-tilde", "-2:3:3"]
    code, serial, _ = call(capsys, *argv)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(serial)))
    assert len(rows) == 9
    assert {r["label"] for r in rows} <= {"analytic", "numeric", "violating", "undecided"}
    assert rows[0]["alpha_tilde"] == "-1.0" and rows[-1]["beta_tilde"] == "3.0"
    monkeypatch.setenv("HEOMCP_THREADS", "2")
    _, parallel, _ = call(capsys, *argv)
    assert parallel == serial


def test_sweep_json(capsys):
    code, out, _ = call(capsys, "sweep", "--model", "jaynes_cummings", "--gamma", "-1:1:3", "--zeta", "1",
                        "--format", "json")
    assert code == 0
    data = json.loads(out)
    labels = [row[1] for row in data["result"]["rows"]]
    assert labels[-1] in ("analytic", "numeric") and labels[0] != "analytic"
    assert np.isclose(data["result"]["rows"][1][0], 0.0)
