import json
import math
import subprocess
import sys

import pytest

from lcgames import bounds, games
from lcgames.cli import UsageError, parse_dims, run
from lcgames.game_model import ConnectivityGraph, game_to_dict, serialize_game

COS2 = math.cos(math.pi / 8) ** 2


def invoke(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_classical_value(capsys):
    code, out, _ = invoke(capsys, "value", "--game", "catalog:distributed-chsh", "--method", "classical")
    assert code == 0
    assert json.loads(out) == {"method": "classical", "value": 0.75}


def test_simulate_magic_square(capsys):
    code, out, _ = invoke(capsys, "simulate", "--game", "catalog:distributed-magic-square")
    assert code == 0
    assert json.loads(out)["p_win"] == pytest.approx(1.0, abs=1e-10)


def test_simulate_needs_catalog_strategy(capsys):
    code, _, err = invoke(capsys, "simulate", "--game", "catalog:random-xor")
    assert code == 2 and json.loads(err)["error"] == "usage"


def test_npa_on_random_xor(capsys):
    code, out, _ = invoke(capsys, "value", "--game", "catalog:random-xor", "--method", "npa")
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(0.37157, abs=1e-4)


def test_xor_sdp_needs_two_parties(capsys):
    # without communication, three parties cannot be read as a two-party XOR game
    code, _, err = invoke(capsys, "value", "--game", "catalog:random-xor", "--method", "xor-sdp")
    assert code == 2 and "two parties" in json.loads(err)["message"]


def test_xor_sdp_through_aggregation(capsys, tmp_path):
    path = tmp_path / "game.json"
    path.write_text(serialize_game(games.random_xor(ConnectivityGraph.bidirected(3, [(0, 1)]))))
    code, out, _ = invoke(capsys, "value", "--game", str(path), "--method", "xor-sdp")
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(0.37440, abs=1e-4)


def test_forwarding_and_aggregated_methods(capsys):
    code, out, _ = invoke(capsys, "value", "--game", "catalog:extended-chsh", "--method", "forwarding-upper")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(0.75, abs=1e-4)
    code, out, _ = invoke(capsys, "value", "--game", "catalog:distributed-chsh", "--method", "aggregated-upper",
                          "--level", "1")
    assert code == 0 and json.loads(out)["value"] == pytest.approx(COS2, abs=1e-5)


def test_seesaw_with_trace(capsys, tmp_path):
    trace = tmp_path / "trace.jsonl"
    code, out, _ = invoke(capsys, "value", "--game", "catalog:distributed-chsh", "--method", "seesaw",
                          "--restarts", "2", "--seed", "3", "--dims", "2,2,2;0>1=2,1>0=2", "--trace", str(trace))
    assert code == 0
    value = json.loads(out)["value"]
    assert 0.75 - 1e-6 <= value <= COS2 + 1e-5
    records = [json.loads(line) for line in trace.read_text().splitlines()]
    assert records and {r["restart"] for r in records} <= {0, 1}


def test_output_is_deterministic(capsys, tmp_path):
    argv = ["value", "--game", "catalog:distributed-chsh", "--method", "seesaw", "--seed", "5", "--restarts", "2"]
    first = tmp_path / "a.json"
    second = tmp_path / "b.json"
    assert run(argv + ["--out", str(first)]) == 0
    assert run(argv + ["--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_sweep_csv(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    code, _, _ = invoke(capsys, "sweep", "--game", "catalog:perturbed-xor", "--taus", "0,3", "--out", str(out))
    assert code == 0
    text = out.read_text()
    assert text.splitlines()[0] == ",".join(bounds.SWEEP_COLUMNS)
    rows = bounds.sweep_from_csv(text)
    assert [r.regime for r in rows] == ["nonlocal", "full"]
    assert rows[0].omega_c == pytest.approx(0.38650, abs=1e-5)
    assert rows[0].omega_q_upper == pytest.approx(0.40052, abs=1e-3)


def test_sweep_json_format(capsys):
    code, out, _ = invoke(capsys, "sweep", "--game", "catalog:perturbed-xor", "--taus", "3", "--format", "json")
    assert code == 0
    assert json.loads(out)[0]["regime"] == "full"


def test_catalog_listing(capsys):
    code, out, _ = invoke(capsys, "catalog")
    names = [row["name"] for row in json.loads(out)]
    assert code == 0
    assert names == sorted(names)
    assert "perturbed-xor" in names and "xor2" in names


def test_validate_catalog_file(capsys, tmp_path):
    for name in ("distributed-chsh", "perturbed-xor", "extended-xor:11"):
        path = tmp_path / "game.json"
        path.write_text(serialize_game(games.get_game(name)))
        code, out, _ = invoke(capsys, "validate", "--game", str(path))
        assert code == 0 and json.loads(out)["valid"]


def test_validate_rejects_bad_prior(capsys, tmp_path):
    doc = game_to_dict(games.distributed_chsh())
    doc["prior"] = [0.9 / 8] * 8
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, out, _ = invoke(capsys, "validate", "--game", str(path))
    report = json.loads(out)
    assert code == 1 and not report["valid"]
    assert any("prior" in e for e in report["errors"])


def test_validate_rejects_zero_self_latency(capsys, tmp_path):
    doc = game_to_dict(games.perturbed_xor())
    doc["latency"]["matrix"][0][0] = 0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, out, _ = invoke(capsys, "validate", "--game", str(path))
    assert code == 1
    assert any("latency[0][0] must be 1" in e for e in json.loads(out)["errors"])


def test_usage_errors(capsys):
    assert invoke(capsys, "value")[0] == 2
    assert invoke(capsys, "value", "--game", "catalog:distributed-chsh", "--method", "guess")[0] == 2
    code, _, err = invoke(capsys, "value", "--game", "/nonexistent/game.json")
    assert code == 2 and json.loads(err)["error"] == "usage"
    assert invoke(capsys, "value", "--game", "catalog:nothing")[0] == 2
    assert invoke(capsys, "sweep", "--game", "catalog:perturbed-xor", "--taus", "x")[0] == 2


def test_budget_refusal(capsys, monkeypatch):
    monkeypatch.setenv("LCG_BUDGET", "4")
    code, out, err = invoke(capsys, "value", "--game", "catalog:distributed-chsh")
    assert code == 3 and out == ""
    assert json.loads(err)["error"] == "budget"


def test_parse_dims():
    assert parse_dims("1,2,2;0>1=2,1>0=2") == ((1, 2, 2), {(0, 1): 2, (1, 0): 2})
    assert parse_dims("2,2") == ((2, 2), None)
    assert parse_dims(None) == (None, None)
    with pytest.raises(UsageError):
        parse_dims("a;b")


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "lcgames.cli", "value", "--game", "catalog:distributed-chsh"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == 0.75
