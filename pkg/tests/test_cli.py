import json
import logging

import pytest

from strategic_delta.cli import dump_json, main
from strategic_delta.dataset import load_dataset


def _design(tmp_path, **changes):
    design = {
        "seed": 11,
        "games": ["tullock"],
        "rounds": 10,
        "sessions_per_cell": 3,
        "conditions": {"individuation": ["Aggregate"], "framing": ["Gain", "Loss"]},
        "arms": {"classical": [{"kind": "Classical", "noise_sd": 0.05}] * 2},
    }
    design.update(changes)
    path = tmp_path / "design.json"
    path.write_text(json.dumps(design))
    return path


def test_solve_level_k(capsys):
    assert main(["solve", "--game", "pbeauty", "--benchmark", "level-k", "--k", "2"]) == 0
    assert "22.22" in capsys.readouterr().out


def test_solve_output_is_deterministic(tmp_path):
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    for path in (first, second):
        assert main(["solve", "--game", "ultimatum", "--param", "P=10", "--out", str(path)]) == 0
    assert first.read_bytes() == second.read_bytes()
    document = json.loads(first.read_text())
    assert document["schema_version"] == 1
    assert document["command"] == "solve"
    assert len(document["config_hash"]) == 12
    assert document["result"]["baselines"][0]["point"] == pytest.approx(1.0)


@pytest.mark.parametrize(
    "argv",
    [
        ["juggle"],
        ["solve"],
        ["solve", "--game", "ultimatum", "--param", "P=-5"],
        ["solve", "--game", "ultimatum", "--param", "P"],
        ["certify", "--generate", "3", "--shape", "3by3"],
        ["llm-run", "--design", "d.json", "--endpoint", "e.json", "--dataset", "x.csv", "--mode", "Offline"],
    ],
)
def test_usage_errors_exit_2(argv):
    assert main(argv) == 2


def test_missing_dataset_exits_1(tmp_path):
    assert main(["analyze", "--dataset", str(tmp_path / "absent.csv")]) == 1


def test_unknown_config_keys(tmp_path):
    config = tmp_path / "config.yaml"
    config.write_text("seed: 3\ncolour: blue\n")
    assert main(["solve", "--game", "pd", "--config", str(config)]) == 2


def test_config_file_supplies_defaults(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"seed": 77}))
    out = tmp_path / "out.json"
    assert main(["solve", "--game", "pd", "--config", str(config), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["seed"] == 77
    assert main(["solve", "--game", "pd", "--config", str(config), "--seed", "5", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["seed"] == 5


def test_simulate_analyze_report(tmp_path, capsys):
    dataset = tmp_path / "runs.csv"
    assert main(["simulate", "--design", str(_design(tmp_path)), "--dataset", str(dataset)]) == 0
    assert len(load_dataset(dataset)) == 120

    profile, deltas = tmp_path / "profile.json", tmp_path / "deltas.csv"
    argv = [
        "analyze",
        "--dataset",
        str(dataset),
        "--permutations",
        "99",
        "--bootstrap",
        "99",
        "--shuffles",
        "10",
        "--deltas",
        str(deltas),
        "--out",
        str(profile),
    ]
    assert main(argv) == 0
    result = json.loads(profile.read_text())["result"]
    assert result["classification"] in {"HumanShaped", "LLMShaped", "Mixed", "Unstructured"}
    assert result["dropped_rows"] == 0
    assert deltas.exists()

    tables = tmp_path / "figures"
    capsys.readouterr()
    assert main(["report", "--input", str(profile), "--tables-dir", str(tables)]) == 0
    assert "# analyze report" in capsys.readouterr().out
    assert (tables / "tests.csv").exists()


def test_moderator_power(capsys, tmp_path):
    out = tmp_path / "power.json"
    assert main(["moderator", "--power-d", "0.8", "--out", str(out)]) == 0
    assert "n per arm for d=0.8" in capsys.readouterr().out
    assert json.loads(out.read_text())["result"]["power"]["n_per_arm"] > 10
    assert main(["moderator"]) == 2


def test_evidence(capsys):
    assert main(["evidence"]) == 0
    out = capsys.readouterr().out
    assert "llm 0.65 vs human 0.37, diff +0.28" in out
    assert "1 quantified" in out


def test_certify_generated_game(tmp_path):
    out = tmp_path / "checklist.json"
    assert main(["certify", "--generate", "7", "--shape", "3x3", "--out", str(out)]) == 0
    checklist = json.loads(out.read_text())["result"]
    assert checklist["game_id"] == "gen-7-3x3"
    assert checklist["attestation"]["signed_by"] is None


def test_llm_run_record_then_replay(chat_endpoint, tmp_path):
    endpoint = tmp_path / "endpoint.json"
    endpoint.write_text(
        json.dumps({"base_url": "http://chat.test", "model": "test-model", "mode": "Live", "backoff_seconds": 0})
    )
    design = _design(tmp_path, rounds=2, sessions_per_cell=1)
    transcripts = str(tmp_path / "transcripts.jsonl")
    recorded, replayed = tmp_path / "recorded.csv", tmp_path / "replayed.csv"
    common = ["llm-run", "--design", str(design), "--endpoint", str(endpoint), "--transcripts", transcripts]

    assert main(common + ["--mode", "Record", "--dataset", str(recorded)]) == 0
    calls = len(chat_endpoint.calls)
    assert calls == 8
    assert main(common + ["--mode", "Replay", "--dataset", str(replayed)]) == 0
    assert len(chat_endpoint.calls) == calls
    assert recorded.read_bytes() == replayed.read_bytes()


def test_llm_run_needs_a_token(chat_endpoint, monkeypatch, tmp_path):
    monkeypatch.delenv("STRATEGIC_DELTA_API_TOKEN")
    endpoint = tmp_path / "endpoint.json"
    endpoint.write_text(json.dumps({"base_url": "http://chat.test", "model": "m", "mode": "Live"}))
    argv = ["llm-run", "--design", str(_design(tmp_path)), "--endpoint", str(endpoint)]
    assert main(argv + ["--dataset", str(tmp_path / "x.csv")]) == 2


def test_dump_json_is_strict():
    assert dump_json({"b": float("nan"), "a": (1, 2)}) == '{\n  "a": [\n    1,\n    2\n  ],\n  "b": null\n}\n'


def test_simulate_hashes_the_seed_it_runs_with(tmp_path, caplog):
    design = str(_design(tmp_path, rounds=2, sessions_per_cell=1))
    dataset = str(tmp_path / "runs.csv")
    documents = []
    for extra in ([], ["--seed", "11"], ["--seed", "12"]):
        out = tmp_path / "simulate.json"
        caplog.clear()
        with caplog.at_level(logging.INFO, logger="strategic_delta"):
            assert main(["simulate", "--design", design, "--dataset", dataset, "--out", str(out)] + extra) == 0
        document = json.loads(out.read_text())
        assert f"with seed {document['seed']}, config hash {document['config_hash']}" in caplog.text
        documents.append(document)

    from_design, explicit, other = documents
    assert from_design["seed"] == explicit["seed"] == 11
    assert from_design["config_hash"] == explicit["config_hash"]
    assert other["seed"] == 12
    assert other["config_hash"] != explicit["config_hash"]
