import json

import numpy as np
import pandas as pd
import pytest

from src.cli.main import EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, main, sampled_frames
from src.motion.motion_io import load_dataset


def _gen(out, seed=7):
    return main([
        "gen-data", "--seed", str(seed), "--classes", "3", "--per-class", "10", "--frames", "6",
        "--topology", "chain4", "--test-fraction", "0.2", "--out", str(out),
    ])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """gen-data, train and a short attack in one shared directory."""
    root = tmp_path_factory.mktemp("cli")
    assert _gen(root / "data") == EXIT_OK
    assert main([
        "train", "--dataset", str(root / "data" / "dataset.json"), "--arch", "linear",
        "--epochs", "100", "--lr", "0.05", "--force", "--out", str(root / "model"),
    ]) == EXIT_OK
    assert main([
        "attack", "--dataset", str(root / "data" / "dataset.json"), "--model", str(root / "model" / "model.json"),
        "--emotion", str(root / "model" / "emotion.json"), "--iters", "40", "--lr", "0.01", "--force",
        "--trace", "--out", str(root / "attack"),
    ]) == EXIT_OK
    return root


def test_gen_data_is_byte_identical(tmp_path):
    assert _gen(tmp_path / "a") == EXIT_OK
    assert _gen(tmp_path / "b") == EXIT_OK
    assert (tmp_path / "a" / "dataset.json").read_bytes() == (tmp_path / "b" / "dataset.json").read_bytes()

    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["seed"] == 7
    assert manifest["tool_version"]
    assert manifest["options"]["classes"] == 3


def test_gen_data_requires_classes(tmp_path):
    assert main(["gen-data", "--per-class", "3", "--out", str(tmp_path)]) == EXIT_USAGE


def test_unknown_command_is_usage_error():
    assert main(["fly"]) == EXIT_USAGE


def test_config_file_and_flag_precedence(tmp_path):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({"classes": 2, "per_class": 4, "frames": 3, "topology": "star4"}), encoding="utf-8")
    assert main(["gen-data", "--config", str(config), "--frames", "5", "--out", str(tmp_path / "out")]) == EXIT_OK
    dataset = load_dataset(tmp_path / "out" / "dataset.json")
    assert dataset.class_count == 2 and len(dataset) == 8
    assert dataset.motions[0].frame_count == 5
    assert dataset.topology.bone_count == 3


def test_train_writes_model_emotion_and_report(workspace):
    report = json.loads((workspace / "model" / "training_report.json").read_text(encoding="utf-8"))
    assert report["architecture"] == "linear"
    assert report["run_config"]["options"]["arch"] == "linear"
    model = json.loads((workspace / "model" / "model.json").read_text(encoding="utf-8"))
    assert model["kind"] == "linear"
    emotion = json.loads((workspace / "model" / "emotion.json").read_text(encoding="utf-8"))
    assert emotion["kind"] == "emotion"


def test_train_accuracy_gate(tmp_path, workspace):
    code = main([
        "train", "--dataset", str(workspace / "data" / "dataset.json"), "--arch", "linear",
        "--epochs", "1", "--threshold", "1.01", "--out", str(tmp_path),
    ])
    assert code == 3
    assert not (tmp_path / "model.json").exists()


def test_attack_artifacts(workspace):
    out = workspace / "attack"
    for name in ("results.json", "adversarial.json", "report.csv", "report.json", "run_config.json"):
        assert (out / name).exists()
    results = json.loads((out / "results.json").read_text(encoding="utf-8"))
    assert len(results["results"]) == 6
    assert all(entry["trace"] for entry in results["results"] if entry["error"] is None)
    run_config = json.loads((out / "run_config.json").read_text(encoding="utf-8"))
    assert run_config["attack"]["iterations"] == 40

    adversarial = load_dataset(out / "adversarial.json")
    stacked, _ = adversarial.stacked()
    assert stacked.min() >= 0.0 and stacked.max() <= 1.0


def test_evaluate_reproduces_attack_report(workspace):
    out = workspace / "attack"
    code = main([
        "evaluate", "--dataset", str(workspace / "data" / "dataset.json"), "--adversarial", str(out / "adversarial.json"),
        "--results", str(out / "results.json"), "--report", str(out / "report.json"), "--out", str(workspace / "eval"),
    ])
    assert code == EXIT_OK
    evaluation = json.loads((workspace / "eval" / "evaluation.json").read_text(encoding="utf-8"))
    report = json.loads((out / "report.json").read_text(encoding="utf-8"))
    for key in ("dBB", "dAA", "dSS", "l2", "sr"):
        assert evaluation[key] == pytest.approx(report[key], abs=1e-12)


def test_evaluate_originals_against_themselves(workspace):
    dataset = str(workspace / "data" / "dataset.json")
    assert main(["evaluate", "--dataset", dataset, "--adversarial", dataset, "--out", str(workspace / "self")]) == EXIT_OK
    evaluation = json.loads((workspace / "self" / "evaluation.json").read_text(encoding="utf-8"))
    assert evaluation["dBB"] == evaluation["dAA"] == evaluation["dSS"] == evaluation["l2"] == 0.0


def test_evaluate_rejects_mismatched_topology(tmp_path, workspace):
    assert main([
        "gen-data", "--classes", "3", "--per-class", "10", "--frames", "6", "--topology", "star4",
        "--test-fraction", "0.2", "--seed", "7", "--out", str(tmp_path),
    ]) == EXIT_OK
    code = main([
        "evaluate", "--dataset", str(workspace / "data" / "dataset.json"),
        "--adversarial", str(tmp_path / "dataset.json"), "--out", str(tmp_path / "eval"),
    ])
    assert code == EXIT_VALIDATION


def test_attack_usage_and_validation_errors(tmp_path, workspace):
    base = [
        "attack", "--dataset", str(workspace / "data" / "dataset.json"),
        "--model", str(workspace / "model" / "model.json"), "--iters", "2", "--out", str(tmp_path),
    ]
    assert main(base + ["--mode", "targeted"]) == EXIT_USAGE
    assert main(base + ["--mode", "targeted", "--target-label", "9"]) == EXIT_VALIDATION
    assert main(base + ["--weights", "1,2"]) == EXIT_VALIDATION
    assert main(base + ["--gamma", "0"]) == EXIT_VALIDATION


def test_targeted_attack_counts_only_target_hits(tmp_path, workspace):
    code = main([
        "attack", "--dataset", str(workspace / "data" / "dataset.json"),
        "--model", str(workspace / "model" / "model.json"), "--mode", "targeted", "--target-label", "2",
        "--iters", "30", "--lr", "0.01", "--weights", "1,1,1,0,0", "--out", str(tmp_path),
    ])
    assert code == EXIT_OK
    results = json.loads((tmp_path / "results.json").read_text(encoding="utf-8"))["results"]
    for entry in results:
        if entry["error"] is None:
            assert entry["success"] == (entry["predicted_label"] == 2)
        else:
            assert entry["true_label"] == 2


def test_sampled_frames():
    frames = sampled_frames(32, 10)
    assert len(frames) == 10 and frames[0] == 0 and frames[-1] == 31
    assert sampled_frames(6, None).tolist() == list(range(6))


def test_export_overlay(tmp_path, workspace):
    out = tmp_path / "overlay.csv"
    code = main([
        "export-overlay", "--dataset", str(workspace / "data" / "dataset.json"),
        "--adversarial", str(workspace / "attack" / "adversarial.json"), "--sample-frames", "4", "--out", str(out),
    ])
    assert code == EXIT_OK
    frame = pd.read_csv(out, float_precision="round_trip")
    assert sorted(frame["frame"].unique()) == [0, 2, 3, 5]
    original = frame[["orig_x", "orig_y", "orig_z"]].to_numpy()
    adversarial = frame[["adv_x", "adv_y", "adv_z"]].to_numpy()
    np.testing.assert_allclose(frame["displacement"], np.linalg.norm(original - adversarial, axis=1), atol=1e-15)

    run_config = json.loads((tmp_path / "overlay.csv.run_config.json").read_text(encoding="utf-8"))
    assert run_config["command"] == "export-overlay"
    assert run_config["options"]["sample_frames"] == 4 and run_config["tool_version"]


def test_export_overlay_of_identical_pair(tmp_path, workspace):
    dataset = str(workspace / "data" / "dataset.json")
    out = tmp_path / "overlay.json"
    assert main(["export-overlay", "--dataset", dataset, "--adversarial", dataset, "--format", "json", "--out", str(out)]) == EXIT_OK
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["rows"] and all(row["displacement"] == 0.0 for row in payload["rows"])
    assert payload["run_config"]["command"] == "export-overlay"
    assert payload["run_config"]["options"]["format"] == "json"
    assert not (tmp_path / "overlay.json.run_config.json").exists()


def test_attack_rerun_from_embedded_config_is_bit_exact(tmp_path, workspace):
    out = workspace / "attack"
    code = main(["attack", "--config", str(out / "run_config.json"), "--threads", "3", "--out", str(tmp_path)])
    assert code == EXIT_OK
    for name in ("adversarial.json", "report.csv"):
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes()
    first = json.loads((out / "results.json").read_text(encoding="utf-8"))["results"]
    second = json.loads((tmp_path / "results.json").read_text(encoding="utf-8"))["results"]
    assert first == second


def test_gen_data_rerun_from_manifest_is_bit_exact(tmp_path, workspace):
    data = workspace / "data"
    assert main(["gen-data", "--config", str(data / "manifest.json"), "--out", str(tmp_path)]) == EXIT_OK
    assert (tmp_path / "dataset.json").read_bytes() == (data / "dataset.json").read_bytes()


def test_baseline_l2_attack(tmp_path, workspace):
    code = main([
        "attack", "--dataset", str(workspace / "data" / "dataset.json"),
        "--model", str(workspace / "model" / "model.json"), "--baseline-l2",
        "--iters", "30", "--lr", "0.01", "--force", "--out", str(tmp_path),
    ])
    assert code == EXIT_OK
    run_config = json.loads((tmp_path / "run_config.json").read_text(encoding="utf-8"))
    assert run_config["options"]["baseline_l2"] is True
    assert run_config["attack"]["weights"] == {"w_b": 0.0, "w_a": 0.0, "w_s": 0.0, "w_e": 0.0, "w_l2": 1.0}

    results = json.loads((tmp_path / "results.json").read_text(encoding="utf-8"))["results"]
    assert len(results) == 6
    adversarial = load_dataset(tmp_path / "adversarial.json")
    stacked, _ = adversarial.stacked()
    assert stacked.min() >= 0.0 and stacked.max() <= 1.0
