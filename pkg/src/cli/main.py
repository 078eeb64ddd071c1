"""
Command-line workflow: gen-data, train, attack, evaluate, export-overlay.

Option values resolve as flag > --config file > --preset > built-in default,
and the resolved values are echoed into every artifact as a RunConfig.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field
from pydantic import ValidationError as PydanticValidationError

from config.settings import DEFAULT_THREADS, PRESETS, setup_logging, tool_version
from src.attack.batch import attack_batch
from src.attack.engine import AttackConfig, AttackResult
from src.classifier.emotion import GroupedEmotionExtractor, default_joint_groups
from src.classifier.model_io import check_model_matches_dataset, load_model, model_to_dict, save_model
from src.classifier.models import ClassifierModel
from src.classifier.training import train_classifier
from src.exceptions import SkeletonAttackError, ValidationError
from src.loss.objective import LossWeights
from src.metrics.imperceptibility import delta_a_over_a, delta_b_over_b, delta_s_over_s, l2_metric, success_rate
from src.motion.dataset import MotionDataset
from src.motion.motion_io import load_dataset, save_dataset
from src.motion.synthetic import generate_synthetic_dataset
from src.motion.topology import topology_from_name
from src.reporting.report_generator import (
    BatchReport,
    format_table_row,
    write_report_csv,
    write_report_json,
)
from src.utils.files import atomic_write_json, atomic_write_text

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3

# Built-in defaults per command; None marks an option that must come from somewhere
DEFAULTS: Dict[str, Dict[str, Any]] = {
    "gen-data": {
        "seed": 0,
        "classes": None,
        "per_class": None,
        "frames": 32,
        "topology": "chain16",
        "test_fraction": 0.1,
        "noise": 0.01,
        "phase_jitter": 0.1,
        "out": "output",
    },
    "train": {
        "dataset": None,
        "seed": 0,
        "arch": "mlp",
        "hidden": [64, 64],
        "epochs": 200,
        "lr": 1e-3,
        "threshold": 0.85,
        "force": False,
        "emotion_seed": 0,
        "emotion_groups": 4,
        "emotion_features": 4,
        "out": "output",
    },
    "attack": {
        "dataset": None,
        "model": None,
        "emotion": None,
        "emotion_seed": 0,
        "mode": "untargeted",
        "target_label": None,
        "gamma": 1.0,
        "iters": 1000,
        "inner_steps": 1,
        "lr": 5e-3,
        "conf": 0.0,
        "lambda0": 0.0,
        "weights": None,
        "baseline_l2": False,
        "eps_s_cap": None,
        "init_noise": 0.0,
        "patience": None,
        "force": False,
        "seed": 0,
        "trace": False,
        "split": "test",
        "limit": None,
        "threads": None,
        "formats": ["csv", "json"],
        "out": "output",
    },
    "evaluate": {
        "dataset": None,
        "adversarial": None,
        "results": None,
        "report": None,
        "out": "output",
    },
    "export-overlay": {
        "dataset": None,
        "adversarial": None,
        "name": None,
        "sample_frames": None,
        "format": "csv",
        "out": "overlay.csv",
    },
}

# option name -> preset key
PRESET_KEYS = {
    "gen-data": {"topology": "topology", "frames": "frames", "classes": "classes", "per_class": "per_class", "test_fraction": "test_fraction"},
    "train": {"arch": "arch", "hidden": "hidden", "epochs": "epochs", "lr": "train_lr"},
    "attack": {"iters": "iterations", "lr": "attack_lr"},
}

REQUIRED = {
    "gen-data": ["classes", "per_class"],
    "train": ["dataset"],
    "attack": ["dataset", "model"],
    "evaluate": ["dataset", "adversarial"],
    "export-overlay": ["dataset", "adversarial"],
}

# evaluate accepts differences up to this much from the attack-time report
EVALUATE_TOLERANCE = 1e-12


class UsageError(Exception):
    """Bad command-line usage."""


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


class RunConfig(BaseModel):
    command: str = Field(..., description="Subcommand")
    options: Dict[str, Any] = Field(default_factory=dict, description="Resolved option values")
    attack: Optional[AttackConfig] = Field(None, description="Attack configuration (attack command only)")
    tool_version: str = Field(..., description="git-describe-style version")


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from e


def _str_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="skelattack", description="Dynamics-aware adversarial attacks on skeletal motions")
    subparsers = parser.add_subparsers(dest="command", parser_class=ArgumentParser)
    subparsers.required = True

    def command(name: str, help_text: str) -> ArgumentParser:
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("--config", help="JSON file of option values (or a run_config.json)")
        sub.add_argument("--out", help="Output directory (file for export-overlay)")
        return sub

    gen = command("gen-data", "Generate a normalized synthetic dataset")
    gen.add_argument("--preset", choices=sorted(PRESETS))
    gen.add_argument("--seed", type=int)
    gen.add_argument("--classes", type=int)
    gen.add_argument("--per-class", dest="per_class", type=int)
    gen.add_argument("--frames", type=int)
    gen.add_argument("--topology", help="chain<N>, star<N> or humanoid")
    gen.add_argument("--test-fraction", dest="test_fraction", type=float)
    gen.add_argument("--noise", type=float)
    gen.add_argument("--phase-jitter", dest="phase_jitter", type=float)

    train = command("train", "Train a victim classifier and write the emotion extractor")
    train.add_argument("--preset", choices=sorted(PRESETS))
    train.add_argument("--dataset")
    train.add_argument("--seed", type=int)
    train.add_argument("--arch", choices=["mlp", "linear"])
    train.add_argument("--hidden", type=_int_list, help="Hidden widths, e.g. 64,64")
    train.add_argument("--epochs", type=int)
    train.add_argument("--lr", type=float)
    train.add_argument("--threshold", type=float, help="Minimum test accuracy")
    train.add_argument("--force", action="store_true", default=None)
    train.add_argument("--emotion-seed", dest="emotion_seed", type=int)
    train.add_argument("--emotion-groups", dest="emotion_groups", type=int)
    train.add_argument("--emotion-features", dest="emotion_features", type=int)

    attack = command("attack", "Attack the samples of one dataset split")
    attack.add_argument("--preset", choices=sorted(PRESETS))
    attack.add_argument("--dataset")
    attack.add_argument("--model")
    attack.add_argument("--emotion", help="Emotion extractor file")
    attack.add_argument("--emotion-seed", dest="emotion_seed", type=int)
    attack.add_argument("--mode", choices=["untargeted", "targeted"])
    attack.add_argument("--target-label", dest="target_label", type=int)
    attack.add_argument("--gamma", type=float)
    attack.add_argument("--iters", type=int)
    attack.add_argument("--inner-steps", dest="inner_steps", type=int)
    attack.add_argument("--lr", type=float)
    attack.add_argument("--conf", type=float)
    attack.add_argument("--lambda0", type=float)
    attack.add_argument("--weights", help="wb,wa,ws,we,wl2")
    attack.add_argument("--baseline-l2", dest="baseline_l2", action="store_true", default=None)
    attack.add_argument("--eps-s-cap", dest="eps_s_cap", type=float)
    attack.add_argument("--init-noise", dest="init_noise", type=float)
    attack.add_argument("--patience", type=int)
    attack.add_argument("--force", action="store_true", default=None)
    attack.add_argument("--seed", type=int)
    attack.add_argument("--trace", action="store_true", default=None)
    attack.add_argument("--split", choices=["train", "test"])
    attack.add_argument("--limit", type=int, help="Attack only the first N samples of the split")
    attack.add_argument("--threads", type=int)
    attack.add_argument("--formats", type=_str_list, help="Report formats: csv,json")

    evaluate = command("evaluate", "Recompute metrics from stored motion pairs")
    evaluate.add_argument("--dataset", help="Original motions")
    evaluate.add_argument("--adversarial", help="Adversarial motions")
    evaluate.add_argument("--results", help="results.json holding stored predictions")
    evaluate.add_argument("--report", help="report.json to check against")

    overlay = command("export-overlay", "Export per-frame original/adversarial coordinates")
    overlay.add_argument("--dataset", help="Original motions")
    overlay.add_argument("--adversarial", help="Adversarial motions")
    overlay.add_argument("--name", help="Sample name (default: first adversarial motion)")
    overlay.add_argument("--sample-frames", dest="sample_frames", type=int)
    overlay.add_argument("--format", choices=["csv", "json"])
    return parser


def _load_config_file(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as e:
        raise ValidationError(f"{path}: malformed config JSON ({e.msg})") from e
    if not isinstance(payload, dict):
        raise ValidationError(f"{path}: config must be a JSON object")
    return payload.get("options", payload)


def resolve_options(args: argparse.Namespace) -> Dict[str, Any]:
    """Merge flag, config file, preset and default values for the chosen command."""
    command = args.command
    file_options = _load_config_file(args.config) if args.config else {}
    preset_name = getattr(args, "preset", None) or file_options.get("preset")
    preset = {}
    if preset_name:
        if preset_name not in PRESETS:
            raise UsageError(f"unknown preset '{preset_name}'")
        preset = {option: PRESETS[preset_name][key] for option, key in PRESET_KEYS.get(command, {}).items()}

    options = {}
    for key, default in DEFAULTS[command].items():
        flag = getattr(args, key, None)
        options[key] = next((v for v in (flag, file_options.get(key), preset.get(key), default) if v is not None), None)
    if preset_name:
        options["preset"] = preset_name

    missing = [key for key in REQUIRED[command] if options.get(key) is None]
    if missing:
        raise UsageError(f"{command}: missing required option(s): {', '.join('--' + m.replace('_', '-') for m in missing)}")
    return options


def _run_config(command: str, options: Dict[str, Any], attack: Optional[AttackConfig] = None) -> dict:
    return RunConfig(command=command, options=options, attack=attack, tool_version=tool_version()).model_dump(mode="json")


def cmd_gen_data(options: Dict[str, Any]) -> int:
    topology = topology_from_name(options["topology"])
    dataset = generate_synthetic_dataset(
        seed=options["seed"],
        class_count=options["classes"],
        samples_per_class=options["per_class"],
        frames=options["frames"],
        topology=topology,
        test_fraction=options["test_fraction"],
        noise=options["noise"],
        phase_jitter=options["phase_jitter"],
    )
    out = Path(options["out"])
    save_dataset(dataset, out / "dataset.json")
    manifest = _run_config("gen-data", options)
    manifest.update(
        {
            "seed": options["seed"],
            "motions": len(dataset),
            "test_motions": len(dataset.split("test")),
            "normalization": dataset.normalization.to_dict(),
        }
    )
    atomic_write_json(out / "manifest.json", manifest)
    print(f"Wrote {len(dataset)} motions to {out / 'dataset.json'}")
    return EXIT_OK


def cmd_train(options: Dict[str, Any]) -> int:
    dataset = load_dataset(options["dataset"])
    model, report = train_classifier(
        dataset,
        architecture=options["arch"],
        seed=options["seed"],
        epochs=options["epochs"],
        lr=options["lr"],
        hidden=tuple(options["hidden"]),
    )
    gate = report.test_accuracy if report.test_accuracy is not None else report.train_accuracy
    if gate < options["threshold"] and not options["force"]:
        raise SkeletonAttackError(
            f"victim accuracy {gate:.3f} is below the threshold {options['threshold']} (use --force to keep it)"
        )

    topology = dataset.topology
    frames = dataset.motions[0].frame_count
    extractor = GroupedEmotionExtractor.seeded(
        frames,
        topology.joint_count,
        options["emotion_seed"],
        groups=default_joint_groups(topology.joint_count, options["emotion_groups"]),
        features_per_group=options["emotion_features"],
    )
    out = Path(options["out"])
    save_model(model, out / "model.json")
    save_model(extractor, out / "emotion.json")
    payload = report.model_dump(mode="json")
    payload["run_config"] = _run_config("train", options)
    atomic_write_json(out / "training_report.json", payload)
    print(f"Trained {report.architecture}: train accuracy {report.train_accuracy:.3f}, test accuracy {report.test_accuracy}")
    return EXIT_OK


def attack_config_from_options(options: Dict[str, Any]) -> AttackConfig:
    if options["mode"] == "targeted" and options["target_label"] is None:
        raise UsageError("attack: --mode targeted requires --target-label")
    if options["baseline_l2"]:
        weights = LossWeights.l2_only()
    elif options["weights"]:
        weights = LossWeights.parse(options["weights"])
    else:
        weights = LossWeights()
    return AttackConfig(
        mode=options["mode"],
        target_label=options["target_label"] if options["mode"] == "targeted" else None,
        conf=options["conf"],
        gamma=options["gamma"],
        iterations=options["iters"],
        inner_steps=options["inner_steps"],
        lr=options["lr"],
        lambda0=options["lambda0"],
        weights=weights,
        eps_s_cap=options["eps_s_cap"],
        init_noise=options["init_noise"],
        patience=options["patience"],
        force=options["force"],
        seed=options["seed"],
        record_trace=options["trace"],
    )


def cmd_attack(options: Dict[str, Any]) -> int:
    config = attack_config_from_options(options)
    dataset = load_dataset(options["dataset"])
    model = load_model(options["model"])
    if not isinstance(model, ClassifierModel):
        raise ValidationError(f"{options['model']}: not a classifier (kind '{model.kind}')")
    check_model_matches_dataset(model, dataset)
    if config.target_label is not None and config.target_label >= model.class_count:
        raise ValidationError(f"target label {config.target_label} outside [0, {model.class_count})")

    motions = dataset.split(options["split"])
    if options["limit"] is not None:
        motions = motions[: options["limit"]]

    extractor = None
    if config.weights.w_e > 0.0 and motions:
        if options["emotion"]:
            extractor = load_model(options["emotion"])
            if not isinstance(extractor, GroupedEmotionExtractor):
                raise ValidationError(f"{options['emotion']}: not an emotion extractor")
        else:
            extractor = GroupedEmotionExtractor.seeded(model.frames, model.joints, options["emotion_seed"])

    run_config = _run_config("attack", options, config)
    model_id = Path(options["model"]).stem
    threads = options["threads"] if options["threads"] is not None else DEFAULT_THREADS
    results, report = attack_batch(motions, model, extractor, config, threads=threads, model_id=model_id, run_config=run_config)

    out = Path(options["out"])
    atomic_write_json(
        out / "results.json",
        {
            "model_id": model_id,
            "mode": config.mode.value,
            "gamma": config.gamma,
            "run_config": run_config,
            "results": [r.model_dump(mode="json") for r in results],
        },
    )
    completed = [r for r in results if r.error is None]
    adversarial = MotionDataset(
        [r.adversarial for r in completed],
        dataset.class_count,
        dataset.normalization,
        splits=[options["split"]] * len(completed),
    )
    save_dataset(adversarial, out / "adversarial.json")
    if "csv" in options["formats"]:
        write_report_csv([report], out / "report.csv")
    if "json" in options["formats"]:
        write_report_json(report, out / "report.json")
    atomic_write_json(out / "run_config.json", run_config)
    print(" & ".join(format_table_row(report)) + f"  (N={report.n}, skipped={report.skipped})")
    return EXIT_OK


def _pairs_by_name(originals: MotionDataset, adversarial: MotionDataset):
    by_name = {m.name: m for m in originals.motions}
    pairs = []
    for motion in adversarial.motions:
        if motion.name not in by_name:
            raise ValidationError(f"pair mismatch: no original motion named '{motion.name}'")
        pairs.append((by_name[motion.name], motion))
    return pairs


def cmd_evaluate(options: Dict[str, Any]) -> int:
    originals = load_dataset(options["dataset"])
    adversarial = load_dataset(options["adversarial"])
    pairs = _pairs_by_name(originals, adversarial)

    mode, gamma, model_id, sr = "untargeted", None, "model", None
    if options["results"]:
        with open(options["results"], "r", encoding="utf-8") as handle:
            stored = json.load(handle)
        mode, gamma, model_id = stored.get("mode", mode), stored.get("gamma"), stored.get("model_id", model_id)
        names = {adv.name for _, adv in pairs}
        records = [
            AttackResult.model_validate(entry)
            for entry in stored.get("results", [])
            if entry.get("error") is None and entry.get("name") in names
        ]
        if records:
            sr = success_rate(records, mode)

    report = BatchReport(
        model_id=model_id,
        mode=mode,
        gamma=gamma,
        n=len(pairs),
        dBB=delta_b_over_b(pairs),
        dAA=delta_a_over_a(pairs),
        dSS=delta_s_over_s(pairs),
        l2=l2_metric(pairs),
        sr=sr,
        run_config=_run_config("evaluate", options),
    )
    if options["report"]:
        with open(options["report"], "r", encoding="utf-8") as handle:
            expected = json.load(handle)
        for key in ("dBB", "dAA", "dSS", "l2", "sr"):
            ours, theirs = getattr(report, key), expected.get(key)
            if (ours is None) != (theirs is None) or (ours is not None and abs(ours - theirs) > EVALUATE_TOLERANCE):
                raise ValidationError(f"evaluation disagrees with {options['report']} on {key}: {ours} vs {theirs}")

    write_report_json(report, Path(options["out"]) / "evaluation.json")
    print(" & ".join(format_table_row(report)) + f"  (N={report.n})")
    return EXIT_OK


def sampled_frames(frame_count: int, sample_frames: Optional[int]) -> np.ndarray:
    """Evenly spaced frame indices, first and last included."""
    if sample_frames is None or sample_frames >= frame_count:
        return np.arange(frame_count)
    if sample_frames < 1:
        raise ValidationError(f"--sample-frames must be positive, got {sample_frames}")
    return np.unique(np.round(np.linspace(0, frame_count - 1, sample_frames)).astype(int))


def overlay_frame(original, adversarial, frames: np.ndarray) -> pd.DataFrame:
    """One row per (frame, joint): both coordinates and the displacement magnitude."""
    rows = []
    for t in frames:
        displacement = np.linalg.norm(original.positions[t] - adversarial.positions[t], axis=1)
        for j in range(original.joint_count):
            ox, oy, oz = original.positions[t, j]
            ax, ay, az = adversarial.positions[t, j]
            rows.append(
                {
                    "frame": int(t), "joint": j,
                    "orig_x": ox, "orig_y": oy, "orig_z": oz,
                    "adv_x": ax, "adv_y": ay, "adv_z": az,
                    "displacement": displacement[j],
                }
            )
    return pd.DataFrame(rows)


def overlay_config_path(out: Path) -> Path:
    """Sidecar holding the RunConfig of a CSV overlay: overlay.csv -> overlay.csv.run_config.json."""
    return out.with_name(out.name + ".run_config.json")


def cmd_export_overlay(options: Dict[str, Any]) -> int:
    originals = load_dataset(options["dataset"])
    adversarial = load_dataset(options["adversarial"])
    pairs = _pairs_by_name(originals, adversarial)
    if not pairs:
        raise ValidationError("missing pair: the adversarial file holds no motions")
    if options["name"] is None:
        original, adv = pairs[0]
    else:
        matches = [p for p in pairs if p[1].name == options["name"]]
        if not matches:
            raise ValidationError(f"missing pair: no adversarial motion named '{options['name']}'")
        original, adv = matches[0]
    if original.topology != adv.topology:
        raise ValidationError("original and adversarial motions have different topologies")

    frame = overlay_frame(original, adv, sampled_frames(original.frame_count, options["sample_frames"]))
    out = Path(options["out"])
    run_config = _run_config("export-overlay", options)
    if options["format"] == "json":
        payload = {
            "name": original.name,
            "bones": [list(b) for b in original.topology.bones],
            "rows": frame.to_dict(orient="records"),
            "run_config": run_config,
        }
        atomic_write_json(out, payload)
    else:
        atomic_write_text(out, frame.to_csv(index=False, float_format="%.17g"))
        atomic_write_json(overlay_config_path(out), run_config)
    print(f"Exported {frame['frame'].nunique()} frames of {original.name} to {out}")
    return EXIT_OK


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "attack": cmd_attack,
    "evaluate": cmd_evaluate,
    "export-overlay": cmd_export_overlay,
}


def main(argv: Optional[List[str]] = None) -> int:
    setup_logging()
    try:
        args = build_parser().parse_args(argv)
        options = resolve_options(args)
        return COMMANDS[args.command](options)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, PydanticValidationError, FileNotFoundError) as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:
        logger.exception("Command failed")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
