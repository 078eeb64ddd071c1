#!/usr/bin/env python3
"""
End-to-end desk experiment: generate data, train the victim, sweep γ,
run the l2-only baseline and the no-emotion ablation, then write
comparison tables.
"""
import argparse
import logging
import sys
from pathlib import Path

# Add the project root to Python path
project_root = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(project_root))

from config.settings import PRESETS, setup_logging
from src.cli.main import EXIT_OK, main as cli
from src.reporting.report_generator import format_comparison_table, read_report_json, write_report_csv
from src.utils.files import atomic_write_text

logger = logging.getLogger(__name__)


def _run(argv) -> None:
    code = cli([str(a) for a in argv])
    if code != EXIT_OK:
        raise SystemExit(code)


def run_pipeline(preset: str, out: Path, seed: int, limit: int = None, threads: int = None) -> Path:
    """
    Run every stage of the preset and return the path of comparison.txt.
    """
    settings = PRESETS[preset]
    data_dir, model_dir = out / "data", out / "model"
    _run(["gen-data", "--preset", preset, "--seed", seed, "--out", data_dir])
    _run(["train", "--preset", preset, "--dataset", data_dir / "dataset.json", "--seed", seed, "--out", model_dir])

    common = [
        "attack", "--preset", preset,
        "--dataset", data_dir / "dataset.json",
        "--model", model_dir / "model.json",
        "--emotion", model_dir / "emotion.json",
        "--seed", seed,
    ]
    if limit is not None:
        common += ["--limit", limit]
    if threads is not None:
        common += ["--threads", threads]

    runs = {}
    for gamma in settings["gammas"]:
        run_dir = out / f"attack_gamma_{gamma:g}"
        _run(common + ["--gamma", gamma, "--out", run_dir])
        runs[f"γ={gamma:g}"] = run_dir

    baseline_dir = out / "attack_baseline_l2"
    _run(common + ["--gamma", 1.0, "--baseline-l2", "--out", baseline_dir])
    no_emotion_dir = out / "attack_no_emotion"
    _run(common + ["--gamma", 1.0, "--weights", "1,1,1,0,0", "--out", no_emotion_dir])

    reports = {label: read_report_json(path / "report.json") for label, path in runs.items()}
    ours = reports["γ=1"]
    baseline = read_report_json(baseline_dir / "report.json")
    no_emotion = read_report_json(no_emotion_dir / "report.json")

    sections = [
        "γ sweep\n" + format_comparison_table(reports),
        "dynamic distance vs l2 baseline (γ=1)\n" + format_comparison_table({"ours": ours, "l2 baseline": baseline}),
        "emotion ablation (γ=1)\n" + format_comparison_table({"w emotion": ours, "w/o emotion": no_emotion}),
    ]
    comparison = out / "comparison.txt"
    atomic_write_text(comparison, "\n\n".join(sections) + "\n")
    write_report_csv(list(reports.values()) + [baseline, no_emotion], out / "all_reports.csv")
    logger.info(f"Pipeline finished, comparison tables in {comparison}")
    return comparison


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description="Run the full desk experiment")
    parser.add_argument("--preset", default="paper-desk", choices=sorted(PRESETS))
    parser.add_argument("--out", default="runs/paper-desk")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--limit", type=int, help="Attack only the first N test samples")
    parser.add_argument("--threads", type=int)
    args = parser.parse_args()

    setup_logging()
    path = run_pipeline(args.preset, Path(args.out), args.seed, args.limit, args.threads)
    print(path.read_text(encoding="utf-8"))
