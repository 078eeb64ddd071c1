"""
Batch reports over attack results: aggregates, table formatting and
CSV / JSON emission.
"""

import json
import logging
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from pydantic import BaseModel, Field

from src.exceptions import ValidationError
from src.metrics.imperceptibility import delta_a_over_a, delta_b_over_b, delta_s_over_s, l2_metric, success_rate
from src.utils.files import PathLike, atomic_write_json, atomic_write_text

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["model", "mode", "gamma", "dBB", "dAA", "dSS", "SR", "l2", "N"]
TABLE_COLUMNS = ["ΔB/B", "ΔA/A", "ΔS/S", "SR", "l2"]


class BatchReport(BaseModel):
    model_id: str = Field("model", description="Victim identifier")
    mode: str = Field("untargeted", description="Attack mode")
    gamma: Optional[float] = Field(None, gt=0.0, description="Penalty weight of the run")
    n: int = Field(0, ge=0, description="Attacked samples included in the aggregates")
    skipped: int = Field(0, ge=0, description="Samples rejected or failed")
    dBB: float = Field(0.0, ge=0.0)
    dAA: float = Field(0.0, ge=0.0)
    dSS: float = Field(0.0, ge=0.0)
    l2: float = Field(0.0, ge=0.0)
    sr: Optional[float] = Field(None, ge=0.0, le=1.0, description="Success rate, None for an empty batch")
    samples: List[Dict[str, Any]] = Field(default_factory=list, description="Per-sample summaries")
    run_config: Dict[str, Any] = Field(default_factory=dict, description="Resolved configuration echo")


def sample_summary(result) -> Dict[str, Any]:
    """Per-sample fields kept in reports (no coordinates, no trace)."""
    return result.model_dump(mode="json", exclude={"trace"})


def build_report(
    results: Sequence,
    mode,
    gamma: Optional[float] = None,
    model_id: str = "model",
    run_config: Optional[dict] = None,
) -> BatchReport:
    """
    Aggregate attack results into a BatchReport.

    Errored samples are counted as skipped and left out of every aggregate.

    Args:
        results: AttackResult objects (original and adversarial motions attached)
        mode: Attack mode of the run
        gamma: Penalty weight of the run
        model_id: Victim identifier echoed into the report
        run_config: Resolved run configuration to embed
    """
    completed = [r for r in results if r.error is None]
    skipped = len(results) - len(completed)
    if skipped:
        logger.warning(f"{skipped} of {len(results)} samples were skipped")
    pairs = [(r.original, r.adversarial) for r in completed]
    mode = getattr(mode, "value", mode)
    report = BatchReport(
        model_id=model_id,
        mode=mode,
        gamma=gamma,
        n=len(completed),
        skipped=skipped,
        dBB=delta_b_over_b(pairs),
        dAA=delta_a_over_a(pairs),
        dSS=delta_s_over_s(pairs),
        l2=l2_metric(pairs),
        sr=success_rate(completed, mode) if completed else None,
        samples=[sample_summary(r) for r in results],
        run_config=run_config or {},
    )
    logger.info(f"{model_id} {mode} γ={gamma}: N={report.n}, SR={format_percent(report.sr)}")
    return report


def format_percent(value: Optional[float], whole_hundred: bool = False) -> str:
    if value is None:
        return "n/a"
    if whole_hundred and value == 1.0:
        return "100%"
    return f"{100.0 * value:.1f}%"


def format_table_row(report: BatchReport) -> List[str]:
    """Cells ΔB/B, ΔA/A, ΔS/S, SR, l2 with one-decimal percentages."""
    return [
        format_percent(report.dBB),
        format_percent(report.dAA),
        format_percent(report.dSS),
        format_percent(report.sr, whole_hundred=True),
        f"{report.l2:.2f}",
    ]


def format_comparison_table(reports: Dict[str, BatchReport]) -> str:
    """
    Side-by-side table of several runs, one row per labelled report.

    Args:
        reports: Row label -> report, in display order
    """
    frame = pd.DataFrame(
        [format_table_row(report) for report in reports.values()],
        index=list(reports.keys()),
        columns=TABLE_COLUMNS,
    )
    return frame.to_string()


def report_row(report: BatchReport) -> Dict[str, Any]:
    return {
        "model": report.model_id,
        "mode": report.mode,
        "gamma": report.gamma,
        "dBB": report.dBB,
        "dAA": report.dAA,
        "dSS": report.dSS,
        "SR": report.sr,
        "l2": report.l2,
        "N": report.n,
    }


def write_report_csv(reports: Sequence[BatchReport], path: PathLike):
    """One CSV row per report with full double precision."""
    frame = pd.DataFrame([report_row(r) for r in reports], columns=CSV_COLUMNS)
    written = atomic_write_text(path, frame.to_csv(index=False, float_format="%.17g"))
    logger.info(f"Wrote {len(frame)} report rows to {written}")
    return written


def read_report_csv(path: PathLike) -> pd.DataFrame:
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in CSV_COLUMNS if c not in frame.columns]
    if missing:
        raise ValidationError(f"{path}: report CSV lacks columns {missing}")
    return frame


def write_report_json(report: BatchReport, path: PathLike):
    return atomic_write_json(path, report.model_dump(mode="json"))


def read_report_json(path: PathLike) -> BatchReport:
    with open(path, "r", encoding="utf-8") as handle:
        return BatchReport.model_validate(json.load(handle))

