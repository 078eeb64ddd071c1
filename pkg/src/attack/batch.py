"""
Batch attacks: independent per-sample runs, optionally on a thread pool.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple, Union

from config.settings import DEFAULT_THREADS
from src.attack.engine import AttackConfig, AttackResult, run_attack
from src.classifier.emotion import EmotionExtractor
from src.classifier.models import ClassifierModel
from src.exceptions import SkeletonAttackError
from src.motion.dataset import MotionDataset
from src.motion.skeleton import SkeletonMotion
from src.reporting.report_generator import BatchReport, build_report

logger = logging.getLogger(__name__)


def sample_config(config: AttackConfig, index: int) -> AttackConfig:
    """Per-sample configuration; the seed is config.seed XOR index."""
    return config.model_copy(update={"seed": config.seed ^ index})


def _attack_one(index: int, motion: SkeletonMotion, model, extractor, config: AttackConfig) -> AttackResult:
    try:
        result = run_attack(motion, model, extractor, sample_config(config, index))
    except SkeletonAttackError as e:
        logger.error(f"Sample {index} ({motion.name}): {e}")
        return AttackResult(
            name=motion.name,
            sample_index=index,
            original=motion,
            mode=config.mode,
            true_label=motion.label,
            target_label=config.target_label,
            error=str(e),
        )
    result.sample_index = index
    return result


def attack_batch(
    motions: Union[MotionDataset, Sequence[SkeletonMotion]],
    model: ClassifierModel,
    extractor: Optional[EmotionExtractor],
    config: AttackConfig,
    threads: Optional[int] = None,
    model_id: str = "model",
    run_config: Optional[dict] = None,
) -> Tuple[List[AttackResult], BatchReport]:
    """
    Attack every motion independently and aggregate the results.

    Results keep input order and do not depend on the thread count.

    Args:
        motions: Dataset or list of normalized motions
        model: Victim classifier, shared read-only
        extractor: Emotion extractor, shared read-only
        config: Attack configuration; per-sample seeds derive from config.seed
        threads: Worker threads (0 or 1 = serial); defaults to SKELATTACK_THREADS
        model_id: Victim identifier for the report
        run_config: Resolved run configuration to embed in the report

    Returns:
        (results in input order, BatchReport)
    """
    if isinstance(motions, MotionDataset):
        motions = motions.motions
    motions = list(motions)
    threads = DEFAULT_THREADS if threads is None else threads
    logger.info(f"Attacking {len(motions)} motions ({config.mode.value}, γ={config.gamma}, I={config.iterations}, threads={threads})")

    if threads > 1 and len(motions) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda item: _attack_one(item[0], item[1], model, extractor, config), enumerate(motions)))
    else:
        results = [_attack_one(index, motion, model, extractor, config) for index, motion in enumerate(motions)]

    report = build_report(results, config.mode, config.gamma, model_id=model_id, run_config=run_config)
    return results, report
