"""
Settings for the skeletal-motion attack toolkit.
Numerical constants, environment-driven options and named presets.
"""

import logging
import os
import subprocess
from pathlib import Path

from dotenv import load_dotenv

PROJECT_ROOT = Path(__file__).resolve().parent.parent
load_dotenv(PROJECT_ROOT / ".env")

TOOL_VERSION = "0.4.0"

# Dot-product clamp for bone angles: cos is kept inside [-1 + EPS_CLAMP, 1 - EPS_CLAMP]
EPS_CLAMP = 1e-6
# Bones shorter than this (normalized units) have no defined angle
EPS_LEN = 1e-8
# Denominator guard for relative deviations in losses and metrics
EPS_DEN = 1e-4

LOG_LEVEL = os.getenv("SKELATTACK_LOG_LEVEL", "INFO").upper()


def _read_threads() -> int:
    raw = os.getenv("SKELATTACK_THREADS", "0")
    try:
        return max(0, int(raw))
    except ValueError:
        logging.getLogger(__name__).warning(f"Ignoring invalid SKELATTACK_THREADS value: {raw!r}")
        return 0


DEFAULT_THREADS = _read_threads()

PRESETS = {
    "paper-desk": {
        "topology": "chain16",
        "frames": 32,
        "classes": 5,
        "per_class": 100,
        "test_fraction": 0.1,
        "arch": "mlp",
        "hidden": [64, 64],
        "epochs": 200,
        "train_lr": 1e-3,
        "gammas": [0.1, 1.0, 10.0],
        "iterations": 1000,
        "attack_lr": 5e-3,
    },
}


def setup_logging(level: str = None) -> None:
    """Configure process-wide logging once (CLI and scripts call this)."""
    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def tool_version() -> str:
    """
    Version string in git-describe style.

    Uses `git describe` when the checkout is a git work tree, otherwise the
    packaged version prefixed with 'v'.
    """
    try:
        described = subprocess.run(
            ["git", "describe", "--tags", "--always", "--dirty"],
            cwd=PROJECT_ROOT,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if described.returncode == 0 and described.stdout.strip():
            return described.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    return f"v{TOOL_VERSION}"
