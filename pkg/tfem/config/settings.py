"""
tfem/config/settings.py
Environment-driven settings and the centralized construction constants.
"""

import os

from dotenv import load_dotenv

load_dotenv()


def _env_int(name: str, default: int, minimum: int = 1) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise EnvironmentError(f"{name} must be an integer, got {raw!r}")
    if value < minimum:
        raise EnvironmentError(f"{name} must be >= {minimum}, got {value}")
    return value


def _env_flag(name: str) -> bool:
    raw = os.getenv(name, "0").strip().lower()
    if raw in ("1", "true", "yes", "on"):
        return True
    if raw in ("0", "false", "no", "off", ""):
        return False
    raise EnvironmentError(f"{name} must be 0 or 1, got {raw!r}")


def workers() -> int:
    """Worker-pool size for sweeps (TFEM_WORKERS)."""
    return _env_int("TFEM_WORKERS", 4)


def debug() -> bool:
    """Per-layer cancellation assertions in constructions (TFEM_DEBUG)."""
    return _env_flag("TFEM_DEBUG")


def log_level() -> str:
    level = os.getenv("TFEM_LOG_LEVEL", "INFO").strip().upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        raise EnvironmentError(f"TFEM_LOG_LEVEL is not a logging level: {level!r}")
    return level


def output_dir() -> str:
    return os.getenv("TFEM_OUTPUT_DIR", "out")


class Defaults:
    """Constants shared by constructions, fits and experiments"""

    # ========================================
    # CONSTRUCTIONS
    # ========================================
    BETA_SCALE = 50.0          # assignment temperature beta = BETA_SCALE * ln N
    ESTEP_SCALE = 2.0          # E-step score scale = ESTEP_SCALE * ln N
    TFPLUS_TARGET_C = 5
    TFPLUS_THEORY_C = 100
    NEWTON_STEPS = 4
    PCA_CORRELATION = 0.25     # start-vector guard |<p, v>| >= PCA_CORRELATION / sqrt(d)
    PCA_START_TRIES = 100
    CANCELLATION_TOL = 1e-12

    # ========================================
    # RANDOM-FEATURE FITS
    # ========================================
    RIDGE = 1e-8
    SAMPLES_PER_FEATURE = 50
    MAX_FIT_SAMPLES = 32_768
    FIT_CHUNK = 4096
    FIT_RESEEDS = 5
    PROBE_POINTS = 10_000
    REFINE_STEPS = 2

    # ========================================
    # EXPERIMENTS
    # ========================================
    PER_CLUSTER = 50
    SEEDS = 10
    MAX_MEAN_TRIES = 100_000
