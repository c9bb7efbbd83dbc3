"""
Fibrehom Configuration

Environment variable handling and numerical defaults shared by the solver.
"""

import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional


# Environment variable names
ENV_THREADS = "FIBREHOM_THREADS"
ENV_LOG_LEVEL = "FIBREHOM_LOG_LEVEL"
ENV_OUTPUT_DIR = "FIBREHOM_OUTPUT_DIR"

# Global Newton-Raphson defaults
DEFAULT_NEWTON_RTOL = 1e-6
DEFAULT_MAX_ITERATIONS = 25
DEFAULT_MAX_BISECTIONS = 10  # 1/1024 of a program step

# Local return-mapping defaults
DEFAULT_LOCAL_TOL = 1e-8
DEFAULT_LOCAL_MAX_ITERATIONS = 50

# Mixed macro control
DEFAULT_STRESS_TOL = 1e-8
DEFAULT_MIXED_MAX_ITERATIONS = 25

# Cohesive interface
DEFAULT_INTERFACE_THICKNESS = 0.001  # mm
DEFAULT_SHEAR_WEIGHT = 1.0

# Mesh quality gate
MIN_DIHEDRAL_WARNING_DEG = 5.0

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


@dataclass
class FibrehomSettings:
    """
    Process-wide settings for fibrehom.

    Attributes:
        threads: Worker count for sweeps (from FIBREHOM_THREADS)
        log_level: Root log level name (from FIBREHOM_LOG_LEVEL)
        output_dir: Default output directory when a config gives none
    """
    threads: int = 1
    log_level: str = "WARNING"
    output_dir: Path = field(default_factory=lambda: Path.cwd() / "fibrehom-out")

    @classmethod
    def from_environment(cls) -> "FibrehomSettings":
        """
        Load settings from environment variables.

        Environment Variables:
            FIBREHOM_THREADS: Positive integer worker count
            FIBREHOM_LOG_LEVEL: DEBUG, INFO, WARNING or ERROR
            FIBREHOM_OUTPUT_DIR: Directory for run outputs
        """
        settings = cls()

        if env_threads := os.environ.get(ENV_THREADS):
            try:
                settings.threads = max(1, int(env_threads))
            except ValueError:
                logging.getLogger(__name__).warning(
                    "Ignoring non-integer %s=%r", ENV_THREADS, env_threads
                )

        if env_level := os.environ.get(ENV_LOG_LEVEL):
            level = env_level.upper()
            if level in LOG_LEVELS:
                settings.log_level = level

        if env_dir := os.environ.get(ENV_OUTPUT_DIR):
            settings.output_dir = Path(os.path.expanduser(env_dir))

        return settings

    def numeric_log_level(self) -> int:
        """Return the logging module constant for log_level."""
        return getattr(logging, self.log_level, logging.WARNING)


# Global singleton
_settings: Optional[FibrehomSettings] = None


def get_settings() -> FibrehomSettings:
    """
    Get the global settings singleton.

    Returns:
        FibrehomSettings instance loaded from environment
    """
    global _settings
    if _settings is None:
        _settings = FibrehomSettings.from_environment()
    return _settings


def reset_settings() -> None:
    """
    Reset the global settings singleton.

    Useful for testing or when environment variables change.
    """
    global _settings
    _settings = None


def set_settings(settings: FibrehomSettings) -> None:
    """
    Set the global settings singleton.

    Args:
        settings: Settings to use
    """
    global _settings
    _settings = settings
