"""Scenario-based stochastic day-ahead scheduling of radial-feeder microgrids."""

from pathlib import Path

__version__ = "0.1.0"

DATA_DIR = Path(__file__).resolve().parent / "data"


def fixture_path(name: str) -> Path:
    """Path of a case file shipped with the package, e.g. ``fixture_path("ieee69.json")``."""
    return DATA_DIR / name
