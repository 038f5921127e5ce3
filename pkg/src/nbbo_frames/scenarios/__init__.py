"""Shipped scenario files."""

from pathlib import Path

SCENARIO_DIR = Path(__file__).parent


def scenario_path(name: str) -> Path:
    """Path of a shipped scenario, e.g. ``scenario_path("paper_network")``."""
    return SCENARIO_DIR / f"{name}.scenario"
