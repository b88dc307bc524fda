"""
Experiment grids read from JSON files.
"""

import json
import logging
import os

from errors import RoyalRoadError
from experiments import ExperimentRow
from royal_road import RoyalRoadLayout

logger = logging.getLogger(__name__)

GRID_KEYS = ("n", "K", "M", "mu", "lambda")


def load_grid(file_path: str) -> list[ExperimentRow]:
    """
    Load an experiment grid from a JSON file.

    The file holds a list of rows, one object per row:

    [
        {"n": 32, "K": 4, "M": 8, "mu": 4, "lambda": 4},
        {"n": 64, "K": 8, "M": 8, "mu": 10, "lambda": 10}
    ]

    Rows with missing keys, non-integer values or an invalid geometry are
    skipped with a warning.

    Args:
        file_path: Path to the JSON file

    Returns:
        The valid rows in file order; empty if the file is missing or unreadable
    """
    if not os.path.exists(file_path):
        logger.error(f"Grid file {file_path} does not exist")
        return []

    try:
        with open(file_path, "r") as f:
            entries = json.load(f)
    except json.JSONDecodeError as e:
        logger.error(f"Failed to parse grid file {file_path}: {e}")
        return []
    except OSError as e:
        logger.error(f"Failed to read grid file {file_path}: {e}")
        return []

    if not isinstance(entries, list):
        logger.error(f"Grid file must contain a JSON list, got {type(entries).__name__}")
        return []

    rows: list[ExperimentRow] = []
    for position, entry in enumerate(entries):
        if not isinstance(entry, dict) or any(key not in entry for key in GRID_KEYS):
            logger.warning(f"Skipping grid entry {position}: expected an object with keys {', '.join(GRID_KEYS)}")
            continue
        values = [entry[key] for key in GRID_KEYS]
        # bool is an int subclass; reject it explicitly
        if any(not isinstance(value, int) or isinstance(value, bool) for value in values):
            logger.warning(f"Skipping grid entry {position}: values must be integers, got {entry}")
            continue
        n, K, M, mu, lam = values
        try:
            rows.append(ExperimentRow(RoyalRoadLayout(n, K, M), mu, lam))
        except RoyalRoadError as e:
            logger.warning(f"Skipping grid entry {position}: {e}")

    return rows
