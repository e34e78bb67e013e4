# pylint: disable=broad-except

"""
General helper functions
"""

# System Libraries
import os
from pathlib import Path
import sys
from typing import List, Union

import pandas as pd

# Project root added to the sys.path, so that scripts can be run unpackaged as well as packaged.
sys.path.append(str(Path(__file__).resolve().parent.parent))

# Local libraries
from ldtsp.classes.config import Config

# Results CSV schema, in column order.
RESULT_COLUMNS = [
    "instance",
    "variant",
    "gamma",
    "alpha",
    "seed",
    "status",
    "cost",
    "bound",
    "gap_pct",
    "nodes",
    "cuts",
    "lp_iters",
    "wall_s",
]

# Warm-start quality next to results.csv; instances within the Held-Karp limit only.
WARM_START_GAP_COLUMNS = ["instance", "gamma", "targets", "warm_cost", "optimal_cost", "gap_pct"]


def gap_percent(incumbent: float, bound: float) -> float:
    """
    Optimality gap relative to the incumbent: 100 * (incumbent - bound) / incumbent.

    Inputs:
     - incumbent (float): cost of the best known tour, > 0.
     - bound (float): best lower bound, <= incumbent + 1e-7.

    Returns:
     - float, clamped at 0 when the bound exceeds the incumbent by round-off.
    """
    if not incumbent > 0:
        raise ValueError(f"the gap is undefined for incumbent {incumbent} <= 0")
    if bound > incumbent + 1e-7:
        raise ValueError(f"bound {bound} exceeds incumbent {incumbent}")
    return max(0.0, 100.0 * (incumbent - bound) / incumbent)


def parse_sequence(text: str) -> List[int]:
    """Parses "3,1,2" into [3, 1, 2]. Raises ValueError on anything else."""
    parts = [part.strip() for part in text.split(",")]
    if not text.strip() or any(not part for part in parts):
        raise ValueError(f"malformed sequence {text!r}")
    return [int(part) for part in parts]


def df_to_csv(
    df: pd.DataFrame, csv_file: str, append=False, config=None, **kwargs
) -> bool:
    """
    Save dataframe to CSV.
    If the CSV already exists and `append` is True, rows are appended under the
        existing header. If `append` is False, existing CSV is overwritten.

    Inputs:
     - df (pd.DataFrame): Dataframe to save.
     - csv_file (str): Path to CSV output file.
     - append (bool): Append to an existing file instead of overwriting it.
        If the output CSV does not already exist, this parameter is disregarded.
     - config ([None, ldtsp.Config]): Config object.
     - **kwargs: Any additional parameters will be input directly into the pandas
        .to_csv() function

    Returns:
     - bool: True if CSV file is saved/updated. False if data failed to save to CSV.
    """
    if config is None:
        config = Config()

    config.logger.debug("Saving to : %s ...", csv_file)
    kwargs.setdefault("index", False)
    try:
        folder = os.path.dirname(csv_file)
        if folder and not os.path.exists(folder):
            os.makedirs(folder)
        if os.path.isfile(csv_file) and append:
            config.logger.debug("Exists, updating : %s ...", csv_file)
            df.to_csv(csv_file, mode="a", header=False, **kwargs)
        else:
            df.to_csv(csv_file, mode="w", **kwargs)
    except PermissionError:
        config.logger.error("Permission denied: Unable to save to %s.", csv_file)
        return False
    except Exception as e:
        config.logger.error("Problem saving df to file. Message: %s", e)
        return False
    config.logger.info("Saved: %s", csv_file)
    return True


def csv_to_df(csv_path, *args, config=None, **kwargs) -> Union[pd.DataFrame, None]:
    """
    Loads CSV file as a Pandas DataFrame.

    Inputs:
     - csv_path (str): Relative or absolute path to the input CSV file.
     - *args: Additional positional arguments passed to pd.read_csv().
     - config ([None, ldtsp.Config]): Config object.
     - **kwargs: Additional keyword arguments passed to pd.read_csv().

    Returns:
     - pd.DataFrame: Dataframe if successful, None if file doesn't exist or
        otherwise unsuccesful.
    """
    if config is None:
        config = Config()

    if not os.path.exists(csv_path):
        message = f"Error: The file '{csv_path}' does not exist."
        config.logger.error(message)
        return None

    try:
        df = pd.read_csv(csv_path, *args, **kwargs)
        return df
    except Exception as e:
        config.logger.error(
            "An error occurred while reading the CSV file %s: %s", csv_path, e
        )
        return None


def results_frame(rows: List[dict]) -> pd.DataFrame:
    """Rows of result dicts as a DataFrame in the stable column order."""
    return pd.DataFrame(rows, columns=RESULT_COLUMNS)


def warm_start_frame(rows: List[dict]) -> pd.DataFrame:
    return pd.DataFrame(rows, columns=WARM_START_GAP_COLUMNS)
