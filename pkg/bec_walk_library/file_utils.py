from __future__ import annotations

import json
import os
from typing import Union

import numpy as np
from pandas import DataFrame as DF

# Initiate logging
from .log_config import get_logger

log = get_logger(__name__)

SCHEMA_VERSION = 1
CSV_FLOAT_FORMAT = "%.17g"


def csv_text(df: DF) -> str:
    """Render a DataFrame as locale-independent CSV.

    Parameters
    ----------
    df : DataFrame
        per-site results

    Returns
    -------
    str
        header row, ',' separator, '.' decimal, 17 significant digits
    """
    return df.to_csv(index=False, float_format=CSV_FLOAT_FORMAT, lineterminator="\n")


def json_text(document: dict) -> str:
    """Render a result document as stable JSON (sorted keys, trailing newline)."""
    return json.dumps(_plain(document), sort_keys=True, indent=2) + "\n"


def results_to_csv(df: DF, csv_name: str, results_folder: str = "./results/") -> str:
    """Store a DataFrame to a CSV in a defined folder.

    Parameters
    ----------
    df : DataFrame
        a DataFrame of results

    csv_name : str
        The name you would like the results CSV to be called

    results_folder : str, default: './results/'
        The folder in which you would like to store the CSV

    Returns
    -------
    str
        path of the written file
    """
    make_dir_if_not_exists(results_folder)

    file = os.path.join(results_folder, csv_name)
    with open(file, "w", encoding="utf-8", newline="") as handle:
        handle.write(csv_text(df))

    log.info(f"Wrote {len(df.index)} rows to {file}")
    return file


def results_to_json(document: dict, json_name: str, results_folder: str = "./results/") -> str:
    """Store a result document to a JSON file in a defined folder.

    Parameters
    ----------
    document : dict
        JSON-serialisable results; numpy scalars and arrays are converted

    json_name : str
        The name you would like the JSON file to be called

    results_folder : str, default: './results/'
        The folder in which you would like to store the file

    Returns
    -------
    str
        path of the written file
    """
    make_dir_if_not_exists(results_folder)

    file = os.path.join(results_folder, json_name)
    with open(file, "w", encoding="utf-8", newline="") as handle:
        handle.write(json_text(document))

    log.info(f"Wrote {file}")
    return file


def check_if_file_exists(path: str) -> Union[str, bool]:
    """Check if a file exists

    Parameters
    ----------
    path : str
        path to the file in question

    Returns
    -------
    str
        returns the filepath, or False if the file does not exist
    """
    if filename_is_blank(os.path.basename(path)):
        return False

    directory = os.path.dirname(path) or "."
    if not os.path.exists(directory):
        log.warning(f"{directory} does not exist.")
        return False
    if not os.path.isfile(path):
        log.warning(f"`{os.path.basename(path)}` does not exist in {directory}.")
        return False

    return path


def filename_is_blank(filename: str) -> bool:
    """Checks if a filename is blank

    Parameters
    ----------
    filename : str
        a filename to check

    Returns
    -------
    bool
        True, if filename is empty; False, if filename is not empty
    """

    if filename == "":
        log.error("You entered a blank filename")
        return True
    else:
        return False


def make_dir_if_not_exists(folder: str) -> None:
    """A function that creates a directory, if it does not already exist in the filesystem. If the folder already exists, do nothing.

    Parameters
    ----------
    folder : str
        a directory to create

    Returns
    -------
    None
    """
    if not os.path.exists(folder):
        # If folder doesn't exist, create it.
        os.makedirs(folder)


def _plain(value):
    """Convert numpy containers and scalars into JSON-native types."""
    if isinstance(value, dict):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.ndarray):
        return [_plain(item) for item in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value
