import hashlib
import json
import logging
import os
import pickle
import random
import sys
from datetime import datetime
from typing import Any, Optional

import numpy as np


def hash_str(s):
    return hashlib.md5(s.encode()).hexdigest()


def set_logger(
    output_path: Optional[str] = None,
    exp_name: Optional[str] = None,
    level: int = logging.INFO,
):
    """Attaches a stdout handler and a log.txt file handler to the root logger.

    Args:
        output_path: Optional[str], directory holding experiment folders.
            Defaults to the working directory.
        exp_name: Optional[str], name of the experiment folder. Defaults to a
            timestamp.
        level: int, logging level of the root logger. Default is INFO.

    Returns:
        exp_path: str, path of the experiment folder (created if missing).
    """
    logging.basicConfig()
    logger = logging.getLogger()
    logger.setLevel(level)
    # streamHandler
    stream_handler = logging.StreamHandler(sys.stdout)
    logger.addHandler(stream_handler)
    # fileHandler
    if output_path is None:
        output_path = "./"
    if exp_name is None:
        exp_name = str(datetime.now().timestamp())
    exp_path = os.path.join(output_path, exp_name)
    create_directory(exp_path)
    log_filename = os.path.join(exp_path, "log.txt")
    file_handler = logging.FileHandler(log_filename)
    logger.addHandler(file_handler)
    return exp_path


def set_seed(seed):
    random.seed(seed)
    np.random.seed(seed)
    os.environ["PYTHONHASHSEED"] = str(seed)


def create_directory(directory):
    if not os.path.exists(directory):
        os.makedirs(directory)


def load_pickle(filename):
    with open(filename, "rb") as f:
        return pickle.load(f)


def save_pickle(data, filename):
    with open(filename, "wb") as f:
        pickle.dump(data, f)


def to_jsonable(obj: Any) -> Any:
    """Converts numpy values and complex numbers into plain JSON types.

    Complex numbers become ``[re, im]`` pairs; arrays become nested lists.
    Non-finite floats are written as strings so the output stays valid JSON.
    """
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(float(obj.real)), to_jsonable(float(obj.imag))]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not np.isfinite(value):
            return str(value)
        return value
    return obj


def save_json(data, filename):
    with open(filename, "w") as f:
        json.dump(to_jsonable(data), f, indent=2, sort_keys=True)


def load_json(filename):
    with open(filename, "r") as f:
        return json.load(f)


def complex_from_pair(pair) -> complex:
    """Inverse of the ``[re, im]`` encoding; plain numbers pass through."""
    if isinstance(pair, (list, tuple)):
        return complex(pair[0], pair[1])
    return complex(pair)
