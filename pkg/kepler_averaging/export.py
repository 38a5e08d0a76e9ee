import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"{type(value).__name__} is not json serializable")


def to_json_text(data: dict) -> str:
    return json.dumps(data, indent=2, default=_json_default, allow_nan=True) + "\n"


def atomic_write_text(text: str, path: str | Path) -> Path:
    """
    write to a temporary file next to path, then rename over it
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as tmp:
            tmp.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise
    return path


def write_json(data: dict, path: str | Path) -> Path:
    return atomic_write_text(to_json_text(data), path)


def write_frame(df: pd.DataFrame, path: str | Path, float_format: str = "%.17g") -> Path:
    """
    save a DataFrame as csv without the index
    """
    if not isinstance(df, pd.DataFrame):
        raise ValueError("df is not pandas DataFrame")
    csv_buffer = io.StringIO()
    df.to_csv(csv_buffer, index=False, float_format=float_format, lineterminator="\n")
    return atomic_write_text(csv_buffer.getvalue(), path)
