import os
import tempfile
from collections.abc import Iterable
from pathlib import Path

import pandas as pd

from core.errors import FigDataError
from core.settings import settings


def read_table(
    file: Path, required: Iterable[str] | None = None, text_columns: Iterable[str] = ("events",)
) -> pd.DataFrame:
    """
    reads a metrics-like csv and checks it.
        - required: columns that must be present
        - text_columns: columns left as text; every other column must be numeric
    Malformed rows are reported with their 1-based line number in the file (header is line 1).
    """
    file = Path(file)
    if not file.is_file():
        raise FigDataError(f"File not found: '{file}'")
    if file.suffix != ".csv":
        raise FigDataError(f"Unsupported file type: {file.suffix[1:]}")
    try:
        df = pd.read_csv(file)
    except pd.errors.ParserError as e:
        raise FigDataError(f"'{file}': malformed csv: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise FigDataError(f"'{file}': empty file") from e

    missing = [c for c in (required or []) if c not in df.columns]
    if missing:
        raise FigDataError(f"'{file}': missing columns {missing}")

    for col in df.columns:
        if col in text_columns:
            continue
        values = pd.to_numeric(df[col], errors="coerce")
        bad = values.isna()
        if bad.any():
            line = int(bad.to_numpy().argmax()) + 2
            raise FigDataError(f"'{file}', line {line}: column '{col}' is not a number")
        df[col] = values
    return df


def write_atomic(path: Path, text: str) -> Path:
    """writes `text` through a temp file in the same directory and renames it over `path`"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def write_table(df: pd.DataFrame, path: Path) -> Path:
    return write_atomic(path, df.to_csv(index=False, float_format=settings.CSV_FLOAT_FORMAT, lineterminator="\n"))


def read_concat_all(folder: Path, name: str = settings.METRICS_FILE_NAME, required: Iterable[str] | None = None) -> pd.DataFrame:
    """
    read all `name` files under `folder` and concat them into one dataframe,
    each row tagged with the run directory it came from (`run` column)
    """
    folder = Path(folder)
    if not folder.exists():
        raise FigDataError(f"Folder not found: {folder}")
    files = sorted(folder.rglob(name))
    if not files:
        raise FigDataError(f"No '{name}' files under {folder}")
    dfs = [read_table(f, required).assign(run=f.parent.relative_to(folder).as_posix()) for f in files]
    return pd.concat(dfs, ignore_index=True)
