import json
import math
from typing import Any
from configparser import ConfigParser, Error as ConfigError

import numpy as np

from .log import error
from .errors import ParseError
from .types import PathLike, DenseMatrix, Vector
from .files import ensure_path_exists

__all__: list[str] = ["parse_matrix_csv", "parse_vector_csv", "parse_ini_section", "parse_json", "split_number_list"]


def _parse_row(line: str, lineno: int, file: Any, caller: Any) -> list[float]:
    values = []
    for cell in line.split(","):
        cell = cell.strip()
        try:
            value = float(cell)
        except ValueError:
            raise error(f"{file}: line {lineno}: '{cell}' is not a number.", caller, ParseError)
        if not math.isfinite(value):
            raise error(f"{file}: line {lineno}: non-finite value '{cell}'.", caller, ParseError)
        values.append(value)
    return values


def parse_matrix_csv(file: PathLike) -> DenseMatrix:
    """
    Parses a matrix file. The first non-empty line is the header `rows,cols`,
    every following non-empty line is one comma separated row.
    Lines starting with '#' are ignored.

    :param file:    Input file

    :return:        rows x cols float64 array
    """
    path = ensure_path_exists(file, parse_matrix_csv, exc=ParseError)
    header: tuple[int, int] | None = None
    rows: list[list[float]] = []
    with path.open("r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if header is None:
                parts = [p.strip() for p in line.split(",")]
                if len(parts) != 2 or not all(p.isdigit() for p in parts):
                    raise error(f"{path.name}: line {lineno}: expected header 'rows,cols', got '{line}'.", parse_matrix_csv, ParseError)
                header = (int(parts[0]), int(parts[1]))
                if 0 in header:
                    raise error(f"{path.name}: line {lineno}: empty dimensions {header}.", parse_matrix_csv, ParseError)
                continue
            row = _parse_row(line, lineno, path.name, parse_matrix_csv)
            if len(row) != header[1]:
                raise error(f"{path.name}: line {lineno}: expected {header[1]} values, got {len(row)}.", parse_matrix_csv, ParseError)
            if len(rows) == header[0]:
                raise error(f"{path.name}: line {lineno}: more rows than the header's {header[0]}.", parse_matrix_csv, ParseError)
            rows.append(row)

    if header is None:
        raise error(f"{path.name}: line 1: missing 'rows,cols' header.", parse_matrix_csv, ParseError)
    if len(rows) != header[0]:
        raise error(f"{path.name}: line {lineno + 1}: expected {header[0]} rows, got {len(rows)}.", parse_matrix_csv, ParseError)
    return np.asarray(rows, dtype=np.float64)


def parse_vector_csv(file: PathLike) -> Vector:
    """
    Parses a vector file. Same layout as a matrix file with either `n,1` or `1,n` as header.
    """
    mat = parse_matrix_csv(file)
    if mat.shape[0] != 1 and mat.shape[1] != 1:
        raise error(f"'{file}' holds a {mat.shape[0]}x{mat.shape[1]} matrix, expected a vector.", parse_vector_csv, ParseError)
    return mat.reshape(-1)


def parse_ini_section(file: PathLike, section: str) -> dict[str, str]:
    """
    Reads one section of an ini file into a plain dict.

    :param file:        Input file
    :param section:     Section name without brackets
    """
    path = ensure_path_exists(file, parse_ini_section, exc=ParseError)
    config = ConfigParser()
    try:
        config.read(path, encoding="utf-8")
    except ConfigError as e:
        lineno = getattr(e, "lineno", "?")
        raise error(f"{path.name}: line {lineno}: {e.message.splitlines()[0]}", parse_ini_section, ParseError)
    if section not in config:
        raise error(f"{path.name}: missing [{section}] section.", parse_ini_section, ParseError)
    return dict(config[section])


def parse_json(file: PathLike) -> Any:
    path = ensure_path_exists(file, parse_json, exc=ParseError)
    try:
        with path.open("r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise error(f"{path.name}: line {e.lineno}: {e.msg}", parse_json, ParseError)


def split_number_list(value: str, cast: type = float, caller: Any = None) -> list:
    """
    Parses '1,2,3' or ranges like '1..8' (inclusive, integers only).

    :param value:       Raw string
    :param cast:        int or float
    """
    out = []
    for part in value.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = part.split("..", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(cast(part))
        except ValueError:
            raise error(f"'{part}' is not a valid {cast.__name__} or range.", caller or split_number_list, ParseError)
    if not out:
        raise error(f"'{value}' holds no values.", caller or split_number_list, ParseError)
    return out
