# utils.py

import csv
import io
import json
import math
import os
from enum import Enum
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

import rkhs.algebra  # noqa: F401  registers the "frame" node
import rkhs.fractal  # noqa: F401  registers the "ifs" node
from rkhs.core import DomainTag, GramMatrix, KernelExpr, PointSet, kernel_from_descriptor
from rkhs.ktransform import DiscreteMeasure


class ConfigError(ValueError):
    """Malformed experiment configuration or unusable output location."""
    pass


def format_scalar(value) -> str:
    """
    Deterministic text for a number: shortest round-trip repr for reals,
    "re+imi" for complex values with a nonzero imaginary part.

    Examples:
        >>> format_scalar(0.25)
        '0.25'
        >>> format_scalar(1 - 2j)
        '1.0-2.0i'
    """
    if isinstance(value, Fraction):
        return str(value)
    z = complex(value)
    if z.imag == 0:
        return repr(z.real)
    sign = "-" if math.copysign(1.0, z.imag) < 0 else "+"
    return f"{z.real!r}{sign}{abs(z.imag)!r}i"


def parse_scalar(text) -> complex:
    """Inverse of format_scalar; also accepts plain numbers and Python "j" notation."""
    if isinstance(text, (int, float, complex)):
        value = complex(text)
    else:
        try:
            value = complex(str(text).strip().replace(" ", "").replace("i", "j"))
        except ValueError as e:
            raise ValueError(f"Error parsing scalar {text!r}: {e}")
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise ValueError(f"Non-finite scalar: {text!r}")
    return value


def to_jsonable(value):
    """Convert numpy, complex and exact values into plain JSON types."""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else str(value)
    if isinstance(value, (complex, np.complexfloating)):
        return format_scalar(value)
    return value


def write_atomic(path: str, text: str) -> None:
    """Write text to path through a temporary sibling file and a rename."""
    tmp_path = path + ".tmp"
    try:
        with open(tmp_path, "w", newline="") as f:
            f.write(text)
        os.replace(tmp_path, path)
    except OSError:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([cell if isinstance(cell, str) else format_scalar(cell) for cell in row])
    write_atomic(path, buffer.getvalue())


def write_json(path: str, data: Dict) -> None:
    write_atomic(path, json.dumps(to_jsonable(data), indent=2, sort_keys=True) + "\n")


def gram_rows(entries: np.ndarray) -> List[List]:
    """(i, j, value) rows of a square matrix in row-major order."""
    n = entries.shape[0]
    return [[str(i), str(j), entries[i, j]] for i in range(n) for j in range(n)]


def point_rows(pts: PointSet) -> List[List]:
    return [[str(i), value] for i, value in enumerate(pts.values)]


def prepare_output_dir(out_dir: str) -> str:
    """
    Create the artifact directory and check that it is writable.

    Raises:
        ConfigError: If the directory cannot be created or written
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"Error creating output directory {out_dir}: {e}")
    if not os.access(out_dir, os.W_OK):
        raise ConfigError(f"Output directory is not writable: {out_dir}")
    return out_dir


def export_results(out_dir: str, summary: Dict, files: Optional[Dict[str, tuple]] = None,
                   documents: Optional[Dict[str, Dict]] = None) -> Dict:
    """
    Write every CSV artifact and the summary record of one experiment

    Parameters:
        out_dir: Target directory, created if missing
        summary: Summary record; the list of written files is added to it
        files: Mapping file name -> (header, rows)
        documents: Mapping file name -> JSON document

    Returns:
        The summary record as written to summary.json

    Example summary.json:
    {
        "assertions": {"chain_holds": true},
        "config": {"kernel": "szego", "n_max": 4, ...},
        "experiment": "order-chain",
        "files": ["order_chain.csv"],
        "passed": true,
        "seed": 7,
        "tolerances": {"psd": 1e-09},
        "truncations": {"K^1": 64}
    }
    """
    prepare_output_dir(out_dir)
    files = files or {}
    documents = documents or {}
    for name, (header, rows) in sorted(files.items()):
        write_csv(os.path.join(out_dir, name), header, rows)
    for name, document in sorted(documents.items()):
        write_json(os.path.join(out_dir, name), document)
    record = dict(summary)
    record["files"] = sorted(list(files) + list(documents))
    write_json(os.path.join(out_dir, "summary.json"), record)
    return to_jsonable(record)


def load_experiment_config(config_path: str) -> Dict:
    """
    Load experiment settings from a flat JSON object

    Example config file:
    {
        "experiment": "order-chain",
        "kernel": "szego",
        "points": "disk:40:r0.9",
        "n_max": 4,
        "seed": 7
    }

    Raises:
        ConfigError: If the file is unreadable or not a JSON object
    """
    try:
        with open(config_path, "r") as f:
            config = json.load(f)
        if not isinstance(config, dict):
            raise ValueError("top level must be an object")
        return {key.replace("-", "_"): value for key, value in config.items()}
    except (OSError, json.JSONDecodeError, ValueError) as e:
        raise ConfigError(f"Error loading experiment config: {str(e)}")


def load_kernel(source) -> KernelExpr:
    """
    Kernel from a descriptor dict or the path of a JSON file holding one.

    Raises:
        ConfigError: If the descriptor is unreadable or malformed
    """
    try:
        if isinstance(source, dict):
            descriptor = source
        else:
            with open(source, "r") as f:
                descriptor = json.load(f)
        return kernel_from_descriptor(descriptor)
    except (OSError, json.JSONDecodeError, KeyError, IndexError, TypeError, ValueError) as e:
        raise ConfigError(f"Error loading kernel descriptor: {str(e)}")


def measure_from_dict(data: Dict) -> DiscreteMeasure:
    """DiscreteMeasure from {"points": [...], "weights": [...], "domain": ...}."""
    try:
        values = [parse_scalar(v) for v in data["points"]]
        weights = [parse_scalar(w) for w in data["weights"]]
        domain = DomainTag(data.get("domain", DomainTag.DISK.value))
        return DiscreteMeasure(PointSet(values, domain), weights)
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Error loading measure: {str(e)}")


def gram_to_dict(g: GramMatrix) -> Dict:
    """{points, entries, kernel_descriptor, truncation} with "re+imi" scalars."""
    return {
        "points": [format_scalar(v) for v in g.points.values],
        "domain": g.points.domain.value,
        "entries": [[format_scalar(v) for v in row] for row in g.entries],
        "kernel_descriptor": g.kernel.to_descriptor(),
        "truncation": g.truncation,
    }
