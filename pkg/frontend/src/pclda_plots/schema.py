"""Reader for the pclda metrics CSV/JSON schema.

The training side publishes flat CSV files with one row per evaluated
(method, map_mode) pair.  This module is the only place that knows the
column names; the renderers work from parsed row dicts.
"""

from __future__ import annotations

import csv
import json


REQUIRED_COLUMNS = (
    "method",
    "lambda",
    "K",
    "map_mode",
    "split",
    "data_nll_per_token",
    "label_nll_per_doc",
)


class SchemaError(Exception):
    """Input file does not conform to the published metrics schema."""


def _coerce_row(raw, lineno):
    row = dict(raw)
    try:
        row["lambda"] = float(raw["lambda"])
        row["K"] = int(raw["K"])
        row["data_nll_per_token"] = float(raw["data_nll_per_token"])
        row["label_nll_per_doc"] = float(raw["label_nll_per_doc"])
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"line {lineno}: unparseable numeric field ({exc})")
    if row["map_mode"] not in ("train", "predict"):
        raise SchemaError(
            f"line {lineno}: map_mode must be 'train' or 'predict', "
            f"got {row['map_mode']!r}")
    return row


def read_metrics_csv(path):
    """Parse a metrics CSV into a list of row dicts with typed fields."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in REQUIRED_COLUMNS:
            if col not in header:
                raise SchemaError(f"missing column: {col}")
        rows = [_coerce_row(raw, lineno)
                for lineno, raw in enumerate(reader, start=2)]
    if not rows:
        raise SchemaError("metrics file has a header but no rows")
    return rows


def read_metrics(path):
    """Dispatch on extension: .json mirrors the CSV schema row for row."""
    if str(path).endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            try:
                raw_rows = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"not valid JSON: {exc}")
        if not isinstance(raw_rows, list) or not raw_rows:
            raise SchemaError("JSON metrics must be a nonempty list of rows")
        rows = []
        for i, raw in enumerate(raw_rows):
            for col in REQUIRED_COLUMNS:
                if col not in raw:
                    raise SchemaError(f"missing column: {col}")
            rows.append(_coerce_row({k: raw[k] for k in raw}, i + 1))
        return rows
    return read_metrics_csv(path)


def read_topic_checkpoint(path):
    """Load (phi, K, V) from a model checkpoint JSON."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}")
    for col in ("K", "V", "phi"):
        if col not in doc:
            raise SchemaError(f"missing column: {col}")
    K, V = int(doc["K"]), int(doc["V"])
    phi = doc["phi"]
    if len(phi) != K * V:
        raise SchemaError(f"phi has {len(phi)} entries, expected K*V = {K * V}")
    return phi, K, V
