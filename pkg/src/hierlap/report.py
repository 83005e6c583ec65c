"""Machine-readable output: canonical JSON, RFC-4180 CSV, run manifests.

Numeric fields are serialized in decimal with 17 significant digits, which
round-trips IEEE doubles exactly, so a re-run with identical inputs produces
byte-identical payload sections.  Each JSON document embeds a manifest with
the parameter echo and a checksum of its own result section; CSV outputs get
a sidecar manifest file.
"""

import csv
import hashlib
import io
import json
import math

import numpy as np

TOOL_VERSION = "0.1.0"

_RESULT_KEYS = {
    "spectrum-report/v1": ("entries", "config"),
    "phase-diagram/v1": ("alpha_grid", "sigma_grid", "boundary"),
    "heat-kernel/v1": ("rows",),
    "sparse-ess/v1": ("inherited", "intervals", "negative", "config"),
    "localize-report/v1": ("moments", "decay", "discarded_fraction", "config"),
    "csv-manifest/v1": ("csv_sha256", "n_rows"),
}


def fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError("non-finite floats are not serializable; encode them symbolically")
    return format(x, ".17g")


def canonical_json(obj) -> str:
    """Deterministic JSON: sorted keys, 17-significant-digit floats."""
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (np.floating, float)):
        return fmt_float(float(obj))
    if isinstance(obj, (np.integer, int)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, complex):
        return canonical_json({"re": obj.real, "im": obj.imag})
    if isinstance(obj, np.ndarray):
        return canonical_json(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    if isinstance(obj, dict):
        parts = []
        for key in sorted(obj):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            parts.append(json.dumps(key) + ":" + canonical_json(obj[key]))
        return "{" + ",".join(parts) + "}"
    raise TypeError(f"cannot serialize object of type {type(obj).__name__}")


def sha256_hex(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def build_document(schema: str, subcommand: str, params: dict, payload,
                   seed=None, wall_time_s: float = 0.0) -> str:
    """Assemble a full JSON document string with an embedded manifest."""
    if schema not in _RESULT_KEYS:
        raise ValueError(f"unknown schema {schema!r}")
    payload_str = canonical_json(payload)
    manifest = {
        "subcommand": subcommand,
        "params": params,
        "seed": seed,
        "version": TOOL_VERSION,
        "wall_time_s": wall_time_s,
        "payload_sha256": sha256_hex(payload_str),
    }
    doc = {"schema": schema, "manifest": manifest, "result": payload}
    return canonical_json(doc) + "\n"


def write_document(path, document: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(document)


def validate_document(doc: dict) -> None:
    """Raise ValueError when a parsed document violates its schema."""
    for key in ("schema", "manifest", "result"):
        if key not in doc:
            raise ValueError(f"document is missing the {key!r} section")
    schema = doc["schema"]
    if schema not in _RESULT_KEYS:
        raise ValueError(f"unknown schema {schema!r}")
    manifest = doc["manifest"]
    for key in ("subcommand", "params", "seed", "version", "wall_time_s", "payload_sha256"):
        if key not in manifest:
            raise ValueError(f"manifest is missing the {key!r} field")
    expected = sha256_hex(canonical_json(doc["result"]))
    if manifest["payload_sha256"] != expected:
        raise ValueError("payload checksum does not match the manifest")
    for key in _RESULT_KEYS[schema]:
        if key not in doc["result"]:
            raise ValueError(f"result section is missing the {key!r} field")


def _cell(value) -> str:
    if isinstance(value, (np.floating, float)):
        return fmt_float(float(value))
    if isinstance(value, (np.integer, int)) and not isinstance(value, bool):
        return str(int(value))
    return str(value)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)  # RFC-4180 style CRLF line endings
    writer.writerow(list(header))
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def write_csv(path, header, rows, subcommand: str, params: dict, seed=None,
              wall_time_s: float = 0.0) -> str:
    """Write a CSV table plus its sidecar manifest; returns the CSV text."""
    text = csv_text(header, rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    payload = {"csv_sha256": sha256_hex(text), "n_rows": len(rows)}
    doc = build_document("csv-manifest/v1", subcommand, params, payload,
                         seed=seed, wall_time_s=wall_time_s)
    write_document(str(path) + ".manifest.json", doc)
    return text
