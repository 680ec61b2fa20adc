"""CSV/JSON emission with stable formatting, and run manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, set, frozenset)):
        return ";".join(sorted(str(x) for x in v)) if isinstance(v, (set, frozenset)) else ";".join(str(x) for x in v)
    if v is None:
        return ""
    return str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def parse_csv(text: str):
    reader = csv.reader(io.StringIO(text))
    lines = list(reader)
    return lines[0], lines[1:]


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, (set, frozenset)):
        return sorted(v)
    if isinstance(v, tuple):
        return list(v)
    if hasattr(v, "item"):
        return v.item()
    return v


def json_text(header, rows) -> str:
    records = [{h: _jsonable(v) for h, v in zip(header, row)} for row in rows]
    return json.dumps({"columns": list(header), "records": records}, indent=1, sort_keys=False) + "\n"


def log2_or_nan(x: float) -> float:
    return math.log2(x) if x > 0 else float("nan")


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def emit(out_dir, name: str, header, rows, fmt: str = "csv") -> Path:
    """Write one table as ``name.csv`` or ``name.json``; returns the path."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{name}.{fmt}"
    text = csv_text(header, rows) if fmt == "csv" else json_text(header, rows)
    path.write_text(text)
    return path


def write_manifest(out_dir, command: str, params: dict, files, status: str = "ok", error: str | None = None) -> Path:
    out_dir = Path(out_dir)
    entries = [{"file": Path(f).name, "sha256": sha256_file(f)} for f in files]
    manifest = {"command": command, "status": status, "params": params, "files": entries}
    if error:
        manifest["error"] = error
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1, sort_keys=True, default=str) + "\n")
    return path
