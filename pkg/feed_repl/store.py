"""Directories and the JSON run index.

The run index is a small JSON file in the output directory mapping an
experiment name to its latest summary record.
"""

from __future__ import annotations

import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

OUT_DIR_ENV = "FEEDREPL_OUT_DIR"
INDEX_NAME = "runs.json"


def config_dir() -> Path:
    if sys.platform == "darwin":
        base = Path.home() / "Library" / "Application Support" / "FeedRepl"
    elif os.name == "nt":
        base = Path(os.path.expanduser(os.getenv("APPDATA", "~"))) / "FeedRepl"
    else:
        base = Path.home() / ".config" / "feedrepl"
    base.mkdir(parents=True, exist_ok=True)
    return base


def output_dir(override: str | os.PathLike[str] | None = None) -> Path:
    """Resolve the output directory: explicit flag, then env var, then ./results."""
    if override:
        base = Path(override)
    elif os.getenv(OUT_DIR_ENV):
        base = Path(os.environ[OUT_DIR_ENV])
    else:
        base = Path.cwd() / "results"
    base.mkdir(parents=True, exist_ok=True)
    return base


def _index_path(out: Path) -> Path:
    return out / INDEX_NAME


def load_index(out: Path) -> dict:
    path = _index_path(out)
    try:
        return json.loads(path.read_text()) if path.exists() else {}
    except Exception:
        return {}


def save_index(out: Path, index: dict) -> None:
    try:
        _index_path(out).write_text(json.dumps(index, indent=2, sort_keys=True))
    except OSError:
        pass


def get_record(out: Path, name: str) -> dict | None:
    return load_index(out).get(name)


def set_record(out: Path, name: str, data: dict) -> None:
    index = load_index(out)
    record = dict(data)
    record["updated"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    index[name] = record
    save_index(out, index)
