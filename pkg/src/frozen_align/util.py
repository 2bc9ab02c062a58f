"""Small shared helpers."""

from __future__ import annotations

import hashlib
import json


def config_digest(obj) -> str:
    """Stable short hash of a JSON-compatible config, recorded in reports."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]
