"""Reproducibility manifests written next to every produced artifact.

A manifest records everything needed to regenerate the artifact byte for
byte: the resolved flag values, sha256 digests of every input file, the seed
and the tool version. Timestamps are informational and the only
non-deterministic field.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

from . import __version__


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(
    artifact_path: str | Path,
    command: str,
    config: dict,
    inputs: dict[str, str | Path],
    seed: int | None,
) -> Path:
    """Write `<artifact>.manifest.json` and return its path."""
    manifest = {
        "tool": "veritopic",
        "tool_version": __version__,
        "command": command,
        "config": {k: (str(v) if isinstance(v, Path) else v) for k, v in config.items()},
        "inputs": {name: file_digest(p) for name, p in sorted(inputs.items())},
        "seed": seed,
        "created_unix": time.time(),
    }
    out = Path(str(artifact_path) + ".manifest.json")
    out.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out
