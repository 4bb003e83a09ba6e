from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Dict, Iterable


def hash_file(path: Path, algo: str = "sha256") -> str:
    h = hashlib.new(algo)
    with path.open("rb") as f:
        for chunk in iter(lambda: f.read(8192), b""):
            h.update(chunk)
    return h.hexdigest()


def artifact_manifest(run_dir: Path, names: Iterable[str], algo: str = "sha256") -> Dict[str, dict]:
    """
    Return {file name: {bytes, hash}} for the artifacts present in ``run_dir``.

    Keys are names relative to the run directory; missing files are skipped.
    """
    manifest: Dict[str, dict] = {}
    for name in sorted(names):
        p = run_dir / name
        if p.is_file():
            manifest[name] = {"bytes": p.stat().st_size, "hash": hash_file(p, algo)}
    return manifest
