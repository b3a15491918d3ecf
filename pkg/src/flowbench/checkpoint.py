"""Parameter checkpoints: flat float64 vector + layout map + JSON header.

One .npz file holds the parameter vector under "values" and a JSON header
under "header" carrying a format version, the name -> (start, stop, shape)
layout, and caller metadata (enough to rebuild the owning model). Loading
validates the version and layout shape before any value is used.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ContractError

FORMAT_VERSION = 1

Array = np.ndarray


def save_checkpoint(path, values: Array, layout: list[dict], meta: dict) -> Path:
    """Write a checkpoint; returns the actual path (suffix forced to .npz)."""
    path = Path(path).with_suffix(".npz")
    header = {"format_version": FORMAT_VERSION, "layout": layout, "meta": meta}
    values = np.asarray(values, dtype=np.float64)
    total = sum(int(np.prod(s["shape"])) if s["shape"] else 1 for s in layout)
    if values.ndim != 1 or total != values.size:
        raise ContractError(
            f"layout covers {total} entries, values vector has {values.size}"
        )
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, values=values, header=np.array(json.dumps(header)))
    return path


def load_checkpoint(path) -> tuple[Array, list[dict], dict]:
    """Read (values, layout, meta); rejects unknown format versions."""
    with np.load(Path(path), allow_pickle=False) as bundle:
        values = np.asarray(bundle["values"], dtype=np.float64)
        header = json.loads(str(bundle["header"]))
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise ContractError(
            f"checkpoint format version {version!r} unsupported (expected {FORMAT_VERSION})"
        )
    return values, header["layout"], header.get("meta", {})
