"""Fitted-model bundle: one JSON file holding everything needed to simulate.

Layout (``format_version`` 1)::

    {
      "format": "wismc-model",
      "format_version": 1,
      "state_space": {"edges": ["-inf", -4.0, ..., "inf"], "labels": [...], "representatives": [...]},
      "index_binning": {"cut_points": [...], "labels": [...]},
      "index": {"functional": "ewma_of_squares", "lambda": 0.97, "initial_index": 0.0},
      "max_sojourn": 20,
      "counts": [[i, x, j, t, count], ...],
      "fit_info": {...},
      "metadata": {...}
    }

Infinite edges are written as the strings ``"-inf"``/``"inf"``.  Counts are
sparse, one row per non-zero cell, sorted by ``(i, x, j, t)``; ``t`` is the
sojourn in bars (1-based).
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .discretization import IndexBinning, StateSpace
from .errors import FormatError
from .index import IndexParams
from .kernel import KernelEstimate

FORMAT = "wismc-model"
FORMAT_VERSION = 1


def _edge_out(value: float):
    if np.isinf(value):
        return "inf" if value > 0 else "-inf"
    return value


def _edge_in(value) -> float:
    return float(value)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def model_to_dict(model: KernelEstimate, metadata: dict | None = None) -> dict:
    space = model.state_space
    cells = np.argwhere(model.counts > 0)
    counts = [[int(i), int(x), int(j), int(t) + 1, int(model.counts[i, x, j, t])] for i, x, j, t in cells]
    return {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "state_space": {
            "edges": [_edge_out(e) for e in space.edges],
            "labels": list(space.labels),
            "representatives": list(space.representatives) if space.representatives is not None else None,
        },
        "index_binning": {
            "cut_points": list(model.index_binning.cut_points),
            "labels": list(model.index_binning.labels),
        },
        "index": {
            "functional": model.params.functional,
            "lambda": model.params.lam,
            "initial_index": model.params.initial_index,
        },
        "max_sojourn": model.max_sojourn,
        "counts": counts,
        "fit_info": model.fit_info,
        "metadata": metadata or {},
    }


def model_from_dict(data: dict) -> KernelEstimate:
    if data.get("format") != FORMAT:
        raise FormatError(f"not a model bundle (format={data.get('format')!r})")
    if data.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"unsupported model bundle version {data.get('format_version')!r}")
    ss = data["state_space"]
    space = StateSpace(tuple(_edge_in(e) for e in ss["edges"]), tuple(ss["labels"]),
                       tuple(ss["representatives"]) if ss.get("representatives") is not None else None)
    ib = data["index_binning"]
    binning = IndexBinning(tuple(ib["cut_points"]), tuple(ib["labels"]))
    ix = data["index"]
    params = IndexParams(float(ix["lambda"]), float(ix["initial_index"]), ix["functional"])
    counts = np.zeros((space.size, binning.size, space.size, int(data["max_sojourn"])), dtype=np.int64)
    for i, x, j, t, c in data["counts"]:
        counts[i, x, j, t - 1] = c
    return KernelEstimate(space, binning, params, counts, dict(data.get("fit_info", {})))


def save_model(model: KernelEstimate, path: str | Path, metadata: dict | None = None) -> None:
    text = json.dumps(model_to_dict(model, metadata), indent=1, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_model(path: str | Path) -> KernelEstimate:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    return model_from_dict(data)


def load_metadata(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8")).get("metadata", {})
