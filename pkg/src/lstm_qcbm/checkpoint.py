"""Model checkpoints: raw little-endian float64 payload plus a JSON shape manifest."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import nn
from .errors import ConfigurationError
from .hybrid import HybridModel


def save_model(model: HybridModel, path) -> None:
    """Write ``<path>.bin`` and ``<path>.json``."""
    path = Path(path)
    entries = []
    offset = 0
    chunks = []
    for name, arr in model.named_arrays().items():
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
        offset += arr.size
    manifest = {
        "format": "float64-le",
        "input_dim": model.lstm.input_dim,
        "hidden_dim": model.lstm.hidden_dim,
        "num_layers": model.lstm.num_layers,
        "n_qubits": model.n_qubits,
        "alpha": model.alpha,
        "target_shift": model.target_shift,
        "target_scale": model.target_scale,
        "arrays": entries,
        "total_values": offset,
    }
    path.with_suffix(".bin").write_bytes(b"".join(chunks))
    path.with_suffix(".json").write_text(json.dumps(manifest, indent=2) + "\n")


def load_model(path) -> HybridModel:
    path = Path(path)
    bin_path, json_path = path.with_suffix(".bin"), path.with_suffix(".json")
    for p in (bin_path, json_path):
        if not p.exists():
            raise FileNotFoundError(f"checkpoint file not found: {p}")
    manifest = json.loads(json_path.read_text())
    values = np.frombuffer(bin_path.read_bytes(), dtype="<f8").astype(np.float64)
    if values.size != manifest["total_values"]:
        raise ConfigurationError(f"{bin_path}: expected {manifest['total_values']} values, found {values.size}")
    arrays = {}
    for e in manifest["arrays"]:
        size = int(np.prod(e["shape"]))
        arrays[e["name"]] = values[e["offset"] : e["offset"] + size].reshape(e["shape"]).copy()
    layers = [
        nn.LstmLayer(arrays[f"lstm.{l}.w_x"], arrays[f"lstm.{l}.w_h"], arrays[f"lstm.{l}.b"])
        for l in range(manifest["num_layers"])
    ]
    return HybridModel(
        nn.LstmParams(layers),
        nn.LinearLayer(arrays["proj.weights"], arrays["proj.bias"]),
        nn.LinearLayer(arrays["out.weights"], arrays["out.bias"]),
        alpha=manifest["alpha"],
        target_shift=manifest["target_shift"],
        target_scale=manifest["target_scale"],
    )
