"""Layered Rx-Rz-RXX-Rz-Rx Born machine.

Parameter layout, per layer and in circuit order::

    [Rx x n | Rz x n | RXX x (n-1) | Rz x n | Rx x n]

so a layer holds ``5n - 1`` angles and the whole vector ``L * (5n - 1)``.
The RXX block acts on the open chain ``(0,1), (1,2), ..., (n-2, n-1)``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import quantum
from .errors import ConfigurationError
from .quantum import BornDistribution, StateVector

_HEADER = struct.Struct("<qqq")


@dataclass(frozen=True)
class QcbmConfig:
    n_qubits: int = 12
    n_layers: int = 3

    def __post_init__(self):
        if not 2 <= self.n_qubits <= quantum.MAX_QUBITS:
            raise ConfigurationError(
                f"n_qubits must be in [2, {quantum.MAX_QUBITS}], got {self.n_qubits}"
            )
        if self.n_layers < 1:
            raise ConfigurationError(f"n_layers must be >= 1, got {self.n_layers}")


def param_count(config: QcbmConfig) -> int:
    return config.n_layers * (5 * config.n_qubits - 1)


def _check_params(config: QcbmConfig, params) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (param_count(config),):
        raise ConfigurationError(
            f"expected {param_count(config)} parameters for {config}, got shape {params.shape}"
        )
    return params


def run_circuit(config: QcbmConfig, params) -> StateVector:
    params = _check_params(config, params)
    n = config.n_qubits
    angles = iter(params)
    state = quantum.zero_state(n)
    for _ in range(config.n_layers):
        for q in range(n):
            state = quantum.apply_rx(state, q, next(angles))
        for q in range(n):
            state = quantum.apply_rz(state, q, next(angles))
        for q in range(n - 1):
            state = quantum.apply_rxx(state, q, q + 1, next(angles))
        for q in range(n):
            state = quantum.apply_rz(state, q, next(angles))
        for q in range(n):
            state = quantum.apply_rx(state, q, next(angles))
    assert next(angles, None) is None, "parameter vector not fully consumed"
    return state


def qcbm_distribution(config: QcbmConfig, params) -> BornDistribution:
    return quantum.born_distribution(run_circuit(config, params))


def qcbm_sample(config: QcbmConfig, params, shots: int, rng: np.random.Generator) -> dict[int, int]:
    return quantum.sample_shots(qcbm_distribution(config, params), shots, rng)


def bit_matrix(n_qubits: int) -> np.ndarray:
    """``(2**n, n)`` array whose row ``x`` holds the bits of ``x`` (LSB first)."""
    idx = np.arange(1 << n_qubits)
    return ((idx[:, None] >> np.arange(n_qubits)) & 1).astype(np.float64)


def bits_of(index: int, n_qubits: int) -> np.ndarray:
    return ((index >> np.arange(n_qubits)) & 1).astype(np.float64)


def expected_bits(config: QcbmConfig, params) -> np.ndarray:
    """Marginal probability of reading 1 on each qubit."""
    probs = qcbm_distribution(config, params).probs
    return probs @ bit_matrix(config.n_qubits)


def topk_coverage(dist: BornDistribution, k: int = 20) -> float:
    """Total probability held by the ``k`` most likely outcomes."""
    probs = np.sort(dist.probs)[::-1]
    return float(np.sum(probs[:k]))


def init_params(config: QcbmConfig, rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
    """Small random angles around a uniform-superposition starting point.

    Every angle is drawn from U[-scale, scale]; the leading Rx block of the
    first layer is additionally offset by pi/2, which takes ``|0...0>`` to an
    equal-weight superposition. The initial Born distribution is therefore
    close to uniform with a narrow spread of probabilities.
    """
    params = rng.uniform(-scale, scale, size=param_count(config))
    params[: config.n_qubits] += np.pi / 2
    return params


def save_params(path, config: QcbmConfig, params) -> None:
    """Write ``path`` (binary) plus ``path.txt`` (decimal sidecar).

    Binary layout: little-endian int64 header ``(n_qubits, n_layers,
    param_count)`` followed by ``param_count`` little-endian float64 values.
    """
    params = _check_params(config, params)
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(config.n_qubits, config.n_layers, len(params)))
        fh.write(params.astype("<f8").tobytes())
    lines = [
        f"n_qubits {config.n_qubits}",
        f"n_layers {config.n_layers}",
        f"param_count {len(params)}",
    ]
    lines += [repr(float(v)) for v in params]
    Path(str(path) + ".txt").write_text("\n".join(lines) + "\n")


def load_params(path) -> tuple[QcbmConfig, np.ndarray]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ConfigurationError(f"{path}: truncated QCBM checkpoint")
    n_qubits, n_layers, count = _HEADER.unpack_from(raw)
    config = QcbmConfig(int(n_qubits), int(n_layers))
    if count != param_count(config) or len(raw) != _HEADER.size + 8 * count:
        raise ConfigurationError(f"{path}: header does not match payload")
    params = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    return config, params
