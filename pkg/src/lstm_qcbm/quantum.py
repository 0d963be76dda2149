"""Dense statevector simulation for the Rx / Rz / RXX gate set.

Qubit ``q`` is bit ``q`` of the basis index (qubit 0 is the least
significant bit), so basis index ``5`` on three qubits is ``|q2 q1 q0> = |101>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

MAX_QUBITS = 20


@dataclass(frozen=True)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ConfigurationError(
                f"expected {1 << self.n_qubits} amplitudes, got {self.amplitudes.shape}"
            )

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))


@dataclass(frozen=True)
class BornDistribution:
    n_qubits: int
    probs: np.ndarray


def zero_state(n_qubits: int) -> StateVector:
    """Return ``|0...0>`` on ``n_qubits`` qubits."""
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ConfigurationError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits!r}")
    amps = np.zeros(1 << int(n_qubits), dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(int(n_qubits), amps)


def _check_qubit(state: StateVector, qubit) -> int:
    if not 0 <= qubit < state.n_qubits:
        raise IndexError(f"qubit {qubit} out of range for {state.n_qubits} qubits")
    return int(qubit)


def _flip_partner(n_qubits: int, mask: int) -> np.ndarray:
    return np.arange(1 << n_qubits) ^ mask


def apply_rx(state: StateVector, qubit: int, theta: float) -> StateVector:
    """Apply Rx(theta) = [[c, -is], [-is, c]] with c, s = cos, sin(theta/2)."""
    q = _check_qubit(state, qubit)
    c, s = np.cos(theta / 2.0), np.sin(theta / 2.0)
    psi = state.amplitudes
    out = c * psi - 1j * s * psi[_flip_partner(state.n_qubits, 1 << q)]
    return StateVector(state.n_qubits, out)


def apply_rz(state: StateVector, qubit: int, theta: float) -> StateVector:
    """Apply Rz(theta) = diag(exp(-i theta/2), exp(+i theta/2))."""
    q = _check_qubit(state, qubit)
    bit = (np.arange(1 << state.n_qubits) >> q) & 1
    phase = np.where(bit == 1, np.exp(0.5j * theta), np.exp(-0.5j * theta))
    return StateVector(state.n_qubits, state.amplitudes * phase)


def apply_rxx(state: StateVector, qubit_a: int, qubit_b: int, phi: float) -> StateVector:
    """Apply exp(-i phi/2 X(x)X) on the pair ``(qubit_a, qubit_b)``."""
    a = _check_qubit(state, qubit_a)
    b = _check_qubit(state, qubit_b)
    if a == b:
        raise IndexError(f"RXX needs two distinct qubits, got {a} twice")
    c, s = np.cos(phi / 2.0), np.sin(phi / 2.0)
    psi = state.amplitudes
    out = c * psi - 1j * s * psi[_flip_partner(state.n_qubits, (1 << a) | (1 << b))]
    return StateVector(state.n_qubits, out)


def born_distribution(state: StateVector) -> BornDistribution:
    probs = np.abs(state.amplitudes) ** 2
    return BornDistribution(state.n_qubits, probs)


def sample_shots(dist: BornDistribution, shots: int, rng: np.random.Generator) -> dict[int, int]:
    """Draw ``shots`` i.i.d. basis indices by inverse-CDF sampling.

    Returns a ``{basis_index: count}`` mapping sorted by index; only observed
    outcomes appear.
    """
    if shots < 1:
        raise ConfigurationError(f"shots must be >= 1, got {shots}")
    cdf = np.cumsum(dist.probs)
    u = rng.random(shots) * cdf[-1]
    idx = np.searchsorted(cdf, u, side="right")
    np.clip(idx, 0, len(cdf) - 1, out=idx)
    values, counts = np.unique(idx, return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


def bitstring(index: int, n_qubits: int) -> str:
    """Render a basis index as ``q_{n-1} ... q_0``."""
    return format(index, f"0{n_qubits}b")
