"""Hybrid LSTM + quantum circuit Born machine volatility forecaster.

Everything runs on numpy: a statevector simulator, the circuit Born
machine, a derivative-free trust-region optimizer, an LSTM with manual
backpropagation, and the alternating training loop that couples them.
"""

__version__ = "0.1.0"
