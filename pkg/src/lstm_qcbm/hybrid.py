"""LSTM forecaster with an additive Born-machine prior, and its two-phase trainer.

Prediction for a window ``X`` and prior bit vector ``z``::

    h      = LSTM(X)
    e      = W_proj z + b_proj
    h_fuse = h + alpha * e
    y_hat  = shift + scale * (W_out h_fuse + b_out)

``shift`` and ``scale`` are fixed (not trained) and default to 0 and 1; the
trainer sets them to the mean and standard deviation of the training
targets so the output layer works in unit scale while predictions stay in
raw volatility units.

Training alternates, once per epoch, between an Adam pass over the
classical weights with the circuit frozen and a derivative-free fit of the
circuit angles to a score-weighted target with the classical weights frozen.
"""

from __future__ import annotations

import copy
import logging
from dataclasses import dataclass, field

import numpy as np

from . import gfopt, nn, qcbm
from .errors import ConfigurationError, NumericalError
from .metrics import MetricsRecord, evaluate_predictions
from .qcbm import QcbmConfig

log = logging.getLogger(__name__)

KL_FLOOR = 1e-12
TOPK = 20


@dataclass
class HybridModel:
    lstm: nn.LstmParams
    proj: nn.LinearLayer  # n_qubits -> hidden_dim
    out: nn.LinearLayer  # hidden_dim -> 1
    alpha: float = 0.5
    target_shift: float = 0.0
    target_scale: float = 1.0

    def __post_init__(self):
        hid = self.lstm.hidden_dim
        if self.proj.out_dim != hid or self.out.in_dim != hid or self.out.out_dim != 1:
            raise ConfigurationError("projection/output layers do not match the LSTM hidden size")

    @property
    def n_qubits(self) -> int:
        return self.proj.in_dim

    def named_arrays(self) -> dict[str, np.ndarray]:
        return {
            **self.lstm.named_arrays("lstm"),
            **self.proj.named_arrays("proj"),
            **self.out.named_arrays("out"),
        }


def init_model(
    rng: np.random.Generator,
    input_dim: int,
    n_qubits: int,
    hidden_dim: int = 32,
    num_layers: int = 2,
    alpha: float = 0.5,
    train_targets=None,
) -> HybridModel:
    """Fresh model; ``train_targets`` (if given) fixes the output de-normalization."""
    lstm = nn.init_lstm(rng, input_dim, hidden_dim, num_layers)
    proj = nn.init_linear(rng, n_qubits, hidden_dim)
    out = nn.init_linear(rng, hidden_dim, 1)
    model = HybridModel(lstm, proj, out, alpha)
    if train_targets is not None and len(train_targets):
        y = np.asarray(train_targets, dtype=np.float64)
        model.target_shift = float(y.mean())
        model.target_scale = float(max(y.std(), 1e-12))
    return model


@dataclass(frozen=True)
class ScoredPrior:
    bitstring: int
    score: float


@dataclass
class TargetDistribution:
    support: list[int]
    probs: np.ndarray


# ---------------------------------------------------------------- forward / backward


def embed_prior(model: HybridModel, bits) -> np.ndarray:
    return nn.linear_forward(model.proj, bits)


def _prior_batch(model: HybridModel, prior_bits, batch: int) -> np.ndarray:
    bits = np.asarray(prior_bits, dtype=np.float64)
    if bits.ndim == 1:
        bits = np.broadcast_to(bits, (batch, bits.size))
    if bits.shape != (batch, model.n_qubits):
        raise ConfigurationError(f"prior bits shape {bits.shape} incompatible with batch {batch}")
    return bits


def predict_batch(model: HybridModel, x: np.ndarray, prior_bits) -> np.ndarray:
    """Predictions for ``x`` of shape ``(B, T, F)``.

    ``prior_bits`` is one length-``n_qubits`` vector shared by the batch or a
    ``(B, n_qubits)`` array.
    """
    h_last, _ = nn.lstm_forward_batch(model.lstm, x)
    return _head(model, h_last, _prior_batch(model, prior_bits, len(h_last)))


def _head(model: HybridModel, h_last: np.ndarray, bits: np.ndarray) -> np.ndarray:
    fused = h_last + model.alpha * embed_prior(model, bits)
    return model.target_shift + model.target_scale * nn.linear_forward(model.out, fused)[:, 0]


def predict(model: HybridModel, window, prior_bits) -> float:
    """Scalar prediction for a single ``(T, F)`` window (or ``FeatureWindow``)."""
    features = getattr(window, "features", window)
    return float(predict_batch(model, np.asarray(features)[None], prior_bits)[0])


def loss_and_grads(
    model: HybridModel, x: np.ndarray, y: np.ndarray, prior_bits
) -> tuple[float, dict[str, np.ndarray]]:
    """Batch loss and its exact gradient for every classical parameter.

    The loss is the MSE measured in units of ``model.target_scale``, i.e.
    ``mean((y_hat - y)**2) / target_scale**2``; with the default scale of 1
    it is the plain MSE.
    """
    h_last, cache = nn.lstm_forward_batch(model.lstm, x)
    bits = _prior_batch(model, prior_bits, len(h_last))
    emb = embed_prior(model, bits)
    fused = h_last + model.alpha * emb
    raw = nn.linear_forward(model.out, fused)[:, 0]
    pred = model.target_shift + model.target_scale * raw
    scale = model.target_scale
    loss = nn.mse_loss(pred, y) / scale**2

    dpred = nn.mse_grad(raw, (np.asarray(y, dtype=np.float64) - model.target_shift) / scale)[:, None]
    grads, dfused = nn.linear_backward(model.out, fused, dpred, "out")
    proj_grads, _ = nn.linear_backward(model.proj, bits, model.alpha * dfused, "proj")
    grads.update(proj_grads)
    grads.update(nn.lstm_backward(model.lstm, cache, dfused, "lstm"))
    return loss, grads


# ---------------------------------------------------------------- classical phase


@dataclass
class ClassicalTrainer:
    """Adam state plus batching options for the classical phase."""

    model: HybridModel
    lr: float = 1e-3
    batch_size: int = 64
    prior_mode: str = "per-batch"
    max_norm: float | None = None
    adam: nn.AdamState = field(init=False)

    def __post_init__(self):
        if self.prior_mode not in ("per-batch", "per-sample"):
            raise ConfigurationError(f"prior_mode must be per-batch or per-sample, got {self.prior_mode!r}")
        self.adam = nn.adam_init(self.model.named_arrays(), lr=self.lr)


def train_classical_epoch(
    trainer: ClassicalTrainer,
    config: QcbmConfig | None,
    qcbm_params,
    x: np.ndarray,
    y: np.ndarray,
    order_rng: np.random.Generator,
    prior_rng: np.random.Generator,
) -> float:
    """One shuffled pass of mini-batch Adam; returns the mean batch MSE.

    Each batch draws its prior from the exact Born distribution of the frozen
    circuit. With ``config=None`` the prior is the all-zero bit vector
    (the classical baseline).
    """
    model = trainer.model
    n = len(y)
    if n < 1:
        raise ConfigurationError("empty training set")
    if config is not None:
        dist = qcbm.qcbm_distribution(config, qcbm_params)
        bit_rows = qcbm.bit_matrix(config.n_qubits)
    order = order_rng.permutation(n)
    params = model.named_arrays()
    losses = []
    for start in range(0, n, trainer.batch_size):
        idx = order[start : start + trainer.batch_size]
        if config is None:
            bits = np.zeros(model.n_qubits)
        else:
            draws = 1 if trainer.prior_mode == "per-batch" else len(idx)
            u = prior_rng.random(draws)
            picks = _inverse_cdf(dist.probs, u)
            bits = bit_rows[picks[0]] if draws == 1 else bit_rows[picks]
        loss, grads = loss_and_grads(model, x[idx], y[idx], bits)
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite training loss {loss}")
        nn.adam_step(params, grads, trainer.adam, max_norm=trainer.max_norm)
        losses.append(loss)
    return float(np.mean(losses)) * model.target_scale**2


def _inverse_cdf(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs)
    return np.clip(np.searchsorted(cdf, u * cdf[-1], side="right"), 0, len(cdf) - 1)


# ---------------------------------------------------------------- quantum phase


def score_priors(model: HybridModel, x: np.ndarray, y: np.ndarray, bitstrings) -> list[ScoredPrior]:
    """Score each bitstring by the negative MSE of the frozen model over ``(x, y)``."""
    bitstrings = list(bitstrings)
    if not bitstrings or len(y) < 1:
        raise ConfigurationError("score_priors needs bitstrings and a non-empty scoring set")
    # The LSTM does not see the prior, so its output is shared by every candidate.
    h_last, _ = nn.lstm_forward_batch(model.lstm, x)
    scored = []
    for z in bitstrings:
        bits = np.broadcast_to(qcbm.bits_of(z, model.n_qubits), (len(h_last), model.n_qubits))
        pred = _head(model, h_last, bits)
        scored.append(ScoredPrior(int(z), -nn.mse_loss(pred, y)))
    return scored


def target_distribution(scored: list[ScoredPrior], tau: float = 1.0) -> TargetDistribution:
    """Softmax over z-scored scores at temperature ``tau``.

    Raw scores are negative MSEs of order 1e-6, whose plain softmax is
    numerically uniform; standardizing first keeps the ranking and gives the
    target usable contrast.
    """
    if not scored:
        raise ConfigurationError("no scored priors")
    if tau <= 0:
        raise ConfigurationError(f"temperature must be positive, got {tau}")
    support = [s.bitstring for s in scored]
    if len(set(support)) != len(support):
        raise ConfigurationError("duplicate bitstrings in scored priors")
    s = np.array([p.score for p in scored], dtype=np.float64)
    s = (s - s.mean()) / max(float(s.std()), 1e-12)
    logits = s / tau
    w = np.exp(logits - logits.max())
    return TargetDistribution(support, w / w.sum())


def kl_from_probs(target: TargetDistribution, probs: np.ndarray) -> float:
    p_model = np.maximum(probs[np.asarray(target.support)], KL_FLOOR)
    pt = target.probs
    mask = pt > 0
    return float(np.sum(pt[mask] * np.log(pt[mask] / p_model[mask])))


def kl_objective(config: QcbmConfig, params, target: TargetDistribution) -> float:
    """KL(target || Born distribution), restricted to the target's support."""
    return kl_from_probs(target, qcbm.qcbm_distribution(config, params).probs)


def optimize_qcbm(
    config: QcbmConfig,
    params,
    target: TargetDistribution,
    budget: int = 50,
    rng: np.random.Generator | None = None,
    rho_begin: float = 0.5,
    rho_end: float = 1e-4,
) -> tuple[np.ndarray, gfopt.GfResult]:
    """COBYLA fit of the circuit angles to ``target`` within ``budget`` evaluations.

    When ``rng`` is given the coordinates are visited in a random order. With
    a budget below ``param_count + 1`` COBYLA only gets through part of its
    initial simplex, so a fixed order would keep probing the same angles
    epoch after epoch.
    """
    params = np.asarray(params, dtype=np.float64)
    perm = np.arange(params.size) if rng is None else rng.permutation(params.size)

    def objective(y):
        p = np.empty_like(y)
        p[perm] = y
        return kl_objective(config, p, target)

    result = gfopt.minimize(
        objective, params[perm], gfopt.GfOptions(max_evals=budget, rho_begin=rho_begin, rho_end=rho_end)
    )
    best = np.empty_like(params)
    best[perm] = result.best_x
    return best, result


# ---------------------------------------------------------------- alternating loop


@dataclass
class EpochRecord:
    epoch: int
    train_mse: float
    val_rmse: float
    kl_before: float = float("nan")
    kl_after: float = float("nan")
    topk_coverage: float = float("nan")
    n_unique: int = 0


@dataclass
class TrainResult:
    model: HybridModel
    qcbm_params: np.ndarray | None
    history: list[EpochRecord]
    coverage: list[float]  # index = epoch, 0 is before training
    snapshots: dict[int, np.ndarray]  # epoch -> Born probabilities
    best_epoch: int
    best_model: HybridModel
    best_qcbm_params: np.ndarray | None


def eval_prior(model: HybridModel, config: QcbmConfig | None, qcbm_params) -> np.ndarray:
    """Deterministic prior used at evaluation time: the per-qubit marginals."""
    if config is None:
        return np.zeros(model.n_qubits)
    return qcbm.expected_bits(config, qcbm_params)


@dataclass
class RngStreams:
    """Independent generators so the classical path never sees quantum draws."""

    order: np.random.Generator
    prior: np.random.Generator
    shots: np.random.Generator
    optimizer: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "RngStreams":
        return cls(
            order=np.random.default_rng([seed, 1]),
            prior=np.random.default_rng([seed, 2]),
            shots=np.random.default_rng([seed, 3]),
            optimizer=np.random.default_rng([seed, 4]),
        )


def alternating_train(
    model: HybridModel,
    config: QcbmConfig | None,
    qcbm_params,
    train: tuple[np.ndarray, np.ndarray],
    val: tuple[np.ndarray, np.ndarray],
    epochs: int = 300,
    qcbm_shots: int = 256,
    tau: float = 1.0,
    seed: int = 0,
    lr: float = 1e-3,
    batch_size: int = 64,
    cobyla_evals: int = 50,
    prior_mode: str = "per-batch",
    max_norm: float | None = None,
    topk: int = TOPK,
) -> TrainResult:
    """Train in place for ``epochs`` epochs.

    ``config=None`` runs the classical baseline: zero prior, no circuit
    phase. Validation RMSE is computed with :func:`eval_prior`.
    """
    streams = RngStreams.from_seed(seed)
    trainer = ClassicalTrainer(model, lr=lr, batch_size=batch_size, prior_mode=prior_mode, max_norm=max_norm)
    x_train, y_train = train
    x_val, y_val = val
    quantum = config is not None
    params = None if not quantum else np.array(qcbm_params, dtype=np.float64)

    history: list[EpochRecord] = []
    coverage: list[float] = []
    snapshots: dict[int, np.ndarray] = {}
    if quantum:
        dist = qcbm.qcbm_distribution(config, params)
        coverage.append(qcbm.topk_coverage(dist, topk))
        snapshots[0] = dist.probs.copy()

    best_epoch, best_rmse = 0, np.inf
    best_model, best_params = copy.deepcopy(model), None if params is None else params.copy()

    for epoch in range(1, epochs + 1):
        train_mse = train_classical_epoch(trainer, config, params, x_train, y_train, streams.order, streams.prior)
        record = EpochRecord(epoch, train_mse, float("nan"))
        if quantum:
            sample = qcbm.qcbm_sample(config, params, qcbm_shots, streams.shots)
            scored = score_priors(model, x_val, y_val, sample.keys())
            target = target_distribution(scored, tau)
            record.kl_before = kl_objective(config, params, target)
            params, result = optimize_qcbm(config, params, target, cobyla_evals, streams.optimizer)
            record.kl_after = result.best_f
            record.n_unique = len(sample)
            dist = qcbm.qcbm_distribution(config, params)
            record.topk_coverage = qcbm.topk_coverage(dist, topk)
            coverage.append(record.topk_coverage)
        pred = predict_batch(model, x_val, eval_prior(model, config, params))
        record.val_rmse = float(np.sqrt(nn.mse_loss(pred, y_val)))
        if not np.isfinite(record.val_rmse):
            raise NumericalError(f"non-finite validation RMSE at epoch {epoch}")
        history.append(record)
        log.info(
            "epoch %d train_mse=%.4g val_rmse=%.4g kl %.4g -> %.4g",
            epoch, record.train_mse, record.val_rmse, record.kl_before, record.kl_after,
        )
        if record.val_rmse < best_rmse:
            best_epoch, best_rmse = epoch, record.val_rmse
            best_model = copy.deepcopy(model)
            best_params = None if params is None else params.copy()

    if quantum and epochs > 0:
        snapshots[epochs] = qcbm.qcbm_distribution(config, params).probs.copy()
    return TrainResult(model, params, history, coverage, snapshots, best_epoch, best_model, best_params)


def evaluate(model: HybridModel, config: QcbmConfig | None, qcbm_params, x: np.ndarray, y: np.ndarray) -> MetricsRecord:
    """Test-set metrics with the deterministic marginal prior."""
    pred = predict_batch(model, x, eval_prior(model, config, qcbm_params))
    return evaluate_predictions(pred, y)
