"""Adam gradient ascent with validation-based early stopping."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .bridge import Dims, JointParams, fa_params, joint_objective, pack, unpack
from .errors import ConfigurationError, NumericalError
from .fa import Dataset, FaParams, fa_marginal_nll, fa_marginal_nll_grad
from .kg import KnowledgeGraph, corrupt_triples

VAR_FLOOR = 1e-6


@dataclass
class TrainConfig:
    d_x: int = 5
    d_e: int = 5
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    patience: int = 50
    max_epochs: int = 5000
    init_scale: float = 0.1
    negatives_per_positive: int = 2
    resample_negatives: bool = False

    def __post_init__(self):
        if self.patience < 1 or self.max_epochs < 1:
            raise ConfigurationError("patience and max_epochs must be >= 1")
        if self.init_scale <= 0:
            raise ConfigurationError("init_scale must be positive")
        if self.negatives_per_positive < 1:
            raise ConfigurationError("negatives_per_positive must be >= 1")


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0
    learning_rate: float = 1e-2
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    @classmethod
    def zeros(cls, size: int, **hyper) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0, **hyper)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
    """One bias-corrected Adam step *uphill* on the objective.

    ``state`` is updated in place; the new parameter vector is returned.
    """
    if params.shape != grad.shape or params.shape != state.first_moment.shape:
        raise ValueError("parameter, gradient and moment shapes differ")
    if not np.all(np.isfinite(grad)):
        bad = np.flatnonzero(~np.isfinite(grad))
        raise NumericalError(f"non-finite gradient at {len(bad)} coordinates (first: {bad[:5].tolist()})")
    state.step_count += 1
    b1, b2 = state.beta1, state.beta2
    state.first_moment = b1 * state.first_moment + (1.0 - b1) * grad
    state.second_moment = b2 * state.second_moment + (1.0 - b2) * (grad * grad)
    m_hat = state.first_moment / (1.0 - b1 ** state.step_count)
    v_hat = state.second_moment / (1.0 - b2 ** state.step_count)
    return params + state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


class EpochRecord(NamedTuple):
    epoch: int
    train_objective: float
    val_fa_nll: float


class EarlyStopping:
    """Track the best validation loss; signal a stop after ``patience`` non-improving epochs."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best_value = math.inf
        self.best_epoch = 0
        self.best_state = None
        self.epochs_since_best = 0

    def update(self, epoch: int, value: float, state) -> bool:
        if value < self.best_value:
            self.best_value = value
            self.best_epoch = epoch
            self.best_state = state
            self.epochs_since_best = 0
        else:
            self.epochs_since_best += 1
        return self.epochs_since_best >= self.patience


class TrainingAborted(NumericalError):
    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass
class TrainResult:
    params: object  # JointParams or FaParams, best-validation snapshot
    best_epoch: int
    best_val_nll: float
    epochs_run: int
    history: list = field(default_factory=list)


def run_adam(objective: Callable, x0: np.ndarray, validate: Callable, config: TrainConfig):
    """Generic ascent loop.

    ``objective(x, epoch) -> (value, grad)``; ``validate(x) -> loss`` (lower is
    better). Returns ``(best_x, best_epoch, best_loss, epochs_run, history)``.
    """
    state = AdamState.zeros(x0.size, learning_rate=config.learning_rate, beta1=config.beta1,
                            beta2=config.beta2, epsilon=config.epsilon)
    stopper = EarlyStopping(config.patience)
    history = []
    x = x0.copy()
    for epoch in range(1, config.max_epochs + 1):
        try:
            value, grad = objective(x, epoch)
            x = adam_step(state, x, grad)
            val = float(validate(x))
        except NumericalError as exc:
            raise TrainingAborted(f"epoch {epoch}: {exc}", history) from exc
        if not math.isfinite(val):
            raise TrainingAborted(f"epoch {epoch}: non-finite validation loss", history)
        history.append(EpochRecord(epoch, float(value), val))
        if stopper.update(epoch, val, x):
            break
    return stopper.best_state, stopper.best_epoch, stopper.best_value, epoch, history


def _moments(train: Dataset):
    if train.n < 1:
        raise ConfigurationError("empty training data")
    mu = train.values.mean(axis=0)
    log_var = np.log(np.maximum(train.values.var(axis=0), VAR_FLOOR))
    return mu, log_var


def init_params(dims: Dims, init_scale: float, rng, train: Dataset) -> JointParams:
    """Random normal(0, init_scale^2) for loadings, embeddings, relations and A;
    b = 0; mu and log-variance from the training columns.

    Free loadings are drawn first so that a model without tied rows consumes
    the random stream exactly like :func:`init_fa_params`.
    """
    if init_scale <= 0:
        raise ConfigurationError("init_scale must be positive")
    if train.m != dims.m:
        raise ConfigurationError(f"training data has {train.m} columns, expected {dims.m}")
    mu, log_var = _moments(train)
    free = rng.normal(0.0, init_scale, size=(dims.m - dims.n_tied, dims.d_x))
    emb = rng.normal(0.0, init_scale, size=(dims.n_entities, dims.d_e))
    rel = rng.normal(0.0, init_scale, size=(dims.n_relations, dims.d_e))
    A = rng.normal(0.0, init_scale, size=(dims.d_x, dims.d_e))
    return JointParams(emb, rel, A, np.zeros(dims.d_x), mu, log_var, free)


def init_fa_params(m: int, d_x: int, init_scale: float, rng, train: Dataset) -> FaParams:
    mu, log_var = _moments(train)
    W = rng.normal(0.0, init_scale, size=(m, d_x))
    return FaParams(mu, log_var, W)


def train(config: TrainConfig, train: Dataset, val: Dataset, kg: KnowledgeGraph,
          positives, negatives, rng) -> TrainResult:
    """Maximise the joint objective with Adam, early-stopping on validation FA NLL."""
    dims = Dims.for_problem(kg, train.m, config.d_x, config.d_e)
    x0 = pack(init_params(dims, config.init_scale, rng, train))
    positives = np.asarray(positives, dtype=np.int64).reshape(-1, 3)
    current_neg = [np.asarray(negatives, dtype=np.int64).reshape(-1, 3)]

    def objective(x, epoch):
        if config.resample_negatives and epoch > 1 and len(positives):
            current_neg[0] = corrupt_triples(kg, positives, config.negatives_per_positive, rng)
        joint = unpack(x, dims)
        value, grad = joint_objective(joint, train, positives, current_neg[0], kg)
        return value, pack(grad)

    def validate(x):
        return fa_marginal_nll(val, fa_params(unpack(x, dims), kg))

    best_x, best_epoch, best_val, epochs, history = run_adam(objective, x0, validate, config)
    return TrainResult(unpack(best_x, dims), best_epoch, best_val, epochs, history)


def fit_fa(config: TrainConfig, train: Dataset, val: Dataset, rng) -> TrainResult:
    """Plain maximum-likelihood FA with the same optimiser and stopping rule."""
    m, d_x = train.m, config.d_x
    p0 = init_fa_params(m, d_x, config.init_scale, rng, train)
    x0 = np.concatenate([p0.mu, p0.log_var, p0.loadings.ravel()])

    def unflat(x):
        return FaParams(x[:m].copy(), x[m:2 * m].copy(), x[2 * m:].reshape(m, d_x).copy())

    def objective(x, epoch):
        p = unflat(x)
        nll = fa_marginal_nll(train, p)
        g_mu, g_W, g_lv = fa_marginal_nll_grad(train, p)
        return -nll + 0.0, -np.concatenate([g_mu, g_lv, g_W.ravel()])

    def validate(x):
        return fa_marginal_nll(val, unflat(x))

    best_x, best_epoch, best_val, epochs, history = run_adam(objective, x0, validate, config)
    return TrainResult(unflat(best_x), best_epoch, best_val, epochs, history)


def write_history(history, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "train_objective", "val_fa_nll"])
        for rec in history:
            w.writerow([rec.epoch, repr(rec.train_objective), repr(rec.val_fa_nll)])
