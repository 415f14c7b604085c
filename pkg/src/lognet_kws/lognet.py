"""LogNet reservoir classifier.

A feature vector ``F`` (length N) is augmented with a bias, ``Y = (1, F)``,
scaled component-wise by its training maxima and projected by a fixed
pseudo-random matrix ``W`` (P x (N+1)) filled row-wise from a linear
congruential generator. The projection is normalized per row with its
training (mean, max, min), squashed by tanh and prefixed by a bias to give
``Sh`` (P+1). Only the readout trains: a ReLU hidden layer of M neurons and a
softmax output layer over 4 commands.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .aggregate import canonical_method

DEFAULT_LABELS = ("go", "left", "right", "stop")
N_CLASSES = 4


@dataclass(frozen=True)
class LogNetArch:
    n_input: int
    p_reservoir: int
    m_hidden: int
    n_classes: int = N_CLASSES

    def __post_init__(self):
        for name in ("n_input", "p_reservoir", "m_hidden"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_classes != N_CLASSES:
            raise ValueError(f"this classifier has exactly {N_CLASSES} outputs")

    @classmethod
    def parse(cls, text: str) -> "LogNetArch":
        """Parse ``"N:P:M:4"``."""
        parts = text.strip().split(":")
        if len(parts) != 4:
            raise ValueError(f"architecture must look like N:P:M:4, got {text!r}")
        try:
            n, p, m, c = (int(x) for x in parts)
        except ValueError:
            raise ValueError(f"architecture fields must be integers, got {text!r}") from None
        return cls(n, p, m, c)

    def __str__(self):
        return f"{self.n_input}:{self.p_reservoir}:{self.m_hidden}:{self.n_classes}"


@dataclass(frozen=True)
class LcgParams:
    multiplier: int = 8121
    increment: int = 28411
    modulus: int = 134456
    seed: int = 1

    def __post_init__(self):
        if self.modulus <= 0:
            raise ValueError("LCG modulus must be positive")
        if not (0 <= self.multiplier < 2**32 and 0 <= self.increment < 2**32
                and 0 <= self.seed < 2**32 and self.modulus < 2**32):
            raise ValueError("LCG constants must fit in 32 unsigned bits")


@lru_cache(maxsize=32)
def _lcg_cached(params: LcgParams, n: int) -> np.ndarray:
    a, c, m = params.multiplier, params.increment, params.modulus
    x = params.seed % m
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        x = (a * x + c) % m
        out[i] = x
    out.flags.writeable = False
    return out


def lcg_sequence(params: LcgParams, n: int) -> np.ndarray:
    """First ``n`` states after the seed: ``x_{k+1} = (a x_k + c) mod m``."""
    return _lcg_cached(params, int(n))


@dataclass(frozen=True)
class ReservoirSpec:
    generator: LcgParams
    W: np.ndarray = field(repr=False)


def generate_reservoir(arch: LogNetArch, params: LcgParams = LcgParams()) -> ReservoirSpec:
    """Fill ``W`` (P x (N+1)) row-wise with ``x / m - 0.5`` from the LCG stream."""
    p, cols = arch.p_reservoir, arch.n_input + 1
    raw = lcg_sequence(params, p * cols)
    W = raw.astype(np.float64) / params.modulus - 0.5
    W = W.reshape(p, cols)
    W.flags.writeable = False
    return ReservoirSpec(params, W)


@dataclass(frozen=True)
class NormStats:
    input_max: np.ndarray = field(repr=False)  # (N+1,)
    res_max: np.ndarray = field(repr=False)  # (P,)
    res_min: np.ndarray = field(repr=False)
    res_mean: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class ReadoutWeights:
    hidden: np.ndarray = field(repr=False)  # (M, P+1)
    output: np.ndarray = field(repr=False)  # (4, M+1)


@dataclass(frozen=True)
class LogNetModel:
    """Everything needed to run inference.

    Stored parameters are float32 (the deployed precision); inference upcasts
    them to float64, so a saved and reloaded model reproduces outputs exactly.
    """

    arch: LogNetArch
    reservoir: ReservoirSpec
    norms: NormStats
    readout: ReadoutWeights
    labels: tuple = DEFAULT_LABELS
    method: str = "adaptive_binning"

    def __post_init__(self):
        a = self.arch
        if len(self.labels) != a.n_classes:
            raise ValueError("label count does not match the output layer")
        expect = {
            "W": (self.reservoir.W.shape, (a.p_reservoir, a.n_input + 1)),
            "input_max": (self.norms.input_max.shape, (a.n_input + 1,)),
            "res_max": (self.norms.res_max.shape, (a.p_reservoir,)),
            "hidden": (self.readout.hidden.shape, (a.m_hidden, a.p_reservoir + 1)),
            "output": (self.readout.output.shape, (a.n_classes, a.m_hidden + 1)),
        }
        for name, (got, want) in expect.items():
            if tuple(got) != want:
                raise ValueError(f"{name} has shape {got}, expected {want}")
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "method", canonical_method(self.method))


def _f32(a) -> np.ndarray:
    out = np.asarray(a, dtype=np.float32).copy()
    out.flags.writeable = False
    return out


def _augment(X: np.ndarray) -> np.ndarray:
    return np.hstack([np.ones((X.shape[0], 1)), X])


def fit_normalization(reservoir: ReservoirSpec, X) -> NormStats:
    """Training-set maxima of ``|Y|`` and per-row (max, min, mean) of ``S = W Y_norm``.

    Zero maxima are replaced by 1. ``input_max`` is rounded to float32 before
    the reservoir statistics are taken so that both stages stay consistent.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("fit_normalization needs a non-empty (n, N) training matrix")
    if X.shape[1] + 1 != reservoir.W.shape[1]:
        raise ValueError(
            f"feature dimension {X.shape[1]} does not match reservoir width {reservoir.W.shape[1] - 1}"
        )
    Y = _augment(X)
    input_max = np.abs(Y).max(axis=0)
    input_max[input_max == 0] = 1.0
    input_max = _f32(input_max)
    S = (Y / input_max.astype(np.float64)) @ reservoir.W.T
    return NormStats(input_max, _f32(S.max(axis=0)), _f32(S.min(axis=0)), _f32(S.mean(axis=0)))


def reservoir_transform(model: LogNetModel, X) -> np.ndarray:
    """``Sh`` for every row of ``X``: shape (n, P+1), column 0 is the bias."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.arch.n_input:
        raise ValueError(f"expected {model.arch.n_input} features, got {X.shape[1]}")
    n = model.norms
    S = (_augment(X) / n.input_max.astype(np.float64)) @ model.reservoir.W.T
    span = n.res_max.astype(np.float64) - n.res_min.astype(np.float64)
    safe = np.where(span > 0, span, 1.0)
    S_norm = np.where(span > 0, (S - n.res_mean.astype(np.float64)) / safe, 0.0)
    return np.hstack([np.ones((S.shape[0], 1)), np.tanh(S_norm)])


def _readout_forward(hidden_w, output_w, Sh):
    pre = Sh @ hidden_w.T
    h = np.maximum(pre, 0.0)
    hb = np.hstack([np.ones((h.shape[0], 1)), h])
    logits = hb @ output_w.T
    return pre, hb, logits


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def logits(model: LogNetModel, X) -> np.ndarray:
    r = model.readout
    Sh = reservoir_transform(model, X)
    return _readout_forward(r.hidden.astype(np.float64), r.output.astype(np.float64), Sh)[2]


def forward(model: LogNetModel, f) -> np.ndarray:
    """Class probabilities for one vector (shape (4,)) or a batch (shape (n, 4))."""
    values = getattr(f, "values", f)
    x = np.asarray(values, dtype=np.float64)
    probs = softmax(logits(model, x))
    return probs[0] if x.ndim == 1 else probs


def predict_index(model: LogNetModel, X) -> np.ndarray:
    # argmax returns the first maximum, i.e. the lowest class index on ties
    return np.argmax(forward(model, np.atleast_2d(np.asarray(getattr(X, "values", X)))), axis=1)


def predict_label(model: LogNetModel, f) -> str:
    return model.labels[int(predict_index(model, f)[0])]


def readout_loss_and_grad(hidden_w, output_w, Sh, targets):
    """Mean cross-entropy and its gradients w.r.t. both readout matrices.

    ``targets`` holds class indices.
    """
    n = Sh.shape[0]
    pre, hb, z = _readout_forward(hidden_w, output_w, Sh)
    p = softmax(z)
    loss = -np.mean(np.log(np.maximum(p[np.arange(n), targets], 1e-300)))
    dz = p
    dz[np.arange(n), targets] -= 1.0
    dz /= n
    g_out = dz.T @ hb
    dh = (dz @ output_w[:, 1:]) * (pre > 0)
    g_hidden = dh.T @ Sh
    return loss, g_hidden, g_out


def init_readout(arch: LogNetArch, rng: np.random.Generator) -> ReadoutWeights:
    """He-scaled normal weights with zero bias columns."""
    p1, m = arch.p_reservoir + 1, arch.m_hidden
    hidden = rng.standard_normal((m, p1)) * np.sqrt(2.0 / p1)
    output = rng.standard_normal((arch.n_classes, m + 1)) * np.sqrt(2.0 / (m + 1))
    hidden[:, 0] = 0.0
    output[:, 0] = 0.0
    return ReadoutWeights(_f32(hidden), _f32(output))


@dataclass(frozen=True)
class TrainingParams:
    epochs: int = 150
    batch_size: int = 64
    learning_rate: float = 1e-3
    momentum: float = 0.9
    patience: int = 15
    validation_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("invalid training hyperparameters")
        if not 0 <= self.validation_fraction < 1:
            raise ValueError("validation_fraction must lie in [0, 1)")


@dataclass
class TrainingHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False


def label_indices(labels, y) -> np.ndarray:
    lookup = {lab: i for i, lab in enumerate(labels)}
    try:
        return np.array([lookup[v] for v in np.asarray(y).tolist()], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} is not one of {tuple(labels)}") from None


def train_readout(model: LogNetModel, X, y, params: TrainingParams = TrainingParams()):
    """Mini-batch gradient descent with momentum on the readout only.

    Returns ``(new_model, history)``. The reservoir and the normalization
    statistics are carried over untouched. When ``validation_fraction > 0`` a
    seeded hold-out drives early stopping and the best epoch's weights win.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empty training set")
    targets = label_indices(model.labels, y)
    if len(targets) != X.shape[0]:
        raise ValueError("X and y have different lengths")
    history = TrainingHistory()
    if params.epochs == 0:
        return model, history

    rng = np.random.default_rng(params.seed)
    Sh = reservoir_transform(model, X)
    n = Sh.shape[0]
    n_val = int(round(params.validation_fraction * n)) if n >= 10 else 0
    order = rng.permutation(n)
    val_idx, tr_idx = order[:n_val], order[n_val:]

    Wh = model.readout.hidden.astype(np.float64)
    Wo = model.readout.output.astype(np.float64)
    vh = np.zeros_like(Wh)
    vo = np.zeros_like(Wo)
    best = (np.inf, Wh.copy(), Wo.copy())
    stale = 0
    lr, mu = params.learning_rate, params.momentum

    for epoch in range(params.epochs):
        perm = tr_idx[rng.permutation(len(tr_idx))]
        total = 0.0
        for start in range(0, len(perm), params.batch_size):
            b = perm[start:start + params.batch_size]
            loss, gh, go = readout_loss_and_grad(Wh, Wo, Sh[b], targets[b])
            total += loss * len(b)
            vh = mu * vh - lr * gh
            vo = mu * vo - lr * go
            Wh += vh
            Wo += vo
        history.train_loss.append(total / len(perm))
        if n_val:
            val_loss = readout_loss_and_grad(Wh, Wo, Sh[val_idx], targets[val_idx])[0]
            history.val_loss.append(val_loss)
            if val_loss < best[0] - 1e-12:
                best = (val_loss, Wh.copy(), Wo.copy())
                history.best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if stale >= params.patience:
                    history.stopped_early = True
                    break
    if n_val:
        Wh, Wo = best[1], best[2]
    else:
        history.best_epoch = len(history.train_loss) - 1
    return replace(model, readout=ReadoutWeights(_f32(Wh), _f32(Wo))), history


def build_model(arch: LogNetArch, X, labels=DEFAULT_LABELS, method="adaptive_binning",
                lcg: LcgParams = LcgParams(), seed: int = 0) -> LogNetModel:
    """Reservoir + fitted normalization + freshly initialized readout."""
    reservoir = generate_reservoir(arch, lcg)
    norms = fit_normalization(reservoir, X)
    readout = init_readout(arch, np.random.default_rng(seed))
    return LogNetModel(arch, reservoir, norms, readout, tuple(labels), method)


class LogNetClassifier(ClassifierMixin, BaseEstimator):
    """scikit-learn wrapper around :class:`LogNetModel`.

    ``n_reservoir`` and ``n_hidden`` are P and M; N is taken from ``X``.
    """

    def __init__(self, n_reservoir=50, n_hidden=40, labels=DEFAULT_LABELS,
                 method="adaptive_binning", lcg_multiplier=8121, lcg_increment=28411,
                 lcg_modulus=134456, lcg_seed=1, epochs=150, batch_size=64,
                 learning_rate=1e-3, momentum=0.9, patience=15, validation_fraction=0.1,
                 random_state=0):
        self.n_reservoir = n_reservoir
        self.n_hidden = n_hidden
        self.labels = labels
        self.method = method
        self.lcg_multiplier = lcg_multiplier
        self.lcg_increment = lcg_increment
        self.lcg_modulus = lcg_modulus
        self.lcg_seed = lcg_seed
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.patience = patience
        self.validation_fraction = validation_fraction
        self.random_state = random_state

    def _training_params(self) -> TrainingParams:
        return TrainingParams(self.epochs, self.batch_size, self.learning_rate, self.momentum,
                              self.patience, self.validation_fraction, int(self.random_state or 0))

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=False)
        arch = LogNetArch(X.shape[1], self.n_reservoir, self.n_hidden)
        lcg = LcgParams(self.lcg_multiplier, self.lcg_increment, self.lcg_modulus, self.lcg_seed)
        seed = int(self.random_state or 0)
        model = build_model(arch, X, self.labels, self.method, lcg, seed)
        self.model_, self.history_ = train_readout(model, X, y, self._training_params())
        self.classes_ = np.asarray(self.model_.labels)
        self.n_features_in_ = X.shape[1]
        return self

    @classmethod
    def from_model(cls, model: LogNetModel) -> "LogNetClassifier":
        g = model.reservoir.generator
        clf = cls(n_reservoir=model.arch.p_reservoir, n_hidden=model.arch.m_hidden,
                  labels=model.labels, method=model.method, lcg_multiplier=g.multiplier,
                  lcg_increment=g.increment, lcg_modulus=g.modulus, lcg_seed=g.seed)
        clf.model_ = model
        clf.history_ = TrainingHistory()
        clf.classes_ = np.asarray(model.labels)
        clf.n_features_in_ = model.arch.n_input
        return clf

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return forward(self.model_, X)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]
