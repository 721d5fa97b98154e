"""Forward pass over both parallel circuits, mini-batch training and evaluation.

:class:`QBPMClassifier` wraps the functional core (:func:`train`,
:func:`evaluate`, :func:`predict_proba`) in the scikit-learn estimator API.
"""

from __future__ import annotations

import logging
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .ansatz import AnsatzSpec, ParameterTable, build_pair, parameter_layout
from .exceptions import ConfigError, NumericalError, StructuralError
from .gradient import evaluate_expectations, loss_and_grad
from .head import AdamState, EvalMetrics, ModelSpec, adam_step, compute_metrics, cross_entropy, fuse_logits, softmax
from .noise import NoiseConfig, add_pixel_noise, inject_phase_noise, stream
from .statevector import encode_batch, n_qubits_for

logger = logging.getLogger(__name__)

# stream keys under the master seeds
KEY_INIT, KEY_SHUFFLE, KEY_TRAIN_NOISE, KEY_EVAL_NOISE, KEY_PIXEL, KEY_PREDICT = range(6)


@dataclass
class TrainingConfig:
    n_qubits: int = 15
    n_layers: int = 20
    n_classes: int = 3
    learning_rate: float = 0.1
    reg_lambda: float = 0.01
    epochs: int = 15
    batch_size: int = 8
    seed: int = 0
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    logit_selection: tuple = None
    hadamard: str = "per_layer"
    n_jobs: int = 1

    def __post_init__(self):
        self.noise = NoiseConfig.from_dict(self.noise)
        for name in ("n_qubits", "n_layers", "n_classes", "epochs", "batch_size", "n_jobs"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
            setattr(self, name, int(value))
        if self.n_classes < 2:
            raise ConfigError("n_classes must be at least 2")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not self.reg_lambda >= 0:
            raise ConfigError(f"lambda must be >= 0, got {self.reg_lambda}")
        if self.logit_selection is not None:
            self.logit_selection = tuple(int(s) for s in self.logit_selection)
        try:
            self.logit_selection = self.model_spec().logit_selection
            AnsatzSpec("PQC1", self.n_qubits, self.n_layers, self.hadamard)
        except StructuralError as exc:
            raise ConfigError(str(exc)) from exc

    def model_spec(self) -> ModelSpec:
        return ModelSpec(self.n_qubits, self.n_layers, self.n_classes, self.logit_selection, self.hadamard)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["noise"] = self.noise.to_dict()
        d["logit_selection"] = list(self.model_spec().logit_selection)
        d["lambda"] = d.pop("reg_lambda")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainingConfig":
        d = dict(d or {})
        if "lambda" in d:
            d["reg_lambda"] = d.pop("lambda")
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config key(s): {sorted(unknown)}")
        try:
            return cls(**d)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float
    seconds: float


@dataclass
class TrainResult:
    params: ParameterTable
    history: list
    initial_loss: float


def build_programs(config: TrainingConfig) -> tuple:
    """The (PQC1, PQC2) pair, with phase-noise RZ gates when that mode is on."""
    programs = build_pair(config.n_qubits, config.n_layers, config.hadamard)
    if config.noise.phase_enabled:
        programs = tuple(inject_phase_noise(p, config.noise) for p in programs)
    return programs


def init_params(config: TrainingConfig) -> ParameterTable:
    specs = (AnsatzSpec("PQC1", config.n_qubits, config.n_layers, config.hadamard),
             AnsatzSpec("PQC2", config.n_qubits, config.n_layers, config.hadamard))
    return parameter_layout(specs, config.n_classes, stream(config.seed, KEY_INIT))


def _map_circuits(fn, n_jobs: int):
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            return list(pool.map(fn, (0, 1)))
    return [fn(0), fn(1)]


def circuit_expectations(states, params, programs, config: TrainingConfig, keys=()) -> list:
    """``[<Z> of PQC1, <Z> of PQC2]``, each ``(samples, n_qubits)``.

    Each circuit draws gate noise from its own stream keyed by ``keys``, so
    concurrent and sequential execution give identical results.
    """
    noise = config.noise

    def run(c):
        rng = stream(noise.seed, *keys, c) if noise.any_enabled else None
        return evaluate_expectations(programs[c], params.theta, states, rng=rng, noise=noise)

    return _map_circuits(run, config.n_jobs)


def predict_proba(states, params, programs, config: TrainingConfig, keys=(KEY_PREDICT,)) -> np.ndarray:
    e1, e2 = circuit_expectations(states, params, programs, config, keys)
    return softmax(fuse_logits(e1, e2, config.model_spec().logit_selection, params.bias))


def forward(features, params, programs, config: TrainingConfig, keys=(KEY_PREDICT,)) -> np.ndarray:
    """Class probabilities for one feature vector (or a Sample)."""
    x = getattr(features, "features", features)
    return predict_proba(encode_batch(x, config.n_qubits), params, programs, config, keys)[0]


def _check_capacity(X, config):
    if X.shape[1] > 2**config.n_qubits:
        raise ConfigError(f"{X.shape[1]} features exceed 2**{config.n_qubits} amplitudes")


def _pixel_noise(X, config, key):
    if not config.noise.pixel_enabled:
        return X
    return add_pixel_noise(X, config.noise, stream(config.noise.seed, KEY_PIXEL, key))


def _loss_of(p, onehots, theta, reg_lambda):
    ce = np.mean([cross_entropy(p[i], onehots[i]) for i in range(p.shape[0])])
    return float(ce + reg_lambda * theta @ theta)


def evaluate(X, y, params, config: TrainingConfig, programs=None, keys=(KEY_PREDICT,), class_names=None) -> EvalMetrics:
    """Argmax predictions, confusion-based metrics and the mean regularised loss."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    programs = programs or build_programs(config)
    p = predict_proba(encode_batch(X, config.n_qubits), params, programs, config, keys)
    onehots = np.eye(config.n_classes)[y]
    loss = _loss_of(p, onehots, params.theta, config.reg_lambda)
    return compute_metrics(p.argmax(axis=1), y, config.n_classes, loss, class_names)


def train(X_train, y_train, X_val, y_val, config: TrainingConfig, params: ParameterTable = None,
          callback=None) -> TrainResult:
    """Mini-batch Adam training of both circuits and the bias.

    Pixel noise (if enabled) is applied once to both splits before training.
    Training accuracy is measured on the pre-update predictions of each batch.
    """
    X_train = _pixel_noise(np.asarray(X_train, dtype=np.float64), config, 0)
    y_train = np.asarray(y_train, dtype=int)
    has_val = X_val is not None and len(X_val) > 0
    if has_val:
        X_val = _pixel_noise(np.asarray(X_val, dtype=np.float64), config, 1)
        y_val = np.asarray(y_val, dtype=int)
    if len(y_train) == 0:
        raise ConfigError("empty training set")
    _check_capacity(X_train, config)

    model = config.model_spec()
    programs = build_programs(config)
    params = init_params(config) if params is None else params.copy()
    states = encode_batch(X_train, config.n_qubits)
    onehots = np.eye(config.n_classes)[y_train]
    noise = config.noise

    p0 = predict_proba(states, params, programs, config, (KEY_EVAL_NOISE, 0, 0))
    initial_loss = _loss_of(p0, onehots, params.theta, config.reg_lambda)

    adam = AdamState(params.n_trainable, learning_rate=config.learning_rate)
    flat = params.flat()
    history = []
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        order = stream(config.seed, KEY_SHUFFLE, epoch).permutation(len(y_train))
        loss_sum, correct = 0.0, 0
        for b, start in enumerate(range(0, len(order), config.batch_size)):
            idx = order[start : start + config.batch_size]
            rngs = [stream(noise.seed, KEY_TRAIN_NOISE, epoch, b, c) if noise.any_enabled else None for c in (0, 1)]
            lg = loss_and_grad(states[idx], onehots[idx], params, model, programs, config.reg_lambda,
                               rngs=rngs, noise=noise)
            if not np.isfinite(lg.loss):
                raise NumericalError(
                    f"non-finite loss at epoch {epoch}, batch {b}; |theta| = {np.linalg.norm(params.theta):.6g}"
                )
            loss_sum += lg.loss * idx.size
            correct += int(np.sum(lg.probs.argmax(axis=1) == y_train[idx]))
            flat, adam = adam_step(adam, lg.grad, flat)
            params = params.with_flat(flat)
        train_loss = loss_sum / len(y_train)
        train_acc = correct / len(y_train)
        val_loss = val_acc = float("nan")
        if has_val:
            m = evaluate(X_val, y_val, params, config, programs, keys=(KEY_EVAL_NOISE, epoch, 1))
            val_loss, val_acc = m.loss, m.accuracy
        rec = EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc, time.perf_counter() - t0)
        history.append(rec)
        logger.info("epoch %d: loss %.4f acc %.3f val_loss %.4f val_acc %.3f (%.1fs)",
                    epoch, train_loss, train_acc, val_loss, val_acc, rec.seconds)
        if callback is not None:
            callback(rec, params)
    return TrainResult(params, history, initial_loss)


# -- params.bin --------------------------------------------------------------

PARAMS_MAGIC = b"QBPMPRM\0"
PARAMS_VERSION = 1
_HEADER = struct.Struct("<8sIIIIQQ")


def save_params(path, params: ParameterTable) -> None:
    """Versioned header, then little-endian float64 theta followed by bias."""
    header = _HEADER.pack(PARAMS_MAGIC, PARAMS_VERSION, params.n_qubits, params.n_layers,
                          params.n_classes, params.theta.size, params.bias.size)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(params.theta.astype("<f8").tobytes())
        fh.write(params.bias.astype("<f8").tobytes())


def load_params(path) -> ParameterTable:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ConfigError(f"{path}: truncated header")
    magic, version, n_qubits, n_layers, n_classes, n_theta, n_bias = _HEADER.unpack_from(raw)
    if magic != PARAMS_MAGIC:
        raise ConfigError(f"{path}: not a parameter file")
    if version != PARAMS_VERSION:
        raise ConfigError(f"{path}: unsupported version {version}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != n_theta + n_bias or n_bias != n_classes:
        raise ConfigError(f"{path}: payload size does not match header")
    specs = (AnsatzSpec("PQC1", n_qubits, n_layers), AnsatzSpec("PQC2", n_qubits, n_layers))
    table = parameter_layout(specs, n_classes)
    return table.with_flat(body.astype(np.float64))


# -- estimator ---------------------------------------------------------------

class QBPMClassifier(ClassifierMixin, BaseEstimator):
    """Two parallel parameterised circuits over amplitude-encoded features.

    Parameters
    ----------
    n_qubits : int or None
        Register size; ``None`` picks the smallest register that holds the
        features (15 for 100x100x3 images).
    n_layers : int
        Layers per circuit.
    learning_rate, reg_lambda : float
        Adam step size and L2 weight on the circuit angles.
    epochs, batch_size : int
    logit_selection : sequence of int or None
        Indices into the concatenated ``2 * n_qubits`` expectation vector,
        one per class. ``None`` alternates between circuits.
    hadamard : {"per_layer", "first_layer_only"}
    noise : NoiseConfig, dict or None
        Gate and phase noise act on every forward pass; pixel noise is
        applied once to the data given to ``fit``.
    random_state : int
        Seeds initialisation and shuffling.
    n_jobs : int
        ``> 1`` runs the two circuits on concurrent threads.
    """

    def __init__(self, n_qubits=None, n_layers=20, learning_rate=0.1, reg_lambda=0.01, epochs=15,
                 batch_size=8, logit_selection=None, hadamard="per_layer", noise=None, random_state=0,
                 n_jobs=1):
        self.n_qubits = n_qubits
        self.n_layers = n_layers
        self.learning_rate = learning_rate
        self.reg_lambda = reg_lambda
        self.epochs = epochs
        self.batch_size = batch_size
        self.logit_selection = logit_selection
        self.hadamard = hadamard
        self.noise = noise
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self, n_features: int, n_classes: int) -> TrainingConfig:
        n_qubits = self.n_qubits if self.n_qubits is not None else n_qubits_for(n_features)
        seed = 0 if self.random_state is None else int(self.random_state)
        return TrainingConfig(
            n_qubits=n_qubits, n_layers=self.n_layers, n_classes=n_classes,
            learning_rate=self.learning_rate, reg_lambda=self.reg_lambda, epochs=self.epochs,
            batch_size=self.batch_size, seed=seed, noise=NoiseConfig.from_dict(self.noise),
            logit_selection=self.logit_selection, hadamard=self.hadamard, n_jobs=self.n_jobs,
        )

    def fit(self, X, y, eval_set=None):
        """Train on ``(X, y)``; ``eval_set=(X_val, y_val)`` fills the validation columns of ``history_``."""
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ValueError("need samples from at least two classes")
        self.n_features_in_ = X.shape[1]
        self.config_ = self._config(X.shape[1], self.classes_.size)
        X_val = y_val = None
        if eval_set is not None:
            X_val = check_array(eval_set[0], dtype=np.float64)
            y_val = self._encode_labels(eval_set[1])
        result = train(X, y_idx, X_val, y_val, self.config_)
        self.params_ = result.params
        self.history_ = result.history
        self.initial_loss_ = result.initial_loss
        self.programs_ = build_programs(self.config_)
        return self

    def _encode_labels(self, y):
        y = np.asarray(y)
        idx = np.searchsorted(self.classes_, y)
        idx = np.clip(idx, 0, self.classes_.size - 1)
        if np.any(self.classes_[idx] != y):
            raise ValueError("labels not seen during fit")
        return idx

    def _states(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return encode_batch(X, self.config_.n_qubits)

    def expectations(self, X) -> np.ndarray:
        """Concatenated per-qubit ``<Z>`` of both circuits, shape ``(samples, 2 * n_qubits)``."""
        e1, e2 = circuit_expectations(self._states(X), self.params_, self.programs_, self.config_, (KEY_PREDICT,))
        return np.concatenate([e1, e2], axis=1)

    def decision_function(self, X) -> np.ndarray:
        e = self.expectations(X)
        return e[:, list(self.config_.model_spec().logit_selection)] + self.params_.bias

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        return self.classes_[self.predict_proba(X).argmax(axis=1)]

    def evaluate(self, X, y, class_names=None) -> EvalMetrics:
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        names = class_names if class_names is not None else [str(c) for c in self.classes_]
        return evaluate(X, self._encode_labels(y), self.params_, self.config_, self.programs_, class_names=names)

    @property
    def n_trainable_(self) -> int:
        check_is_fitted(self, "params_")
        return self.params_.n_trainable
