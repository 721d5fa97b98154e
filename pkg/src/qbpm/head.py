"""Classical head: logit fusion, softmax, regularised cross-entropy, Adam and metrics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericalError, StructuralError, UsageError

PROB_FLOOR = 1e-12


def default_selection(n_qubits: int, n_classes: int) -> list:
    """Alternate between the circuits: ``[0, n, 1, n + 1, ...]``."""
    return [c // 2 if c % 2 == 0 else n_qubits + c // 2 for c in range(n_classes)]


@dataclass(frozen=True)
class ModelSpec:
    n_qubits: int
    n_layers: int
    n_classes: int
    logit_selection: tuple = None
    hadamard: str = "per_layer"

    def __post_init__(self):
        if self.n_classes < 2:
            raise StructuralError("need at least two classes")
        sel = self.logit_selection
        if sel is None:
            sel = default_selection(self.n_qubits, self.n_classes)
        sel = tuple(int(s) for s in sel)
        object.__setattr__(self, "logit_selection", sel)
        if len(sel) != self.n_classes:
            raise StructuralError(f"selection needs {self.n_classes} indices, got {len(sel)}")
        if len(set(sel)) != len(sel):
            raise StructuralError(f"selection indices must be distinct: {sel}")
        if any(not 0 <= s < 2 * self.n_qubits for s in sel):
            raise StructuralError(f"selection indices must lie in [0, {2 * self.n_qubits}): {sel}")

    @property
    def n_trainable(self) -> int:
        return 2 * self.n_layers * self.n_qubits * 3 + self.n_classes


def fuse_logits(logits_c1, logits_c2, selection, bias) -> np.ndarray:
    """``concat(c1, c2)[selection] + bias``; leading batch axes are kept."""
    concat = np.concatenate([np.asarray(logits_c1, float), np.asarray(logits_c2, float)], axis=-1)
    selection = np.asarray(selection, dtype=int)
    if selection.size and (selection.min() < 0 or selection.max() >= concat.shape[-1]):
        raise StructuralError(f"selection {selection.tolist()} out of bounds for {concat.shape[-1]} logits")
    return concat[..., selection] + np.asarray(bias, float)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(p, y, params=None, reg_lambda: float = 0.0) -> float:
    """``-sum(y * log p) + reg_lambda * ||theta||^2``.

    ``params`` is a ParameterTable or a theta vector; only circuit angles are
    penalised, never the bias.
    """
    p = np.asarray(p, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ce = float(-np.sum(y * np.log(np.maximum(p, PROB_FLOOR))))
    if reg_lambda and params is not None:
        theta = np.asarray(getattr(params, "theta", params), dtype=np.float64)
        ce += reg_lambda * float(theta @ theta)
    return ce


@dataclass
class AdamState:
    size: int
    learning_rate: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    a: np.ndarray = None
    b: np.ndarray = None
    t: int = 0

    def __post_init__(self):
        if self.a is None:
            self.a = np.zeros(self.size)
        if self.b is None:
            self.b = np.zeros(self.size)


def adam_step(state: AdamState, grad, params) -> tuple:
    """One Adam update with the bias correction folded into the step size.

    Returns ``(new_params, state)``. ``state`` is updated in place; on a
    non-finite gradient nothing is changed and NumericalError is raised.
    """
    g = np.asarray(grad, dtype=np.float64)
    params = np.asarray(params, dtype=np.float64)
    if g.shape != params.shape or g.shape != state.a.shape:
        raise UsageError(f"gradient shape {g.shape} does not match parameters {params.shape}")
    if not np.all(np.isfinite(g)):
        bad = np.flatnonzero(~np.isfinite(g))
        raise NumericalError(f"non-finite gradient at {bad.size} entries (first index {bad[0]})")
    state.a = state.beta1 * state.a + (1 - state.beta1) * g
    state.b = state.beta2 * state.b + (1 - state.beta2) * g * g
    t1 = state.t + 1
    eta = state.learning_rate * np.sqrt(1 - state.beta2**t1) / (1 - state.beta1**t1)
    state.t = t1
    return params - eta * state.a / (np.sqrt(state.b) + state.eps), state


@dataclass
class EvalMetrics:
    confusion: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    accuracy: float
    loss: float = float("nan")
    class_names: list = field(default=None)

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    def to_dict(self) -> dict:
        names = self.class_names or [str(i) for i in range(len(self.precision))]
        per_class = [
            {"class": name, "precision": float(p), "recall": float(r), "f1": float(f), "support": int(s)}
            for name, p, r, f, s in zip(names, self.precision, self.recall, self.f1, self.support)
        ]
        return {
            "accuracy": float(self.accuracy),
            "loss": None if not np.isfinite(self.loss) else float(self.loss),
            "per_class": per_class,
            "confusion_matrix": self.confusion.astype(int).tolist(),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, **kw)


def compute_metrics(predictions, truths, n_classes: int, loss: float = float("nan"), class_names=None) -> EvalMetrics:
    preds = np.asarray(predictions, dtype=int)
    truths = np.asarray(truths, dtype=int)
    if preds.size == 0:
        raise UsageError("cannot compute metrics on an empty set")
    if preds.shape != truths.shape:
        raise UsageError("predictions and truths differ in length")
    if min(preds.min(), truths.min()) < 0 or max(preds.max(), truths.max()) >= n_classes:
        raise UsageError(f"labels must lie in [0, {n_classes})")
    confusion = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(confusion, (truths, preds), 1)
    tp = np.diag(confusion).astype(float)
    col = confusion.sum(axis=0).astype(float)
    row = confusion.sum(axis=1).astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(col > 0, tp / col, 0.0)
        recall = np.where(row > 0, tp / row, 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2 * precision * recall / denom, 0.0)
    accuracy = float(tp.sum() / confusion.sum())
    return EvalMetrics(confusion, precision, recall, f1, accuracy, loss, class_names)
