"""Parameter-shift differentiation of circuit expectations and of the training loss.

A slot bound to several gate angles is differentiated by shifting each
occurrence on its own by +-pi/2 and summing the half-differences (product
rule). Shifts are applied as overrides on the resolved angle matrix: every
shifted evaluation is one row of a batched circuit run, so the program itself
is never rewritten and the nominal parameters are never touched.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import CircuitProgram, chunk_rows, run_rows
from .exceptions import BindingError, StructuralError, UsageError
from .head import ModelSpec, cross_entropy, fuse_logits, softmax
from .statevector import Statevector, expectations_z

SHIFT = np.pi / 2


@dataclass
class GradientRequest:
    program: CircuitProgram
    params: object  # ParameterTable or flat theta
    input: Statevector
    observable_qubits: Sequence[int]

    def __post_init__(self):
        n = self.program.n_qubits
        self.observable_qubits = [int(q) for q in self.observable_qubits]
        if any(not 0 <= q < n for q in self.observable_qubits):
            raise StructuralError(f"observable qubits {self.observable_qubits} invalid for {n} qubits")

    @property
    def theta(self) -> np.ndarray:
        return np.asarray(getattr(self.params, "theta", self.params), dtype=np.float64)


def _shift_plan(program: CircuitProgram, slots):
    """Param columns to shift and, for each, the index of its slot in ``slots``."""
    index = {s: i for i, s in enumerate(slots)}
    cols, owner = [], []
    for col, _, _, slot in program.param_columns():
        if slot in index:
            cols.append(col)
            owner.append(index[slot])
    return np.asarray(cols, dtype=int), np.asarray(owner, dtype=int)


def expectation_jacobian(program: CircuitProgram, theta, states, slots=None, *, rng=None, noise=None):
    """Expectations and their shift-rule derivatives for every state row.

    Returns ``(values, slots, jac)`` with ``values`` of shape
    ``(samples, n_qubits)`` and ``jac[s, i, q] = d<Z_q>/d theta[slots[i]]``.
    Each sample uses ``1 + 2 * occurrences`` rows: the nominal evaluation,
    then a (+, -) pair per shifted occurrence.
    """
    theta = np.asarray(theta, dtype=np.float64)
    amps = np.atleast_2d(np.asarray(states, dtype=np.complex128))
    n = program.n_qubits
    slots = program.slots() if slots is None else [int(s) for s in slots]
    cols, owner = _shift_plan(program, slots)
    n_samples = amps.shape[0]
    rows_per = 1 + 2 * cols.size
    stochastic = rng is not None and (noise is not None and noise.any_enabled or _has_phase_noise(program))

    values = np.empty((n_samples, n))
    jac = np.zeros((n_samples, len(slots), n))
    base = None if stochastic else program.resolve_angles(theta, rows=1)
    limit = chunk_rows(n)
    group = max(1, limit // rows_per)
    shift_rows = np.arange(cols.size)
    for g0 in range(0, n_samples, group):
        g1 = min(n_samples, g0 + group)
        total = (g1 - g0) * rows_per
        if stochastic:
            angles = program.resolve_angles(theta, rows=total, rng=rng, noise=noise)
        else:
            angles = np.repeat(base, total, axis=0)
        for s in range(g1 - g0):
            r0 = s * rows_per
            angles[r0 + 1 + 2 * shift_rows, cols] += SHIFT
            angles[r0 + 2 + 2 * shift_rows, cols] -= SHIFT
        ev = np.empty((total, n))
        for c0 in range(0, total, limit):
            c1 = min(total, c0 + limit)
            rows = np.arange(c0, c1)
            chunk = amps[g0 + rows // rows_per].copy()
            run_rows(program, chunk, angles[c0:c1])
            ev[c0:c1] = expectations_z(chunk, n)
        ev = ev.reshape(g1 - g0, rows_per, n)
        values[g0:g1] = ev[:, 0]
        half = 0.5 * (ev[:, 1::2] - ev[:, 2::2])  # (samples, occurrences, n)
        for k in range(g1 - g0):
            np.add.at(jac[g0 + k], owner, half[k])
    return values, slots, jac


def _has_phase_noise(program: CircuitProgram) -> bool:
    from .statevector import PhaseNoise

    return any(isinstance(a, PhaseNoise) and a.sigma > 0 for g in program.gates for a in g.angles)


def evaluate_expectations(program: CircuitProgram, theta, states, *, rng=None, noise=None) -> np.ndarray:
    """Nominal ``<Z_q>`` for every state row, shape ``(samples, n_qubits)``."""
    amps = np.atleast_2d(np.asarray(states, dtype=np.complex128))
    n = program.n_qubits
    out = np.empty((amps.shape[0], n))
    limit = chunk_rows(n)
    for c0 in range(0, amps.shape[0], limit):
        chunk = amps[c0 : c0 + limit].copy()
        angles = program.resolve_angles(theta, rows=chunk.shape[0], rng=rng, noise=noise)
        run_rows(program, chunk, angles)
        out[c0 : c0 + chunk.shape[0]] = expectations_z(chunk, n)
    return out


def shift_rule_grad(request: GradientRequest, slot: int, *, rng=None, noise=None) -> np.ndarray:
    """d<Z_k>/d theta[slot] for each observable qubit, summed over occurrences."""
    program = request.program
    if not program.occurrences(slot):
        raise BindingError(f"slot {slot} is not referenced by the program")
    theta = request.theta
    if not 0 <= slot < theta.size:
        raise BindingError(f"slot {slot} does not resolve (theta has {theta.size} entries)")
    _, _, jac = expectation_jacobian(program, theta, request.input.amplitudes, [slot], rng=rng, noise=noise)
    return jac[0, 0, request.observable_qubits]


def finite_diff_grad(request: GradientRequest, slot: int, h: float = 1e-5) -> np.ndarray:
    """Central difference on the slot's shared value (all occurrences move together)."""
    if not h > 0:
        raise UsageError("finite-difference step must be positive")
    theta = request.theta
    if not 0 <= slot < theta.size:
        raise BindingError(f"slot {slot} does not resolve (theta has {theta.size} entries)")
    plus, minus = theta.copy(), theta.copy()
    plus[slot] += h
    minus[slot] -= h
    amps = request.input.amplitudes
    f_plus = evaluate_expectations(request.program, plus, amps)[0]
    f_minus = evaluate_expectations(request.program, minus, amps)[0]
    return (f_plus - f_minus)[request.observable_qubits] / (2 * h)


@dataclass
class LossGrad:
    loss: float  # mean cross-entropy + L2 penalty
    grad: np.ndarray  # over theta then bias
    probs: np.ndarray  # (samples, classes), from the nominal rows


def loss_and_grad(states, onehots, params, model: ModelSpec, programs, reg_lambda: float = 0.0,
                  *, rngs=(None, None), noise=None) -> LossGrad:
    """Batch-mean loss and its gradient by the chain rule.

    dC/dlogit = p - y; each selected logit is one circuit's <Z_q> plus its
    bias, so its theta-gradient comes from that circuit's shift-rule Jacobian.
    ``rngs`` holds one generator per circuit.
    """
    amps = np.atleast_2d(np.asarray(states, dtype=np.complex128))
    y = np.atleast_2d(np.asarray(onehots, dtype=np.float64))
    if amps.shape[0] == 0:
        raise UsageError("empty batch")
    if y.shape != (amps.shape[0], model.n_classes):
        raise UsageError(f"one-hot labels must have shape {(amps.shape[0], model.n_classes)}, got {y.shape}")
    theta, bias = params.theta, params.bias
    n = model.n_qubits
    results = [
        expectation_jacobian(prog, theta, amps, rng=rng, noise=noise) for prog, rng in zip(programs, rngs)
    ]
    logits = fuse_logits(results[0][0], results[1][0], model.logit_selection, bias)
    p = softmax(logits)
    dlogit = p - y  # (samples, classes)
    m = amps.shape[0]

    grad_theta = np.zeros_like(theta)
    for c, sel in enumerate(model.logit_selection):
        circuit, qubit = divmod(sel, n)
        _, slots, jac = results[circuit]
        grad_theta[slots] += dlogit[:, c] @ jac[:, :, qubit] / m
    grad_theta += 2 * reg_lambda * theta
    grad_bias = dlogit.mean(axis=0)

    ce = np.mean([cross_entropy(p[i], y[i]) for i in range(m)])
    loss = float(ce + reg_lambda * theta @ theta)
    return LossGrad(loss, np.concatenate([grad_theta, grad_bias]), p)


def loss_grad(states, onehots, params, model: ModelSpec, programs, reg_lambda: float = 0.0, **kw) -> np.ndarray:
    return loss_and_grad(states, onehots, params, model, programs, reg_lambda, **kw).grad
