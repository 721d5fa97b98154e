"""Shared builders for tests: random programs, random states, the synthetic task."""

import numpy as np

from qbpm.circuit import CircuitProgram
from qbpm.statevector import GATE_ARITY, GateOp, ParamRef

KINDS = list(GATE_ARITY)


def random_state(rng, n):
    v = rng.standard_normal(2**n) + 1j * rng.standard_normal(2**n)
    return v / np.linalg.norm(v)


def random_program(rng, n, n_gates, n_slots=0, kinds=None):
    """Random gates over ``n`` qubits; angles are fixed or (when ``n_slots``) slot refs."""
    kinds = [k for k in (kinds or KINDS) if GATE_ARITY[k][0] <= n]
    gates = []
    for _ in range(n_gates):
        kind = kinds[rng.integers(len(kinds))]
        n_q, n_a = GATE_ARITY[kind]
        qubits = tuple(int(q) for q in rng.permutation(n)[:n_q])
        angles = []
        for _ in range(n_a):
            if n_slots and rng.random() < 0.7:
                angles.append(ParamRef(int(rng.integers(n_slots))))
            else:
                angles.append(float(rng.uniform(-2 * np.pi, 2 * np.pi)))
        gates.append(GateOp(kind, qubits, tuple(angles)))
    return CircuitProgram(n, tuple(gates))


def prototype_task(seed=0, per_class=40, n_features=16, n_classes=3, jitter=0.05):
    """Class prototypes in [0, 1]^d plus Gaussian jitter, clipped to [0, 1].

    Returns ``(X, y, prototypes)``.
    """
    rng = np.random.default_rng(seed)
    protos = rng.random((n_classes, n_features))
    X = np.vstack([np.clip(p + jitter * rng.standard_normal((per_class, n_features)), 0, 1) for p in protos])
    y = np.repeat(np.arange(n_classes), per_class)
    return X, y, protos


def nearest_prototype_accuracy(X, y, protos):
    """Brute-force separability check on amplitude-encoded vectors (cosine similarity)."""
    xs = X / np.linalg.norm(X, axis=1, keepdims=True)
    ps = protos / np.linalg.norm(protos, axis=1, keepdims=True)
    fid = (xs @ ps.T) ** 2
    return float(np.mean(fid.argmax(axis=1) == y))
