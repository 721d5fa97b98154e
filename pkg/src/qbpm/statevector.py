"""State-vector register, amplitude encoding and in-place gate kernels.

Bit ordering: qubit ``q`` of an ``n``-qubit register is bit ``n - 1 - q`` of
the basis index, so basis index ``j`` written in binary reads
``|q0 q1 ... q_{n-1}>`` left to right. Reshaping a C-ordered amplitude array
to ``(2,) * n`` therefore puts qubit ``q`` on axis ``q``.

All kernels act on a *batch* of registers stored as a 2-D array of shape
``(rows, 2**n)``. Angles may be scalars (shared by every row) or arrays with
one value per row, which is what lets a whole set of parameter-shift
evaluations run as a single pass over the circuit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .exceptions import CapacityError, EncodingError, StructuralError

# (number of qubits, number of angles)
GATE_ARITY = {
    "H": (1, 0),
    "U3": (1, 3),
    "RX": (1, 1),
    "RY": (1, 1),
    "RZ": (1, 1),
    "CX": (2, 0),
    "CY": (2, 0),
    "CCX": (3, 0),
}
# single-qubit kernels switch to matmul once the contiguous block is this wide
MATMUL_MIN_INNER = 8
PARAMETERIZED = frozenset({"U3", "RX", "RY", "RZ"})
ENTANGLING = frozenset({"CX", "CY", "CCX"})


@dataclass(frozen=True)
class ParamRef:
    """Angle bound to entry ``slot`` of the flat trainable vector."""

    slot: int


@dataclass(frozen=True)
class PhaseNoise:
    """Angle drawn from N(0, sigma**2) every time the gate is evaluated."""

    sigma: float


AngleBinding = Union[float, ParamRef, PhaseNoise]


@dataclass(frozen=True)
class GateOp:
    """One gate of a circuit program.

    ``qubits`` lists controls first and the target last. ``angles`` holds one
    binding per gate angle: a fixed value in radians, a :class:`ParamRef`, or
    a :class:`PhaseNoise` placeholder.
    """

    kind: str
    qubits: tuple
    angles: tuple = ()

    def __post_init__(self):
        if self.kind not in GATE_ARITY:
            raise StructuralError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "angles", tuple(self.angles))
        n_q, n_a = GATE_ARITY[self.kind]
        if len(self.qubits) != n_q:
            raise StructuralError(f"{self.kind} acts on {n_q} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != n_q:
            raise StructuralError(f"{self.kind} qubits must be distinct, got {self.qubits}")
        if any(q < 0 for q in self.qubits):
            raise StructuralError(f"negative qubit index in {self.qubits}")
        if len(self.angles) != n_a:
            raise StructuralError(f"{self.kind} takes {n_a} angle(s), got {len(self.angles)}")

    @property
    def target(self) -> int:
        return self.qubits[-1]

    @property
    def controls(self) -> tuple:
        return self.qubits[:-1]


@dataclass
class Statevector:
    """A single ``n_qubits`` register; ``amplitudes`` has length ``2**n_qubits``."""

    n_qubits: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise StructuralError("a register needs at least one qubit")
        self.amplitudes = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise StructuralError(
                f"expected {2**self.n_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )

    @classmethod
    def zero(cls, n_qubits: int) -> "Statevector":
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis(cls, n_qubits: int, label: str) -> "Statevector":
        """Computational basis state from a ket label such as ``"10"``."""
        if len(label) != n_qubits or set(label) - {"0", "1"}:
            raise StructuralError(f"bad basis label {label!r} for {n_qubits} qubits")
        amps = np.zeros(2**n_qubits, dtype=np.complex128)
        amps[int(label, 2)] = 1.0
        return cls(n_qubits, amps)

    def copy(self) -> "Statevector":
        return Statevector(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def n_qubits_for(length: int) -> int:
    """Smallest register that holds ``length`` amplitudes."""
    return max(1, int(np.ceil(np.log2(max(length, 1)))))


def encode_batch(features, n_qubits: int) -> np.ndarray:
    """Amplitude-encode each row of ``features`` into a ``(rows, 2**n)`` array."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise StructuralError(f"features must be 1-D or 2-D, got {x.ndim}-D")
    dim = 2**n_qubits
    if x.shape[1] < 1:
        raise CapacityError("empty feature vector")
    if x.shape[1] > dim:
        raise CapacityError(f"{x.shape[1]} features do not fit in {n_qubits} qubits ({dim} amplitudes)")
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(~(norms > 0) | ~np.isfinite(norms))
    if bad.size:
        raise EncodingError(f"cannot encode all-zero or non-finite feature vector (row {bad[0]})")
    out = np.zeros((x.shape[0], dim), dtype=np.complex128)
    out[:, : x.shape[1]] = x / norms[:, None]
    return out


def amplitude_encode(features: Sequence[float], n_qubits: int) -> Statevector:
    """Normalise ``features`` and load them as amplitudes, zero-padding the tail."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1:
        raise StructuralError("amplitude_encode expects a 1-D feature vector")
    return Statevector(n_qubits, encode_batch(x, n_qubits)[0])


def single_qubit_matrix(kind: str, angles=()) -> np.ndarray:
    """2x2 target matrix of ``kind``; batched angles give shape ``(rows, 2, 2)``.

    For controlled kinds this is the operator applied to the target when all
    controls are 1.
    """
    if kind in ("H",):
        return np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2.0)
    if kind in ("CX", "CCX"):
        return np.array([[0, 1], [1, 0]], dtype=np.complex128)
    if kind == "CY":
        return np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    angles = [np.asarray(a, dtype=np.float64) for a in angles]
    if kind == "RX":
        c, s = np.cos(angles[0] / 2), np.sin(angles[0] / 2)
        m = [[c, -1j * s], [-1j * s, c]]
    elif kind == "RY":
        c, s = np.cos(angles[0] / 2), np.sin(angles[0] / 2)
        m = [[c, -s], [s, c]]
    elif kind == "RZ":
        e = np.exp(-0.5j * angles[0])
        m = [[e, 0 * e], [0 * e, np.conj(e)]]
    elif kind == "U3":
        t0, t1, t2 = angles
        c, s = np.cos(t0 / 2), np.sin(t0 / 2)
        m = [[c + 0j, -np.exp(1j * t2) * s], [np.exp(1j * t1) * s, np.exp(1j * (t1 + t2)) * c]]
    else:
        raise StructuralError(f"unknown gate kind {kind!r}")
    m = np.array(m, dtype=np.complex128)
    if m.ndim == 3:
        m = np.moveaxis(m, 2, 0)
    return m


def _pair_views(amps: np.ndarray, n_qubits: int, gate: GateOp):
    """Views of the target-0 and target-1 halves restricted to controls == 1.

    Untouched qubits between the acted-on ones are merged into single axes so
    the views have at most ``2 * len(qubits) + 2`` dimensions.
    """
    order = sorted(gate.qubits)
    shape, axis_of, prev = [amps.shape[0]], {}, 0
    for q in order:
        shape.append(2 ** (q - prev))
        axis_of[q] = len(shape)
        shape.append(2)
        prev = q + 1
    shape.append(2 ** (n_qubits - prev))
    tensor = amps.reshape(shape)
    idx = [slice(None)] * tensor.ndim
    for c in gate.controls:
        idx[axis_of[c]] = 1
    idx[axis_of[gate.target]] = 0
    lo = tensor[tuple(idx)]
    idx[axis_of[gate.target]] = 1
    hi = tensor[tuple(idx)]
    return lo, hi


def _coef(m, i, j, ndim):
    if m.ndim == 2:
        return m[i, j]
    return m[:, i, j].reshape((-1,) + (1,) * (ndim - 1))


def apply_gate_rows(amps: np.ndarray, n_qubits: int, gate: GateOp, angles=None) -> np.ndarray:
    """Apply ``gate`` in place to every row of ``amps`` (shape ``(rows, 2**n)``).

    ``angles`` is a sequence with one entry per gate angle; each entry is a
    scalar or a per-row array.
    """
    if any(q >= n_qubits for q in gate.qubits):
        raise StructuralError(f"{gate.kind} on qubits {gate.qubits} exceeds a {n_qubits}-qubit register")
    lo, hi = _pair_views(amps, n_qubits, gate)
    kind = gate.kind
    if kind in ("CX", "CCX"):
        tmp = lo.copy()
        lo[...] = hi
        hi[...] = tmp
    elif kind == "CY":
        tmp = lo.copy()
        np.multiply(hi, -1j, out=lo)
        np.multiply(tmp, 1j, out=hi)
    elif kind == "RZ":
        e = np.exp(-0.5j * np.asarray(angles[0], dtype=np.float64))
        if e.ndim:
            e = e.reshape((-1,) + (1,) * (lo.ndim - 1))
        lo *= e
        hi *= np.conj(e)
    else:
        m = single_qubit_matrix(kind, angles if angles is not None else ())
        q = gate.target
        inner = 2 ** (n_qubits - q - 1)
        if inner >= MATMUL_MIN_INNER:
            # (rows, outer, 2, inner): one small matmul per outer block
            t = amps.reshape(amps.shape[0], 2**q, 2, inner)
            t[...] = np.matmul(m if m.ndim == 2 else m[:, None], t)
            return amps
        tmp = lo.copy()
        lo *= _coef(m, 0, 0, lo.ndim)
        lo += _coef(m, 0, 1, lo.ndim) * hi
        hi *= _coef(m, 1, 1, lo.ndim)
        hi += _coef(m, 1, 0, lo.ndim) * tmp
    return amps


def apply_gate(state: Statevector, gate: GateOp, resolved_angles: Sequence[float] = ()) -> Statevector:
    """Apply ``gate`` to ``state`` in place and return it."""
    n_a = GATE_ARITY[gate.kind][1]
    if len(resolved_angles) != n_a:
        raise StructuralError(f"{gate.kind} takes {n_a} angle(s), got {len(resolved_angles)}")
    apply_gate_rows(state.amplitudes[None, :], state.n_qubits, gate, [float(a) for a in resolved_angles])
    return state


def expectations_z(amps: np.ndarray, n_qubits: int) -> np.ndarray:
    """<Z_q> for every row and qubit; returns shape ``(rows, n_qubits)``."""
    amps = np.atleast_2d(amps)
    probs = (amps.real**2 + amps.imag**2).reshape(amps.shape[0], -1)
    out = np.empty((amps.shape[0], n_qubits))
    for q in range(n_qubits):
        p = probs.reshape(amps.shape[0], 2**q, 2, 2 ** (n_qubits - q - 1)).sum(axis=(1, 3))
        out[:, q] = p[:, 0] - p[:, 1]
    return out


def expectation_z(state: Statevector, qubit: int) -> float:
    """Exact Pauli-Z expectation of one qubit."""
    if not 0 <= qubit < state.n_qubits:
        raise StructuralError(f"qubit {qubit} out of range for {state.n_qubits} qubits")
    n = state.n_qubits
    probs = np.abs(state.amplitudes) ** 2
    p = probs.reshape(2**qubit, 2, 2 ** (n - qubit - 1)).sum(axis=(0, 2))
    return float(p[0] - p[1])
