"""The two parallel PQC ansatze and the shared trainable-parameter layout.

Slot ids are flat indices into theta, ordered (circuit, layer, qubit, k)::

    slot = ((circuit * n_layers + layer) * n_qubits + qubit) * 3 + k

Angle ``k = 0`` drives U3's first angle and also the RX and RY gates on the
same qubit (parameter sharing); ``k = 1, 2`` drive the other two U3 angles.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .circuit import CircuitProgram
from .exceptions import StructuralError
from .statevector import GateOp, ParamRef

VARIANTS = ("PQC1", "PQC2")
HADAMARD_MODES = ("per_layer", "first_layer_only")


@dataclass(frozen=True)
class AnsatzSpec:
    variant: str = "PQC1"
    n_qubits: int = 15
    n_layers: int = 20
    hadamard: str = "per_layer"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise StructuralError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.n_qubits < 2:
            raise StructuralError(f"ansatz needs at least 2 qubits, got {self.n_qubits}")
        if self.n_layers < 1:
            raise StructuralError(f"ansatz needs at least 1 layer, got {self.n_layers}")
        if self.hadamard not in HADAMARD_MODES:
            raise StructuralError(f"hadamard must be one of {HADAMARD_MODES}, got {self.hadamard!r}")

    @property
    def n_slots(self) -> int:
        return self.n_layers * self.n_qubits * 3


def slot_id(circuit: int, layer: int, qubit: int, k: int, n_qubits: int, n_layers: int) -> int:
    return ((circuit * n_layers + layer) * n_qubits + qubit) * 3 + k


def _rotation_block(n, layer, circuit, n_layers, with_h):
    def p(i, k):
        return ParamRef(slot_id(circuit, layer, i, k, n, n_layers))

    gates = []
    if with_h:
        gates += [GateOp("H", (i,)) for i in range(n)]
    gates += [GateOp("U3", (i,), (p(i, 0), p(i, 1), p(i, 2))) for i in range(n)]
    gates += [GateOp("RX", (i,), (p(i, 0),)) for i in range(n)]
    gates += [GateOp("RY", (i,), (p(i, 0),)) for i in range(n)]
    return gates


def _all_to_all(kind, n):
    return [GateOp(kind, (i, j)) for i in range(n - 1) for j in range(i + 1, n)]


def _triplets(n):
    # needs three distinct qubits; a 2-qubit register has no triplets
    if n < 3:
        return []
    return [GateOp("CCX", (i, (i + 1) % n, (i + 2) % n)) for i in range(n)]


def _ring(n):
    return [GateOp("CX", (i, (i + 1) % n)) for i in range(n)]


def _build(variant, n_qubits, n_layers, hadamard, circuit):
    spec = AnsatzSpec(variant, n_qubits, n_layers, hadamard)
    n = spec.n_qubits
    gates = []
    for layer in range(n_layers):
        with_h = hadamard == "per_layer" or layer == 0
        gates += _rotation_block(n, layer, circuit, n_layers, with_h)
        if variant == "PQC1":
            gates += _all_to_all("CX", n) + _triplets(n) + _ring(n)
        else:
            gates += _all_to_all("CY", n) + _triplets(n)
    return CircuitProgram(n, tuple(gates))


def build_pqc1(n_qubits: int = 15, n_layers: int = 20, *, hadamard: str = "per_layer", circuit: int = 0) -> CircuitProgram:
    """First circuit: rotations, then all-to-all CX, CCX triplets and a CX ring.

    ``circuit`` selects which block of theta the program binds to.
    """
    return _build("PQC1", n_qubits, n_layers, hadamard, circuit)


def build_pqc2(n_qubits: int = 15, n_layers: int = 20, *, hadamard: str = "per_layer", circuit: int = 1) -> CircuitProgram:
    """Second circuit: same rotations, then all-to-all CY and CCX triplets."""
    return _build("PQC2", n_qubits, n_layers, hadamard, circuit)


def build_pair(n_qubits: int, n_layers: int, hadamard: str = "per_layer") -> tuple:
    return (
        build_pqc1(n_qubits, n_layers, hadamard=hadamard, circuit=0),
        build_pqc2(n_qubits, n_layers, hadamard=hadamard, circuit=1),
    )


def expected_gate_count(variant: str, n_qubits: int, n_layers: int) -> int:
    """Per-circuit gate total with per-layer Hadamards."""
    n = n_qubits
    triplets = n if n >= 3 else 0
    per_layer = 4 * n + n * (n - 1) // 2 + triplets
    if variant == "PQC1":
        per_layer += n
    return n_layers * per_layer


@dataclass
class ParameterTable:
    """Flat theta for both circuits plus the class bias."""

    theta: np.ndarray
    bias: np.ndarray
    n_qubits: int
    n_layers: int
    sharing_map: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        expected = 2 * self.n_layers * self.n_qubits * 3
        if self.theta.shape != (expected,):
            raise StructuralError(f"theta must have {expected} entries, got {self.theta.shape}")

    @property
    def n_classes(self) -> int:
        return self.bias.shape[0]

    @property
    def n_trainable(self) -> int:
        return self.theta.size + self.bias.size

    def flat(self) -> np.ndarray:
        return np.concatenate([self.theta, self.bias])

    def with_flat(self, vec) -> "ParameterTable":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.n_trainable,):
            raise StructuralError(f"expected {self.n_trainable} values, got {vec.shape}")
        return ParameterTable(vec[: self.theta.size].copy(), vec[self.theta.size :].copy(),
                              self.n_qubits, self.n_layers, self.sharing_map)

    def copy(self) -> "ParameterTable":
        return self.with_flat(self.flat())


def sharing_map_for(programs) -> dict:
    """slot -> [(circuit, gate_index, angle_position), ...]."""
    out: dict = {}
    for c, program in enumerate(programs):
        for _, gi, pos, slot in program.param_columns():
            out.setdefault(slot, []).append((c, gi, pos))
    return out


def parameter_layout(specs, n_classes: int, rng=None) -> ParameterTable:
    """Layout for a (PQC1, PQC2) spec pair.

    Theta is drawn uniformly from [0, 2*pi) when ``rng`` is given, zeros
    otherwise; the bias always starts at zero.
    """
    s1, s2 = specs
    if (s1.n_qubits, s1.n_layers) != (s2.n_qubits, s2.n_layers):
        raise StructuralError("both circuits must share n_qubits and n_layers")
    if n_classes < 1:
        raise StructuralError("need at least one class")
    programs = [_build(s.variant, s.n_qubits, s.n_layers, s.hadamard, c) for c, s in enumerate(specs)]
    size = s1.n_slots + s2.n_slots
    theta = np.zeros(size) if rng is None else rng.uniform(0.0, 2 * np.pi, size=size)
    return ParameterTable(theta, np.zeros(n_classes), s1.n_qubits, s1.n_layers, sharing_map_for(programs))
