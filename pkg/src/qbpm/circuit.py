"""Circuit programs: ordered gate lists with resolvable angle bindings."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import BindingError, StructuralError
from .statevector import (
    PARAMETERIZED,
    GateOp,
    ParamRef,
    PhaseNoise,
    Statevector,
    apply_gate_rows,
)

__all__ = ["CircuitProgram", "run_circuit", "run_rows"]

# Rows per chunk are capped so one chunk holds at most this many amplitudes.
MAX_CHUNK_AMPLITUDES = 1 << 21


@dataclass(frozen=True)
class CircuitProgram:
    """An ``n_qubits`` circuit. Every angle binding gets one column in the
    angle matrix produced by :meth:`resolve_angles`, in gate order."""

    n_qubits: int
    gates: tuple = ()
    _offsets: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        offsets, col = [], 0
        for g in self.gates:
            if any(q >= self.n_qubits for q in g.qubits):
                raise StructuralError(f"{g.kind}{g.qubits} outside a {self.n_qubits}-qubit register")
            offsets.append(col)
            col += len(g.angles)
        offsets.append(col)
        object.__setattr__(self, "_offsets", tuple(offsets))

    def __len__(self):
        return len(self.gates)

    @property
    def n_bindings(self) -> int:
        return self._offsets[-1]

    def columns(self, gate_index: int) -> slice:
        return slice(self._offsets[gate_index], self._offsets[gate_index + 1])

    def column_of(self, gate_index: int, position: int) -> int:
        return self._offsets[gate_index] + position

    def param_columns(self):
        """``(column, gate_index, position, slot)`` for every ParamRef binding."""
        out = []
        for gi, g in enumerate(self.gates):
            for pos, a in enumerate(g.angles):
                if isinstance(a, ParamRef):
                    out.append((self._offsets[gi] + pos, gi, pos, a.slot))
        return out

    def slots(self) -> list:
        """Sorted distinct parameter slots referenced by the program."""
        return sorted({c[3] for c in self.param_columns()})

    def occurrences(self, slot: int) -> list:
        """``(gate_index, position)`` pairs bound to ``slot``."""
        return [(gi, pos) for _, gi, pos, s in self.param_columns() if s == slot]

    def count(self, kind: str) -> int:
        return sum(1 for g in self.gates if g.kind == kind)

    def resolve_angles(self, theta, rows: int = 1, rng=None, noise=None) -> np.ndarray:
        """Angle matrix of shape ``(rows, n_bindings)``.

        ``PhaseNoise`` columns and, when ``noise`` enables gate noise, the
        angles of parameterised gates draw fresh Gaussian values per row from
        ``rng``; draws follow program order so a fixed generator state always
        reproduces the same matrix.
        """
        from .noise import perturb_gate_angles

        theta = np.asarray(theta, dtype=np.float64)
        angles = np.zeros((rows, self.n_bindings))
        gate_noise = noise is not None and noise.gate_enabled
        for gi, g in enumerate(self.gates):
            if not g.angles:
                continue
            cols = self.columns(gi)
            has_noise_binding = False
            for pos, a in enumerate(g.angles):
                col = cols.start + pos
                if isinstance(a, ParamRef):
                    if not 0 <= a.slot < theta.shape[0]:
                        raise BindingError(f"slot {a.slot} does not resolve (theta has {theta.shape[0]} entries)")
                    angles[:, col] = theta[a.slot]
                elif isinstance(a, PhaseNoise):
                    has_noise_binding = True
                    if a.sigma > 0:
                        if rng is None:
                            raise BindingError("phase-noise binding needs a random generator")
                        angles[:, col] = rng.normal(0.0, a.sigma, size=rows)
                else:
                    angles[:, col] = float(a)
            if gate_noise and g.kind in PARAMETERIZED and not has_noise_binding:
                if rng is None:
                    raise BindingError("gate noise needs a random generator")
                angles[:, cols] = perturb_gate_angles(angles[:, cols], g.kind, noise, rng)
        return angles

    # -- text form ---------------------------------------------------------
    def to_text(self) -> str:
        """One gate per line: ``KIND q... [: binding ...]``."""
        lines = [f"# n_qubits={self.n_qubits} gates={len(self.gates)}"]
        for g in self.gates:
            line = " ".join([g.kind] + [str(q) for q in g.qubits])
            if g.angles:
                line += " : " + " ".join(_binding_text(a) for a in g.angles)
            lines.append(line)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "CircuitProgram":
        n_qubits, gates = None, []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("n_qubits="):
                        n_qubits = int(tok.split("=", 1)[1])
                continue
            head, _, tail = line.partition(":")
            parts = head.split()
            angles = tuple(_parse_binding(t) for t in tail.split())
            gates.append(GateOp(parts[0], tuple(int(q) for q in parts[1:]), angles))
        if n_qubits is None:
            raise StructuralError("missing '# n_qubits=' header")
        return cls(n_qubits, tuple(gates))


def _binding_text(a) -> str:
    if isinstance(a, ParamRef):
        return f"p{a.slot}"
    if isinstance(a, PhaseNoise):
        return f"noise({a.sigma!r})"
    return repr(float(a))


def _parse_binding(tok: str):
    if tok.startswith("p"):
        return ParamRef(int(tok[1:]))
    if tok.startswith("noise(") and tok.endswith(")"):
        return PhaseNoise(float(tok[6:-1]))
    return float(tok)


def run_rows(program: CircuitProgram, amps: np.ndarray, angles: np.ndarray) -> np.ndarray:
    """Run ``program`` in place over ``amps`` (rows x 2**n) with per-row ``angles``."""
    if amps.shape[0] != angles.shape[0]:
        raise StructuralError("one angle row is needed per state row")
    n = program.n_qubits
    for gi, g in enumerate(program.gates):
        if g.angles:
            cols = program.columns(gi)
            apply_gate_rows(amps, n, g, [angles[:, c] for c in range(cols.start, cols.stop)])
        else:
            apply_gate_rows(amps, n, g)
    return amps


def chunk_rows(n_qubits: int) -> int:
    return max(1, MAX_CHUNK_AMPLITUDES >> n_qubits)


def run_circuit(program: CircuitProgram, params, state, *, angles=None, rng=None, noise=None):
    """Apply ``program`` to a copy of ``state``.

    ``params`` is a ParameterTable or a flat theta vector. ``state`` is a
    :class:`Statevector` or a ``(rows, 2**n)`` array; the result has the same
    type. A precomputed ``angles`` matrix overrides binding resolution.
    """
    theta = getattr(params, "theta", params)
    single = isinstance(state, Statevector)
    if single:
        if state.n_qubits != program.n_qubits:
            raise StructuralError(f"program expects {program.n_qubits} qubits, state has {state.n_qubits}")
        amps = state.amplitudes[None, :].copy()
    else:
        amps = np.array(state, dtype=np.complex128, ndmin=2, copy=True)
        if amps.shape[1] != 2**program.n_qubits:
            raise StructuralError(f"program expects {2**program.n_qubits} amplitudes, got {amps.shape[1]}")
    if angles is None:
        angles = program.resolve_angles(theta, rows=amps.shape[0], rng=rng, noise=noise)
    else:
        angles = np.atleast_2d(np.asarray(angles, dtype=np.float64))
        if angles.shape[0] == 1 and amps.shape[0] > 1:
            angles = np.repeat(angles, amps.shape[0], axis=0)
    run_rows(program, amps, angles)
    if single:
        return Statevector(program.n_qubits, amps[0])
    return amps

