"""Brute-force references for tests.

Nothing here is used on the production path, and nothing here calls the fast
kernels: every gate is rebuilt as a full ``2**n x 2**n`` matrix from its own
textbook definition (Kronecker products for single-qubit gates, an explicit
basis permutation/phase table for controlled gates).
"""

from __future__ import annotations

import math
import cmath

import numpy as np

from .exceptions import CapacityError, StructuralError

MAX_ORACLE_QUBITS = 3

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)


def gate_2x2(kind: str, angles=()) -> np.ndarray:
    if kind == "H":
        return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
    if kind == "RX":
        (t,) = angles
        return np.array([[math.cos(t / 2), -1j * math.sin(t / 2)], [-1j * math.sin(t / 2), math.cos(t / 2)]])
    if kind == "RY":
        (t,) = angles
        return np.array([[math.cos(t / 2), -math.sin(t / 2)], [math.sin(t / 2), math.cos(t / 2)]], dtype=complex)
    if kind == "RZ":
        (t,) = angles
        return np.array([[cmath.exp(-0.5j * t), 0], [0, cmath.exp(0.5j * t)]])
    if kind == "U3":
        t, phi, lam = angles
        return np.array([
            [math.cos(t / 2), -cmath.exp(1j * lam) * math.sin(t / 2)],
            [cmath.exp(1j * phi) * math.sin(t / 2), cmath.exp(1j * (phi + lam)) * math.cos(t / 2)],
        ])
    raise StructuralError(f"no 2x2 form for {kind}")


def embed_single(u: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """I x ... x u x ... x I with qubit 0 as the leftmost factor."""
    out = np.array([[1.0 + 0j]])
    for q in range(n):
        out = np.kron(out, u if q == qubit else _I)
    return out


def embed_controlled(target_op: np.ndarray, controls, target: int, n: int) -> np.ndarray:
    """Matrix acting with ``target_op`` on ``target`` iff every control bit is 1."""
    dim = 2**n
    u = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        if all(bits[c] for c in controls):
            b = bits[target]
            for nb in (0, 1):
                amp = target_op[nb, b]
                if amp != 0:
                    out_bits = list(bits)
                    out_bits[target] = nb
                    row = int("".join(map(str, out_bits)), 2)
                    u[row, col] += amp
        else:
            u[col, col] = 1.0
    return u


def gate_unitary(kind: str, qubits, angles, n: int) -> np.ndarray:
    if n > MAX_ORACLE_QUBITS:
        raise CapacityError(f"dense oracle limited to {MAX_ORACLE_QUBITS} qubits")
    qubits = list(qubits)
    if kind in ("CX", "CCX"):
        return embed_controlled(_X, qubits[:-1], qubits[-1], n)
    if kind == "CY":
        return embed_controlled(_Y, qubits[:-1], qubits[-1], n)
    return embed_single(gate_2x2(kind, angles), qubits[0], n)


def program_unitary(program, angles_row) -> np.ndarray:
    """Dense product of every gate; ``angles_row`` is one resolved angle row."""
    n = program.n_qubits
    if n > MAX_ORACLE_QUBITS:
        raise CapacityError(f"dense oracle limited to {MAX_ORACLE_QUBITS} qubits")
    u = np.eye(2**n, dtype=complex)
    col = 0
    for g in program.gates:
        k = len(g.angles)
        u = gate_unitary(g.kind, g.qubits, [float(a) for a in angles_row[col : col + k]], n) @ u
        col += k
    return u


def dense_simulate(program, params, state, angles=None):
    """Oracle counterpart of ``run_circuit`` for a single register.

    Fixed and parameter bindings are resolved here directly from theta; pass
    ``angles`` to reuse recorded noise draws.
    """
    from .statevector import ParamRef, PhaseNoise, Statevector

    n = program.n_qubits
    if n > MAX_ORACLE_QUBITS:
        raise CapacityError(f"dense oracle limited to {MAX_ORACLE_QUBITS} qubits")
    theta = np.asarray(getattr(params, "theta", params), dtype=float)
    if angles is None:
        row = []
        for g in program.gates:
            for a in g.angles:
                if isinstance(a, ParamRef):
                    row.append(theta[a.slot])
                elif isinstance(a, PhaseNoise):
                    row.append(0.0)
                else:
                    row.append(float(a))
    else:
        row = list(np.asarray(angles, dtype=float).ravel())
    amps = state.amplitudes if isinstance(state, Statevector) else np.asarray(state, dtype=complex)
    out = program_unitary(program, row) @ amps
    return Statevector(n, out) if isinstance(state, Statevector) else out


def dense_expectation_z(amps, qubit: int, n: int) -> float:
    z = embed_single(np.diag([1.0, -1.0]).astype(complex), qubit, n)
    amps = np.asarray(amps, dtype=complex)
    return float(np.real(np.conj(amps) @ z @ amps))


def closed_form_checks(n_random: int = 100, seed: int = 0, tol: float = 1e-10) -> dict:
    """Analytic shift-rule identities evaluated with the dense oracle.

    Returns a dict of named checks, each with its max error and pass flag.
    """
    rng = np.random.default_rng(seed)
    zero = np.array([1, 0], dtype=complex)
    r = 0.5
    shift = math.pi / (4 * r)

    def f_ry(t):
        return dense_expectation_z(gate_2x2("RY", [t]) @ zero, 0, 1)

    def f_rz(t):
        return dense_expectation_z(gate_2x2("RZ", [t]) @ zero, 0, 1)

    def rule(f, t):
        return r * (f(t + shift) - f(t - shift))

    report = {}
    fixed = [0.0, math.pi / 4, math.pi / 2]
    report["ry_cosine"] = max(abs(rule(f_ry, t) + math.sin(t)) for t in fixed)
    report["rz_zero_gradient"] = max(abs(rule(f_rz, t)) for t in fixed)
    thetas = rng.uniform(-2 * math.pi, 2 * math.pi, size=n_random)
    report["shift_identity_random"] = max(abs(rule(f_ry, t) + math.sin(t)) for t in thetas)
    report["shift_is_half_pi"] = abs(shift - math.pi / 2)

    # global phase leaves every <Z_k> unchanged
    worst = 0.0
    for _ in range(10):
        u = embed_single(gate_2x2("U3", rng.uniform(0, 2 * math.pi, 3)), 0, 2)
        u = embed_controlled(_X, [0], 1, 2) @ u
        psi = u @ np.array([1, 0, 0, 0], dtype=complex)
        phased = cmath.exp(1j * rng.uniform(0, 2 * math.pi)) * psi
        for k in range(2):
            worst = max(worst, abs(dense_expectation_z(psi, k, 2) - dense_expectation_z(phased, k, 2)))
    report["global_phase"] = worst
    return {name: {"max_error": float(err), "passed": bool(err <= tol)} for name, err in report.items()}
