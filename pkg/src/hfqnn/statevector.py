"""Dense statevector simulation for small registers.

Basis ordering: qubit 0 is the most significant bit of the amplitude index,
so ``|q0 q1 ... q(n-1)>`` and ``|00> = |0> (x) |0>``.

All kernels accept amplitude arrays with arbitrary leading batch dimensions
(shape ``batch + (2**n,)``) and gate angles that broadcast against that batch.
The quantum layer relies on this to evaluate every parameter-shifted circuit
of a mini-batch in one pass.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError

MAX_QUBITS = 12
ORACLE_MAX_QUBITS = 4


class GateKind(str, Enum):
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    ROT = "RotZYZ"
    CNOT = "CNOT"


_N_ANGLES = {GateKind.RX: 1, GateKind.RY: 1, GateKind.RZ: 1, GateKind.ROT: 3}


def rx_matrix(theta):
    c, s = np.cos(np.asarray(theta) / 2), np.sin(np.asarray(theta) / 2)
    return np.stack([np.stack([c + 0j, -1j * s], -1), np.stack([-1j * s, c + 0j], -1)], -2)


def ry_matrix(theta):
    c, s = np.cos(np.asarray(theta) / 2), np.sin(np.asarray(theta) / 2)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2).astype(complex)


def rz_matrix(theta):
    e = np.exp(-0.5j * np.asarray(theta))
    z = np.zeros_like(e)
    return np.stack([np.stack([e, z], -1), np.stack([z, np.conj(e)], -1)], -2)


def rot_matrix(theta1, theta2, theta3):
    """Z-Y-Z unitary ``RZ(theta1) @ RY(theta2) @ RZ(theta3)``.

    ``theta3`` acts on the state first.
    """
    t1, t2, t3 = np.broadcast_arrays(*map(np.asarray, (theta1, theta2, theta3)))
    c, s = np.cos(t2 / 2), np.sin(t2 / 2)
    plus, minus = (t1 + t3) / 2, (t1 - t3) / 2
    return np.stack(
        [
            np.stack([np.exp(-1j * plus) * c, -np.exp(-1j * minus) * s], -1),
            np.stack([np.exp(1j * minus) * s, np.exp(1j * plus) * c], -1),
        ],
        -2,
    )


@dataclass(frozen=True)
class Gate1Q:
    """Single-qubit rotation. Angles may be floats or arrays (batched gate)."""

    kind: GateKind
    wire: int
    angles: tuple

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in _N_ANGLES:
            raise ConfigError(f"{kind.value} is not a single-qubit gate")
        angles = self.angles if isinstance(self.angles, tuple) else tuple(np.atleast_1d(self.angles))
        if len(angles) != _N_ANGLES[kind]:
            raise ConfigError(f"{kind.value} takes {_N_ANGLES[kind]} angle(s), got {len(angles)}")
        object.__setattr__(self, "angles", angles)

    def matrix(self) -> np.ndarray:
        if self.kind is GateKind.RX:
            return rx_matrix(self.angles[0])
        if self.kind is GateKind.RY:
            return ry_matrix(self.angles[0])
        if self.kind is GateKind.RZ:
            return rz_matrix(self.angles[0])
        return rot_matrix(*self.angles)


@dataclass(frozen=True)
class Gate2Q:
    control: int
    target: int
    kind: GateKind = GateKind.CNOT

    def __post_init__(self):
        if GateKind(self.kind) is not GateKind.CNOT:
            raise ConfigError(f"unsupported two-qubit gate {self.kind}")
        if self.control == self.target:
            raise IndexError(f"CNOT control and target coincide (wire {self.control})")


def RX(theta, wire: int) -> Gate1Q:
    return Gate1Q(GateKind.RX, wire, (theta,))


def RY(theta, wire: int) -> Gate1Q:
    return Gate1Q(GateKind.RY, wire, (theta,))


def RZ(theta, wire: int) -> Gate1Q:
    return Gate1Q(GateKind.RZ, wire, (theta,))


def Rot(theta1, theta2, theta3, wire: int) -> Gate1Q:
    return Gate1Q(GateKind.ROT, wire, (theta1, theta2, theta3))


def CNOT(control: int, target: int) -> Gate2Q:
    return Gate2Q(control, target)


Gate = Union[Gate1Q, Gate2Q]


@dataclass(frozen=True)
class Statevector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n_qubits,):
            raise ConfigError(
                f"expected {2**self.n_qubits} amplitudes for {self.n_qubits} qubits, got shape {amps.shape}"
            )
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    def norm_squared(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    @classmethod
    def from_bits(cls, bits: str) -> "Statevector":
        amps = np.zeros(2 ** len(bits), dtype=complex)
        amps[int(bits, 2)] = 1.0
        return cls(len(bits), amps)


def _check_n(n_qubits: int, limit: int = MAX_QUBITS) -> None:
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= limit:
        raise ConfigError(f"n_qubits must be an integer in [1, {limit}], got {n_qubits!r}")


def _check_wire(wire: int, n_qubits: int) -> None:
    if not 0 <= wire < n_qubits:
        raise IndexError(f"wire {wire} out of range for {n_qubits} qubits")


def zero_state(n_qubits: int) -> Statevector:
    _check_n(n_qubits)
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return Statevector(n_qubits, amps)


# ---------------------------------------------------------------- array kernels


def apply_matrix(amps: np.ndarray, matrix: np.ndarray, wire: int, n_qubits: int) -> np.ndarray:
    """Apply a (possibly batched) 2x2 matrix to ``wire`` by pairwise amplitude updates."""
    batch = amps.shape[:-1]
    v = amps.reshape(batch + (2**wire, 2, 2 ** (n_qubits - wire - 1)))
    a0, a1 = v[..., 0, :], v[..., 1, :]
    m = matrix[..., None, None]
    out = np.empty(np.broadcast_shapes(v.shape, matrix.shape[:-2] + (1, 1, 1)), dtype=complex)
    out[..., 0, :] = m[..., 0, 0, :, :] * a0 + m[..., 0, 1, :, :] * a1
    out[..., 1, :] = m[..., 1, 0, :, :] * a0 + m[..., 1, 1, :, :] * a1
    return out.reshape(out.shape[:-3] + (2**n_qubits,))


@lru_cache(maxsize=None)
def _cnot_permutation(control: int, target: int, n_qubits: int) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    cbit = 1 << (n_qubits - 1 - control)
    tbit = 1 << (n_qubits - 1 - target)
    perm = np.where(idx & cbit, idx ^ tbit, idx)
    perm.flags.writeable = False
    return perm


def apply_cnot(amps: np.ndarray, control: int, target: int, n_qubits: int) -> np.ndarray:
    return amps[..., _cnot_permutation(control, target, n_qubits)]


def expval_z_array(amps: np.ndarray, wire: int, n_qubits: int) -> np.ndarray:
    batch = amps.shape[:-1]
    probs = (amps.real**2 + amps.imag**2).reshape(batch + (2**wire, 2, 2 ** (n_qubits - wire - 1)))
    return probs[..., 0, :].sum(axis=(-2, -1)) - probs[..., 1, :].sum(axis=(-2, -1))


def expval_z_all(amps: np.ndarray, n_qubits: int) -> np.ndarray:
    """<Z> on every wire; output shape ``batch + (n_qubits,)``."""
    return np.stack([expval_z_array(amps, w, n_qubits) for w in range(n_qubits)], axis=-1)


def simulate(gates: Sequence[Gate], n_qubits: int, initial: np.ndarray | None = None) -> np.ndarray:
    """Run ``gates`` from ``initial`` (default ``|0...0>``) and return the raw amplitudes.

    Batched gate angles broadcast into a leading batch dimension of the result.
    """
    _check_n(n_qubits)
    if initial is None:
        amps = np.zeros(2**n_qubits, dtype=complex)
        amps[0] = 1.0
    else:
        amps = np.asarray(initial, dtype=complex)
    for gate in gates:
        if isinstance(gate, Gate1Q):
            _check_wire(gate.wire, n_qubits)
            amps = apply_matrix(amps, gate.matrix(), gate.wire, n_qubits)
        else:
            _check_wire(gate.control, n_qubits)
            _check_wire(gate.target, n_qubits)
            amps = apply_cnot(amps, gate.control, gate.target, n_qubits)
    return amps


# ---------------------------------------------------------------- value API


def apply_1q(state: Statevector, gate: Gate1Q) -> Statevector:
    _check_wire(gate.wire, state.n_qubits)
    return Statevector(state.n_qubits, apply_matrix(state.amplitudes, gate.matrix(), gate.wire, state.n_qubits))


def apply_2q(state: Statevector, gate: Gate2Q) -> Statevector:
    _check_wire(gate.control, state.n_qubits)
    _check_wire(gate.target, state.n_qubits)
    return Statevector(state.n_qubits, apply_cnot(state.amplitudes, gate.control, gate.target, state.n_qubits))


def apply_gate(state: Statevector, gate: Gate) -> Statevector:
    return apply_1q(state, gate) if isinstance(gate, Gate1Q) else apply_2q(state, gate)


def run_circuit(gates: Sequence[Gate], n_qubits: int) -> Statevector:
    return Statevector(n_qubits, simulate(gates, n_qubits))


def expval_z(state: Statevector, wire: int) -> float:
    _check_wire(wire, state.n_qubits)
    return float(expval_z_array(state.amplitudes, wire, state.n_qubits))


# ---------------------------------------------------------------- test oracle


def dense_unitary_oracle(gates: Sequence[Gate], n_qubits: int) -> np.ndarray:
    """Full circuit unitary from explicit Kronecker products. Brute force, n <= 4 only."""
    if n_qubits > ORACLE_MAX_QUBITS:
        raise ConfigError(f"dense oracle refuses {n_qubits} qubits (max {ORACLE_MAX_QUBITS})")
    _check_n(n_qubits, ORACLE_MAX_QUBITS)
    eye2 = np.eye(2, dtype=complex)
    p0 = np.array([[1, 0], [0, 0]], dtype=complex)
    p1 = np.array([[0, 0], [0, 1]], dtype=complex)
    x = np.array([[0, 1], [1, 0]], dtype=complex)

    def kron_all(factors):
        out = np.array([[1.0 + 0j]])
        for f in factors:
            out = np.kron(out, f)
        return out

    total = np.eye(2**n_qubits, dtype=complex)
    for gate in gates:
        if isinstance(gate, Gate1Q):
            _check_wire(gate.wire, n_qubits)
            factors = [eye2] * n_qubits
            factors[gate.wire] = np.asarray(gate.matrix(), dtype=complex).reshape(2, 2)
            full = kron_all(factors)
        else:
            _check_wire(gate.control, n_qubits)
            _check_wire(gate.target, n_qubits)
            off = [eye2] * n_qubits
            off[gate.control] = p0
            on = [eye2] * n_qubits
            on[gate.control] = p1
            on[gate.target] = x
            full = kron_all(off) + kron_all(on)
        total = full @ total
    return total
