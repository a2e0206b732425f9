"""Variational quantum classifier: RX angle embedding, strongly entangling
Z-Y-Z/CNOT layers, Pauli-Z readout on every wire, and parameter-shift
Jacobians with respect to both the weights and the embedded inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import statevector as sv
from .errors import ConfigError, DataError, ShapeError

SHIFT = np.pi / 2


def default_ranges(n_qubits: int, n_layers: int) -> tuple[int, ...]:
    if n_qubits == 1:
        return (0,) * n_layers
    return tuple((l % (n_qubits - 1)) + 1 for l in range(n_layers))


@dataclass(frozen=True)
class CircuitSpec:
    n_qubits: int
    n_layers: int = 2
    ranges: tuple[int, ...] | None = field(default=None)

    def __post_init__(self):
        if not 1 <= self.n_qubits <= sv.MAX_QUBITS:
            raise ConfigError(f"n_qubits must be in [1, {sv.MAX_QUBITS}], got {self.n_qubits}")
        if self.n_layers < 1:
            raise ConfigError(f"n_layers must be >= 1, got {self.n_layers}")
        ranges = default_ranges(self.n_qubits, self.n_layers) if self.ranges is None else tuple(self.ranges)
        if len(ranges) != self.n_layers:
            raise ConfigError(f"need one entangling range per layer ({self.n_layers}), got {len(ranges)}")
        if self.n_qubits >= 2 and not all(1 <= r <= self.n_qubits - 1 for r in ranges):
            raise ConfigError(f"entangling ranges must lie in [1, {self.n_qubits - 1}], got {ranges}")
        object.__setattr__(self, "ranges", tuple(int(r) for r in ranges))

    @property
    def weight_shape(self) -> tuple[int, int, int]:
        return (self.n_layers, self.n_qubits, 3)

    @property
    def n_params(self) -> int:
        return self.n_layers * self.n_qubits * 3


def init_weights(spec: CircuitSpec, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(0.0, 2 * np.pi, size=spec.weight_shape)


def _check_inputs(spec: CircuitSpec, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if x.shape[-1:] != (spec.n_qubits,):
        raise ShapeError(f"expected {spec.n_qubits} input angles, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("input angles must be finite")
    return x


def _check_weights(spec: CircuitSpec, weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape[-3:] != spec.weight_shape:
        raise ShapeError(f"weights must have trailing shape {spec.weight_shape}, got {w.shape}")
    return w


def embed_inputs(inputs) -> list[sv.Gate1Q]:
    """One RX per wire. ``inputs`` may carry a leading batch axis: shape (..., n)."""
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 0:
        raise ShapeError("inputs must be a vector")
    if not np.all(np.isfinite(x)):
        raise DataError("input angles must be finite")
    return [sv.RX(x[..., i], i) for i in range(x.shape[-1])]


def entangling_layers(spec: CircuitSpec, weights) -> list[sv.Gate]:
    """Per layer: Rot on every wire, then the CNOT ring ``i -> (i + r) mod n``."""
    w = _check_weights(spec, weights)
    n = spec.n_qubits
    gates: list[sv.Gate] = []
    for layer, r in enumerate(spec.ranges):
        for i in range(n):
            gates.append(sv.Rot(w[..., layer, i, 0], w[..., layer, i, 1], w[..., layer, i, 2], i))
        if n > 1:
            gates.extend(sv.CNOT(i, (i + r) % n) for i in range(n))
    return gates


def circuit(spec: CircuitSpec, weights, inputs) -> list[sv.Gate]:
    _check_inputs(spec, inputs)
    return embed_inputs(inputs) + entangling_layers(spec, weights)


def forward(spec: CircuitSpec, weights, inputs) -> np.ndarray:
    """Expectation values <Z_w> for every wire.

    Batched: ``inputs`` of shape (B, n) and/or ``weights`` of shape (B, L, n, 3)
    give an output of shape (B, n).
    """
    amps = sv.simulate(circuit(spec, weights, inputs), spec.n_qubits)
    return sv.expval_z_all(amps, spec.n_qubits)


def jacobians(spec: CircuitSpec, weights, inputs):
    """Parameter-shift Jacobians for a batch of inputs sharing one weight tensor.

    Returns ``(out, jac_inputs, jac_weights)`` with shapes (B, n), (B, n, n) and
    (B, n, L, n, 3); axis 1 indexes the measured wire. Every shifted circuit of
    the batch is simulated in a single vectorised pass.
    """
    w = _check_weights(spec, weights)
    x = np.atleast_2d(_check_inputs(spec, inputs))
    n, n_w = spec.n_qubits, spec.n_params
    n_p = n + n_w
    batch = x.shape[0]

    # columns: unshifted, +shift per parameter, -shift per parameter
    shifts = np.zeros((1 + 2 * n_p, n_p))
    shifts[1 : 1 + n_p] = SHIFT * np.eye(n_p)
    shifts[1 + n_p :] = -SHIFT * np.eye(n_p)
    x_rows = x[:, None, :] + shifts[None, :, :n]
    w_rows = w.reshape(1, 1, n_w) + shifts[None, :, n:]
    w_rows = np.broadcast_to(w_rows, (batch, 1 + 2 * n_p, n_w)).reshape((batch, 1 + 2 * n_p) + spec.weight_shape)

    vals = forward(spec, w_rows, x_rows)  # (B, 1 + 2P, n_out)
    out = vals[:, 0]
    grad = (vals[:, 1 : 1 + n_p] - vals[:, 1 + n_p :]) / 2  # (B, P, n_out)
    grad = np.swapaxes(grad, 1, 2)
    return out, grad[..., :n], grad[..., n:].reshape((batch, n) + spec.weight_shape)


def parameter_shift_grad(spec: CircuitSpec, weights, inputs):
    """Single-sample Jacobians: (d<Z_w>/dweights of shape (n, L, n, 3), d<Z_w>/dinputs of shape (n, n))."""
    x = _check_inputs(spec, inputs)
    if x.ndim != 1:
        raise ShapeError("parameter_shift_grad takes one input vector; use jacobians() for batches")
    _, jx, jw = jacobians(spec, weights, x[None])
    return jw[0], jx[0]
