"""Dense-matrix reference for compiled schedules."""
import logging
from typing import List, Optional

import numpy as np

from timebin_shor.compiler._gates import (
    CNOT,
    CU,
    Circuit,
    ControlledGate,
    CPhase,
    Diag,
    DiagonalGate,
    Gate,
    H,
    Ry,
    Rz,
    X,
)
from timebin_shor.errors import InvalidArgumentError, ResourceLimitError
from timebin_shor.state import QubitLayout

logger = logging.getLogger(__name__)

MAX_ORACLE_QUBITS = 10


def gate_unitary(gate: Gate, n_qubits: int) -> np.ndarray:
    """Embed a gate in the full 2**n x 2**n space (row = output basis state)."""
    dim = 2**n_qubits
    if isinstance(gate, DiagonalGate):
        return np.diag(np.exp(1j * gate.basis_phases(n_qubits)))
    if not isinstance(gate, ControlledGate):
        e = f"No matrix for {type(gate).__name__}."
        logger.error(e)
        raise InvalidArgumentError(e)
    u = gate.matrix()
    index = np.arange(dim)
    active = ((index >> gate.target) & 1) == 0
    if gate.control is not None:
        active &= ((index >> gate.control) & 1) == 1
    low = index[active]
    high = low | (1 << gate.target)
    full = np.eye(dim, dtype=np.complex128)
    full[low, low] = u[0, 0]
    full[low, high] = u[0, 1]
    full[high, low] = u[1, 0]
    full[high, high] = u[1, 1]
    return full


def unitary_of(circuit: Circuit) -> np.ndarray:
    """Product of the gate embeddings in circuit order.

    Raises:
        ResourceLimitError: more than MAX_ORACLE_QUBITS qubits
    """
    if circuit.n_qubits > MAX_ORACLE_QUBITS:
        e = (
            f"Dense oracle is limited to {MAX_ORACLE_QUBITS} qubits "
            f"(circuit has {circuit.n_qubits})."
        )
        logger.error(e)
        raise ResourceLimitError(e)
    total = np.eye(2**circuit.n_qubits, dtype=np.complex128)
    for gate in circuit.gates:
        total = gate_unitary(gate, circuit.n_qubits) @ total
    return total


def random_unitary(rng: np.random.Generator) -> np.ndarray:
    """Haar-random 2x2 unitary from the QR decomposition of a complex Gaussian matrix."""
    z = (rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_gate(n_qubits: int, rng: np.random.Generator) -> Gate:
    """One gate drawn uniformly from every gate kind that fits the register."""
    kinds = ["H", "X", "RY", "RZ", "DIAG"]
    if n_qubits >= 2:
        kinds += ["CPHASE", "CNOT", "CU"]
    kind = kinds[rng.integers(len(kinds))]
    q = int(rng.integers(n_qubits))
    angle = float(rng.uniform(-np.pi, np.pi))
    if kind == "H":
        return H(q)
    if kind == "X":
        return X(q)
    if kind == "RY":
        return Ry(q, angle)
    if kind == "RZ":
        return Rz(q, angle)
    if kind == "DIAG":
        return Diag(tuple(rng.uniform(-np.pi, np.pi, 2**n_qubits)))
    c, t = (int(v) for v in rng.choice(n_qubits, size=2, replace=False))
    if kind == "CPHASE":
        return CPhase(c, t, angle)
    if kind == "CNOT":
        return CNOT(c, t)
    return CU(c, t, random_unitary(rng))


def random_circuit(
    n_qubits: int, depth: int, rng: Optional[np.random.Generator] = None
) -> Circuit:
    """Random circuit over the full gate set, qubits named q0, q1, ..."""
    rng = rng if rng is not None else np.random.default_rng()
    layout = QubitLayout.from_names([f"q{k}" for k in range(n_qubits)])
    gates: List[Gate] = [random_gate(n_qubits, rng) for _ in range(depth)]
    return Circuit(layout, tuple(gates))
