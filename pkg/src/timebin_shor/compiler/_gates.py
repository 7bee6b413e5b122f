import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from timebin_shor.errors import InvalidArgumentError
from timebin_shor.state import QubitLayout

logger = logging.getLogger(__name__)

UNITARY_ATOL = 1e-12


class Gate(ABC):
    """A qubit gate. Qubits are referred to by bit position in the bin index."""

    mnemonic: str = ""

    @property
    @abstractmethod
    def qubits(self) -> Tuple[int, ...]:
        pass

    @property
    def is_diagonal(self) -> bool:
        return False

    def check(self, n_qubits: int) -> None:
        """Raise InvalidArgumentError unless the gate fits an n-qubit register."""
        for q in self.qubits:
            if not 0 <= q < n_qubits:
                e = f"{self} refers to qubit {q}, but the register has {n_qubits} qubits."
                logger.error(e)
                raise InvalidArgumentError(e)
        if len(set(self.qubits)) != len(self.qubits):
            e = f"{self} uses the same qubit as control and target."
            logger.error(e)
            raise InvalidArgumentError(e)


class DiagonalGate(Gate):
    """Gate that is diagonal in the computational basis: a phase per basis state."""

    @property
    def is_diagonal(self) -> bool:
        return True

    @abstractmethod
    def basis_phases(self, n_qubits: int) -> np.ndarray:
        """Phase (radians) acquired by each of the 2**n_qubits basis states."""


class ControlledGate(Gate):
    """A 2x2 unitary on `target`, optionally conditioned on `control` being 1."""

    @property
    @abstractmethod
    def target(self) -> int:
        pass

    @property
    def control(self) -> Optional[int]:
        return None

    @property
    def qubits(self) -> Tuple[int, ...]:
        if self.control is None:
            return (self.target,)
        return (self.control, self.target)

    @abstractmethod
    def matrix(self) -> np.ndarray:
        pass


def _bits(n_qubits: int, position: int) -> np.ndarray:
    return (np.arange(2**n_qubits) >> position) & 1


@dataclass(frozen=True)
class H(ControlledGate):
    qubit: int
    mnemonic = "H"

    @property
    def target(self) -> int:
        return self.qubit

    def matrix(self) -> np.ndarray:
        return np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2)


@dataclass(frozen=True)
class X(ControlledGate):
    qubit: int
    mnemonic = "X"

    @property
    def target(self) -> int:
        return self.qubit

    def matrix(self) -> np.ndarray:
        return np.array([[0, 1], [1, 0]], dtype=np.complex128)


@dataclass(frozen=True)
class Ry(ControlledGate):
    qubit: int
    theta: float
    mnemonic = "RY"

    @property
    def target(self) -> int:
        return self.qubit

    def matrix(self) -> np.ndarray:
        c, s = np.cos(self.theta / 2), np.sin(self.theta / 2)
        return np.array([[c, -s], [s, c]], dtype=np.complex128)


@dataclass(frozen=True)
class Rz(DiagonalGate):
    qubit: int
    phi: float
    mnemonic = "RZ"

    @property
    def qubits(self) -> Tuple[int, ...]:
        return (self.qubit,)

    def basis_phases(self, n_qubits: int) -> np.ndarray:
        return np.where(_bits(n_qubits, self.qubit) == 1, self.phi / 2, -self.phi / 2)


@dataclass(frozen=True)
class CPhase(DiagonalGate):
    control_qubit: int
    target_qubit: int
    phi: float
    mnemonic = "CPHASE"

    @property
    def qubits(self) -> Tuple[int, ...]:
        return (self.control_qubit, self.target_qubit)

    def basis_phases(self, n_qubits: int) -> np.ndarray:
        both = _bits(n_qubits, self.control_qubit) & _bits(n_qubits, self.target_qubit)
        return np.where(both == 1, self.phi, 0.0)


@dataclass(frozen=True, eq=False)
class Diag(DiagonalGate):
    """Arbitrary diagonal gate on the whole register, one phase angle per basis state."""

    phases: Tuple[float, ...]
    mnemonic = "DIAG"

    def __post_init__(self) -> None:
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))

    @property
    def qubits(self) -> Tuple[int, ...]:
        return ()

    def check(self, n_qubits: int) -> None:
        if len(self.phases) != 2**n_qubits:
            e = f"DIAG needs {2**n_qubits} phases for {n_qubits} qubits, got {len(self.phases)}."
            logger.error(e)
            raise InvalidArgumentError(e)

    def basis_phases(self, n_qubits: int) -> np.ndarray:
        self.check(n_qubits)
        return np.asarray(self.phases, dtype=np.float64)


@dataclass(frozen=True)
class CNOT(ControlledGate):
    control_qubit: int
    target_qubit: int
    mnemonic = "CNOT"

    @property
    def target(self) -> int:
        return self.target_qubit

    @property
    def control(self) -> Optional[int]:
        return self.control_qubit

    def matrix(self) -> np.ndarray:
        return X(self.target_qubit).matrix()


@dataclass(frozen=True, eq=False)
class CU(ControlledGate):
    """Controlled single-qubit unitary. `unitary` acts on the target when the control is 1."""

    control_qubit: int
    target_qubit: int
    unitary: np.ndarray
    mnemonic = "CU"

    def __post_init__(self) -> None:
        u = np.array(self.unitary, dtype=np.complex128)
        if u.shape != (2, 2):
            e = f"CU needs a 2x2 matrix, got shape {u.shape}."
            logger.error(e)
            raise InvalidArgumentError(e)
        if not np.allclose(u @ u.conj().T, np.eye(2), rtol=0, atol=UNITARY_ATOL):
            e = f"CU matrix is not unitary within {UNITARY_ATOL}: {u.tolist()}"
            logger.error(e)
            raise InvalidArgumentError(e)
        object.__setattr__(self, "unitary", u)

    @property
    def target(self) -> int:
        return self.target_qubit

    @property
    def control(self) -> Optional[int]:
        return self.control_qubit

    def matrix(self) -> np.ndarray:
        return self.unitary


@dataclass(frozen=True)
class Circuit:
    """Ordered gate list over a declared register.

    Args:
        layout (QubitLayout): qubit names and their bit positions
        gates (Tuple[Gate, ...]): gates in application order
    """

    layout: QubitLayout
    gates: Tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "gates", tuple(self.gates))
        for index, gate in enumerate(self.gates):
            if not isinstance(gate, Gate):
                e = f"Circuit entry {index} is not a gate: {gate!r}"
                logger.error(e)
                raise InvalidArgumentError(e)
            gate.check(self.n_qubits)

    @property
    def n_qubits(self) -> int:
        return self.layout.n_qubits

    def with_gates(self, gates: Sequence[Gate]) -> "Circuit":
        """Return a new circuit with `gates` appended to this one's."""
        return Circuit(self.layout, self.gates + tuple(gates))

    def __len__(self) -> int:
        return len(self.gates)
