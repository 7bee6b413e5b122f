from ._gates import (
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
from ._lowering import compile, decompose_unitary, lower_gate
from ._oracle import MAX_ORACLE_QUBITS, gate_unitary, random_circuit, random_unitary, unitary_of
from ._parser import format_circuit, parse_angle, parse_circuit, read_circuit
from ._schedule import Diagnostic, Frame, Schedule, ValidationReport, run_schedule, validate

__all__ = [
    "CNOT",
    "CU",
    "Circuit",
    "ControlledGate",
    "CPhase",
    "Diag",
    "DiagonalGate",
    "Diagnostic",
    "Frame",
    "Gate",
    "H",
    "MAX_ORACLE_QUBITS",
    "Ry",
    "Rz",
    "Schedule",
    "ValidationReport",
    "X",
    "compile",
    "decompose_unitary",
    "format_circuit",
    "gate_unitary",
    "lower_gate",
    "parse_angle",
    "parse_circuit",
    "random_circuit",
    "random_unitary",
    "read_circuit",
    "run_schedule",
    "unitary_of",
    "validate",
]
