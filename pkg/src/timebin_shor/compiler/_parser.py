"""Plain-text circuit format.

    qubits x0 x1 x2 f0 f1      # first name is bit position 0
    H x0
    CNOT x1 f0
    RZ x2 pi/2
    CPHASE x1 x0 0.7853982
    CU x0 x1 0 1 1 0           # u00 u01 u10 u11, Python complex literals
    DIAG 0 0 0 3.14159         # one phase per basis state

Angles are radians, written as numbers or as multiples of pi (``pi``, ``-pi/4``, ``3*pi/8``).
"""
import logging
import re
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Union

import numpy as np

from timebin_shor.compiler._gates import CNOT, CU, Circuit, CPhase, Diag, Gate, H, Ry, Rz, X
from timebin_shor.errors import InvalidArgumentError, ParseError
from timebin_shor.state import QubitLayout

logger = logging.getLogger(__name__)

_PI_ANGLE = re.compile(r"^([+-]?)(\d*\.?\d*)\s*\*?\s*pi(?:\s*/\s*(\d+\.?\d*))?$")


def parse_angle(token: str) -> float:
    try:
        return float(token)
    except ValueError:
        pass
    match = _PI_ANGLE.match(token.strip().lower())
    if not match:
        raise ValueError(f"not an angle: {token!r}")
    sign, factor, divisor = match.groups()
    value = (float(factor) if factor else 1.0) * np.pi / (float(divisor) if divisor else 1.0)
    return -value if sign == "-" else value


def _parse_complex(token: str) -> complex:
    return complex(token.replace("i", "j"))


# mnemonic -> (number of qubit operands, number of numeric operands or None for "rest")
_ARITY: Dict[str, tuple] = {
    "H": (1, 0),
    "X": (1, 0),
    "RY": (1, 1),
    "RZ": (1, 1),
    "CPHASE": (2, 1),
    "CNOT": (2, 0),
    "CU": (2, 4),
    "DIAG": (0, None),
}

_BUILDERS: Dict[str, Callable[[List[int], List[str]], Gate]] = {
    "H": lambda q, v: H(q[0]),
    "X": lambda q, v: X(q[0]),
    "RY": lambda q, v: Ry(q[0], parse_angle(v[0])),
    "RZ": lambda q, v: Rz(q[0], parse_angle(v[0])),
    "CPHASE": lambda q, v: CPhase(q[0], q[1], parse_angle(v[0])),
    "CNOT": lambda q, v: CNOT(q[0], q[1]),
    "CU": lambda q, v: CU(q[0], q[1], np.array([_parse_complex(t) for t in v]).reshape(2, 2)),
    "DIAG": lambda q, v: Diag(tuple(parse_angle(t) for t in v)),
}


def _parse_gate(tokens: Sequence[str], layout: QubitLayout, line_number: int) -> Gate:
    mnemonic = tokens[0].upper()
    if mnemonic not in _ARITY:
        e = f"unknown gate '{tokens[0]}' (known: {', '.join(_ARITY)})"
        logger.error(f"line {line_number}: {e}")
        raise ParseError(e, line_number)
    n_qubit_args, n_values = _ARITY[mnemonic]
    operands = list(tokens[1:])
    if len(operands) < n_qubit_args or (
        n_values is not None and len(operands) != n_qubit_args + n_values
    ):
        expected = n_qubit_args + (n_values or 0)
        e = f"{mnemonic} takes {expected} operands, got {len(operands)}"
        logger.error(f"line {line_number}: {e}")
        raise ParseError(e, line_number)
    names, values = operands[:n_qubit_args], operands[n_qubit_args:]
    unknown = [name for name in names if name not in layout.bit_assignment]
    if unknown:
        e = f"undeclared qubit(s) {unknown}; declared: {list(layout.names_by_position)}"
        logger.error(f"line {line_number}: {e}")
        raise ParseError(e, line_number)
    try:
        gate = _BUILDERS[mnemonic]([layout.position(name) for name in names], values)
        gate.check(layout.n_qubits)
    except (ValueError, InvalidArgumentError) as err:
        e = f"bad {mnemonic} operands: {err}"
        logger.error(f"line {line_number}: {e}")
        raise ParseError(e, line_number) from err
    return gate


def parse_circuit(text: str) -> Circuit:
    """Parse the circuit text format.

    Args:
        text (str): circuit source; the first statement must be the `qubits` header

    Raises:
        ParseError: with the offending line number

    Returns:
        Circuit: parsed circuit
    """
    layout = None
    gates: List[Gate] = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        if tokens[0].lower() == "qubits":
            if layout is not None:
                e = "qubits declared twice"
                logger.error(f"line {line_number}: {e}")
                raise ParseError(e, line_number)
            if len(tokens) < 2:
                e = "qubits header names no qubits"
                logger.error(f"line {line_number}: {e}")
                raise ParseError(e, line_number)
            try:
                layout = QubitLayout.from_names(tokens[1:])
            except InvalidArgumentError as err:
                raise ParseError(str(err), line_number) from err
            continue
        if layout is None:
            e = "a 'qubits' header must come before the first gate"
            logger.error(f"line {line_number}: {e}")
            raise ParseError(e, line_number)
        gates.append(_parse_gate(tokens, layout, line_number))
    if layout is None:
        e = "no 'qubits' header found"
        logger.error(e)
        raise ParseError(e)
    logger.debug(f"Parsed {len(gates)} gates on {layout.n_qubits} qubits")
    return Circuit(layout, tuple(gates))


def read_circuit(path: Union[str, Path]) -> Circuit:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        e = f"Cannot read circuit file {path}: {err}"
        logger.error(e)
        raise InvalidArgumentError(e) from err
    return parse_circuit(text)


def _format_gate(gate: Gate, names: Sequence[str]) -> str:
    if isinstance(gate, (H, X)):
        return f"{gate.mnemonic} {names[gate.qubit]}"
    if isinstance(gate, Ry):
        return f"RY {names[gate.qubit]} {gate.theta!r}"
    if isinstance(gate, Rz):
        return f"RZ {names[gate.qubit]} {gate.phi!r}"
    if isinstance(gate, CPhase):
        return f"CPHASE {names[gate.control_qubit]} {names[gate.target_qubit]} {gate.phi!r}"
    if isinstance(gate, CNOT):
        return f"CNOT {names[gate.control_qubit]} {names[gate.target_qubit]}"
    if isinstance(gate, CU):
        entries = " ".join(repr(complex(v)).strip("()") for v in gate.unitary.reshape(-1))
        return f"CU {names[gate.control_qubit]} {names[gate.target_qubit]} {entries}"
    if isinstance(gate, Diag):
        return "DIAG " + " ".join(repr(p) for p in gate.phases)
    e = f"No text form for {type(gate).__name__}."
    logger.error(e)
    raise InvalidArgumentError(e)


def format_circuit(circuit: Circuit) -> str:
    """Write a circuit in the text format `parse_circuit` reads."""
    names = circuit.layout.names_by_position
    lines = ["qubits " + " ".join(names)]
    lines += [_format_gate(gate, names) for gate in circuit.gates]
    return "\n".join(lines) + "\n"
