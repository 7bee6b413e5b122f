"""Lowering of qubit gates to loop primitives.

In time-bin encoding a gate on qubit k pairs every bin b that has bit k = 0 with its partner
b + 2**k. Any 2x2 unitary U on such a pair factors exactly as

    U = diag(p0, p1) @ M(C) @ diag(q0, q1)

with M(C) the mode-coupler matrix, so a gate becomes a phase pattern, one mode coupler and
another phase pattern. Diagonal gates need no coupler at all.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from timebin_shor.compiler._gates import Circuit, ControlledGate, DiagonalGate, Gate
from timebin_shor.compiler._schedule import Frame, Schedule
from timebin_shor.errors import InvalidArgumentError, ScheduleInfeasibleError
from timebin_shor.primitives import (
    CouplerSpec,
    LossTable,
    PhasePattern,
    Primitive,
    PrimitiveKind,
    coupler_primitives,
)
from timebin_shor.state import QubitLayout

logger = logging.getLogger(__name__)

_ZERO_ATOL = 1e-14


def decompose_unitary(u: np.ndarray) -> Tuple[np.ndarray, float, np.ndarray]:
    """Split a 2x2 unitary into output phases, coupling strength and input phases.

    Args:
        u (np.ndarray): 2x2 unitary

    Returns:
        Tuple[np.ndarray, float, np.ndarray]: (d_out, C, d_in) with
            u == diag(d_out) @ coupler_matrix(C) @ diag(d_in); d_out and d_in are unit-modulus.
    """
    u = np.asarray(u, dtype=np.complex128)
    c, s = abs(u[0, 0]), abs(u[1, 0])
    if s < _ZERO_ATOL:
        return np.array([u[0, 0], u[1, 1]]), 0.0, np.ones(2, dtype=np.complex128)
    if c < _ZERO_ATOL:
        return np.array([1.0, -u[1, 0]]), 1.0, np.array([1.0, u[0, 1]])
    p0 = u[0, 0] / c
    p1 = -u[1, 0] / s
    q1 = u[0, 1] / (p0 * s)
    coupling = s**2 / (c**2 + s**2)
    return np.array([p0, p1]), float(coupling), np.array([1.0, q1])


def _check_register(layout: QubitLayout, frame: Frame) -> None:
    if layout.n_bins > frame.n_bins:
        e = (
            f"A {layout.n_qubits}-qubit register needs {layout.n_bins} bins; "
            f"the frame has {frame.n_bins}."
        )
        logger.error(e)
        raise ScheduleInfeasibleError(e)


def _phase_pattern(phases: np.ndarray, loss_table: LossTable) -> List[Primitive]:
    pattern = PhasePattern(phases, loss_db=loss_table.for_kind(PrimitiveKind.PHASE))
    return [] if pattern.is_trivial() else [pattern]


def lower_gate(
    gate: Gate, layout: QubitLayout, frame: Frame, loss_table: Optional[LossTable] = None
) -> List[Primitive]:
    """Lower one gate to the primitives that realize it exactly on the register bins.

    Args:
        gate (Gate): gate to lower; qubits are bit positions of `layout`
        layout (QubitLayout): register layout
        frame (Frame): target frame; bins at or past 2**n_qubits are left untouched
        loss_table (LossTable, optional): insertion losses to attach (default lossless)

    Raises:
        ScheduleInfeasibleError: the register does not fit in the frame

    Returns:
        List[Primitive]: phase patterns and, for non-diagonal gates, one coupler composite
    """
    return _lower(gate, layout, frame, loss_table or LossTable.lossless())[0]


def _lower(
    gate: Gate, layout: QubitLayout, frame: Frame, loss_table: LossTable
) -> Tuple[List[Primitive], Optional[CouplerSpec]]:
    gate.check(layout.n_qubits)
    _check_register(layout, frame)
    n_register = layout.n_bins

    if isinstance(gate, DiagonalGate):
        phases = np.zeros(frame.n_bins)
        phases[:n_register] = gate.basis_phases(layout.n_qubits)
        return _phase_pattern(phases, loss_table), None

    if not isinstance(gate, ControlledGate):
        e = f"No lowering rule for {type(gate).__name__}."
        logger.error(e)
        raise InvalidArgumentError(e)

    d_out, coupling, d_in = decompose_unitary(gate.matrix())
    bins = np.arange(frame.n_bins)
    target_bit = (bins >> gate.target) & 1
    active = bins < n_register
    if gate.control is not None:
        active &= ((bins >> gate.control) & 1) == 1

    def phases_of(d: np.ndarray) -> np.ndarray:
        return np.where(active, np.angle(d)[target_bit], 0.0)

    if coupling == 0.0:
        return _phase_pattern(phases_of(d_out * d_in), loss_table), None

    spec = CouplerSpec(2**gate.target, coupling, bins[active & (target_bit == 0)])
    primitives = _phase_pattern(phases_of(d_in), loss_table)
    primitives += coupler_primitives(spec, loss_table)
    primitives += _phase_pattern(phases_of(d_out), loss_table)
    return primitives, spec


@dataclass
class _Pass:
    gate_index: int
    primitives: List[Primitive]
    coupler: Optional[CouplerSpec] = None


def _merge(first: PhasePattern, second: PhasePattern) -> PhasePattern:
    phases = np.mod(first.phases + second.phases, 2 * np.pi)
    return PhasePattern(phases, first.pol, max(first.loss_db, second.loss_db))


def compile(
    circuit: Circuit,
    frame: Optional[Frame] = None,
    loss_table: Optional[LossTable] = None,
    merge_phases: bool = True,
) -> Schedule:
    """Lower a whole circuit, one loop pass per gate.

    Adjacent phase patterns are merged into one (their phases add), also across pass
    boundaries; a gate whose primitives all fold into the previous pass leaves no pass.

    Args:
        circuit (Circuit): circuit to compile
        frame (Frame, optional): target frame, by default 2**n_qubits bins
        loss_table (LossTable, optional): insertion losses attached to each primitive
        merge_phases (bool, by default True): fold adjacent phase patterns together

    Raises:
        ScheduleInfeasibleError: with the index of the first gate that cannot be placed

    Returns:
        Schedule: the lowered program
    """
    frame = frame or Frame.for_qubits(circuit.n_qubits)
    loss_table = loss_table or LossTable.lossless()
    if circuit.layout.n_bins > frame.n_bins and circuit.gates:
        outside = [
            i for i, g in enumerate(circuit.gates) if any(2**q >= frame.n_bins for q in g.qubits)
        ]
        culprit = outside[0] if outside else 0
        e = (
            f"A {circuit.n_qubits}-qubit register needs {circuit.layout.n_bins} bins; "
            f"the frame has {frame.n_bins}."
        )
        logger.error(f"gate {culprit}: {e}")
        raise ScheduleInfeasibleError(e, culprit)

    passes: List[_Pass] = []
    for index, gate in enumerate(circuit.gates):
        lowered, coupler = _lower(gate, circuit.layout, frame, loss_table)
        if merge_phases and passes and lowered and isinstance(lowered[0], PhasePattern):
            previous = passes[-1]
            last = previous.primitives[-1]
            if isinstance(last, PhasePattern) and last.pol == lowered[0].pol:
                merged = _merge(last, lowered[0])
                lowered = lowered[1:]
                if merged.is_trivial():
                    previous.primitives.pop()
                    if not previous.primitives:
                        passes.pop()
                else:
                    previous.primitives[-1] = merged
        if lowered:
            passes.append(_Pass(index, list(lowered), coupler))

    primitives: List[Primitive] = []
    starts: List[int] = []
    for p in passes:
        starts.append(len(primitives))
        primitives.extend(p.primitives)
    schedule = Schedule(
        frame,
        tuple(primitives),
        tuple(starts),
        tuple(p.coupler for p in passes),
        tuple(p.gate_index for p in passes),
    )
    logger.info(
        f"Compiled {len(circuit)} gates to {len(schedule)} primitives in "
        f"{schedule.n_passes} passes ({len(schedule.couplers())} couplers)"
    )
    return schedule
