import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from timebin_shor.errors import InvalidArgumentError
from timebin_shor.primitives import (
    Attenuate,
    CouplerSpec,
    Delay,
    PhasePattern,
    PolRotate,
    Primitive,
    apply_loss,
    rotation_cos_sin,
)
from timebin_shor.state import DEFAULT_BIN_WIDTH_NS, TimeBinState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Frame:
    """The time window the photon lives in: n_bins bins of bin_width ns each."""

    n_bins: int
    bin_width: float = DEFAULT_BIN_WIDTH_NS

    def __post_init__(self) -> None:
        if self.n_bins < 1:
            e = f"A frame needs at least one bin (given {self.n_bins})."
            logger.error(e)
            raise InvalidArgumentError(e)
        if not self.bin_width > 0:
            e = f"bin_width must be positive (given {self.bin_width})."
            logger.error(e)
            raise InvalidArgumentError(e)

    @classmethod
    def for_qubits(cls, n_qubits: int, bin_width: float = DEFAULT_BIN_WIDTH_NS) -> "Frame":
        return cls(2**n_qubits, bin_width)

    @property
    def duration(self) -> float:
        return self.n_bins * self.bin_width

    def matches(self, state: TimeBinState) -> bool:
        return state.n_bins == self.n_bins and bool(np.isclose(state.bin_width, self.bin_width))


@dataclass(frozen=True, eq=False)
class Schedule:
    """Time-ordered primitives, grouped into loop passes.

    Args:
        frame (Frame): frame the primitives were lowered for
        primitives (Tuple[Primitive, ...]): instructions in execution order
        pass_starts (Tuple[int, ...]): index of the first instruction of each pass
        pass_couplers (Tuple[Optional[CouplerSpec], ...]): the coupler realized in each pass
        pass_gates (Tuple[int, ...]): index of the circuit gate each pass came from
    """

    frame: Frame
    primitives: Tuple[Primitive, ...] = field(default_factory=tuple)
    pass_starts: Tuple[int, ...] = field(default_factory=tuple)
    pass_couplers: Tuple[Optional[CouplerSpec], ...] = field(default_factory=tuple)
    pass_gates: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        for name in ("primitives", "pass_starts", "pass_couplers", "pass_gates"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        problems = []
        starts = self.pass_starts
        if self.primitives and (not starts or starts[0] != 0):
            problems.append("the first pass must start at instruction 0")
        if not self.primitives and starts:
            problems.append("an empty schedule has no passes")
        if any(b <= a for a, b in zip(starts, starts[1:])):
            problems.append("pass boundaries must be strictly increasing")
        if starts and starts[-1] >= len(self.primitives):
            problems.append("a pass boundary lies past the last instruction")
        if len(self.pass_couplers) != len(starts) or len(self.pass_gates) != len(starts):
            problems.append("pass metadata does not match the number of passes")
        if problems:
            e = f"Malformed schedule: {'; '.join(problems)}."
            logger.error(e)
            raise InvalidArgumentError(e)

    def __len__(self) -> int:
        return len(self.primitives)

    @property
    def n_passes(self) -> int:
        return len(self.pass_starts)

    def pass_ends(self) -> Tuple[int, ...]:
        """Index of the last instruction of each pass."""
        return tuple(s - 1 for s in self.pass_starts[1:]) + (
            (len(self.primitives) - 1,) if self.primitives else ()
        )

    def passes(self) -> List[Tuple[Primitive, ...]]:
        bounds = list(self.pass_starts) + [len(self.primitives)]
        return [self.primitives[a:b] for a, b in zip(bounds, bounds[1:])]

    def couplers(self) -> List[CouplerSpec]:
        return [spec for spec in self.pass_couplers if spec is not None]

    def transmission(self) -> float:
        """Power transmission of the whole schedule when losses are switched on."""
        return float(np.prod([p.transmission() for p in self.primitives], initial=1.0))


def run_schedule(schedule: Schedule, state: TimeBinState, loss_on: bool = False) -> TimeBinState:
    """Execute a schedule on a state.

    Args:
        schedule (Schedule): the lowered program
        state (TimeBinState): input photon; must live in the schedule's frame
        loss_on (bool, by default False): apply each primitive's insertion loss

    Returns:
        TimeBinState: output photon, sub-normalized by the losses when loss_on
    """
    if not schedule.frame.matches(state):
        e = (
            f"State frame ({state.n_bins} bins of {state.bin_width} ns) does not match the "
            f"schedule frame ({schedule.frame.n_bins} bins of {schedule.frame.bin_width} ns)."
        )
        logger.error(e)
        raise InvalidArgumentError(e)
    for primitive in schedule.primitives:
        state = primitive.apply(state)
        if loss_on and primitive.loss_db > 0:
            state = apply_loss(state, primitive.loss_db)
    logger.debug(
        f"Ran {len(schedule)} primitives in {schedule.n_passes} passes, "
        f"loss_on={loss_on}, output norm {state.norm_squared():.6g}"
    )
    return state


@dataclass(frozen=True)
class Diagnostic:
    instruction_index: int
    kind: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    diagnostics: Tuple[Diagnostic, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.diagnostics

    def __bool__(self) -> bool:
        return self.ok


def validate(schedule: Schedule, frame: Optional[Frame] = None) -> ValidationReport:
    """Check a schedule against a frame without running it on amplitudes.

    Tracks which (bin, polarization) modes may hold amplitude for any basis input, starting
    from every bin occupied on the H rail. Reports delays that push an occupied mode out of
    the frame, patterns sized for another frame, and V-rail modes still occupied at the end
    of a pass (the next pass's switch would collide with them).
    """
    frame = frame or schedule.frame
    n_bins = frame.n_bins
    occupied = np.zeros((n_bins, 2), dtype=bool)
    occupied[:, 0] = True
    diagnostics: List[Diagnostic] = []
    pass_ends = set(schedule.pass_ends())

    for index, primitive in enumerate(schedule.primitives):
        if isinstance(primitive, PhasePattern):
            if primitive.phases.size != n_bins:
                diagnostics.append(
                    Diagnostic(
                        index,
                        "frame-mismatch",
                        f"phase pattern spans {primitive.phases.size} bins, frame has {n_bins}",
                    )
                )
        elif isinstance(primitive, Attenuate):
            if primitive.factors.size != n_bins:
                diagnostics.append(
                    Diagnostic(
                        index,
                        "frame-mismatch",
                        f"attenuation spans {primitive.factors.size} bins, frame has {n_bins}",
                    )
                )
            else:
                occupied[primitive.factors == 0, :] = False
        elif isinstance(primitive, PolRotate):
            gated = primitive.gate_bins
            outside = gated[(gated < 0) | (gated >= n_bins)]
            if outside.size:
                diagnostics.append(
                    Diagnostic(
                        index,
                        "gate-window",
                        f"switch gated on bins {outside.tolist()} outside the frame",
                    )
                )
                gated = gated[(gated >= 0) & (gated < n_bins)]
            c, s = rotation_cos_sin(primitive.theta)
            h, v = occupied[gated, 0].copy(), occupied[gated, 1].copy()
            occupied[gated, 0] = (c != 0) & h | (s != 0) & v
            occupied[gated, 1] = (s != 0) & h | (c != 0) & v
        elif isinstance(primitive, Delay):
            column = primitive.pol.index
            k = primitive.k
            rail = occupied[:, column]
            leaving = rail[:k] if primitive.advance else rail[max(n_bins - k, 0) :]
            if leaving.any():
                source = np.flatnonzero(leaving)
                if not primitive.advance:
                    source = source + max(n_bins - k, 0)
                kind = "underflow" if primitive.advance else "overflow"
                diagnostics.append(
                    Diagnostic(
                        index,
                        kind,
                        f"delay of {k} on the {primitive.pol.value} rail moves occupied bins "
                        f"{source.tolist()} out of the {n_bins}-bin frame",
                    )
                )
            shifted = np.zeros(n_bins, dtype=bool)
            if k < n_bins:
                if primitive.advance:
                    shifted[: n_bins - k] = rail[k:]
                else:
                    shifted[k:] = rail[: n_bins - k]
            occupied[:, column] = shifted
        if index in pass_ends and occupied[:, 1].any():
            diagnostics.append(
                Diagnostic(
                    index,
                    "rail-collision",
                    f"V rail still occupied on bins {np.flatnonzero(occupied[:, 1]).tolist()} "
                    "at the end of a pass",
                )
            )

    for diagnostic in diagnostics:
        logger.warning(f"Instruction {diagnostic.instruction_index}: {diagnostic.message}")
    return ValidationReport(tuple(diagnostics))
