"""The hardware instruction set of the fiber-loop architecture.

Four primitives act on a `TimeBinState`: a per-bin phase pattern (phase modulator), a
time-gated polarization rotation (polarization switch), a polarization-selective delay,
and a per-bin attenuation (amplitude modulator). The two-mode coupler is not a
primitive of its own; it is the composite built by `coupler_primitives`.

Each primitive carries the insertion loss (dB) of the device that realizes it. The loss
is only applied by the executor when losses are switched on, and always acts on the
whole frame because every bin passes through the device.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import ClassVar, List, Optional, Sequence, Tuple

import numpy as np

from timebin_shor.errors import FrameOverflowError, InvalidArgumentError
from timebin_shor.state import Polarization, TimeBinState

logger = logging.getLogger(__name__)

OVERFLOW_ATOL = 1e-12
_SNAP_ATOL = 1e-15


class PolSelector(str, Enum):
    H = "H"
    V = "V"
    BOTH = "both"

    @property
    def columns(self) -> Tuple[int, ...]:
        if self is PolSelector.H:
            return (0,)
        if self is PolSelector.V:
            return (1,)
        return (0, 1)


class PrimitiveKind(str, Enum):
    PHASE = "phase"
    ROTATE = "rotate"
    DELAY = "delay"
    ATTENUATE = "attenuate"


@dataclass(frozen=True)
class LossTable:
    """Insertion loss in dB per primitive kind.

    Defaults are the device figures of the experiment: electro-optic phase modulator 2 dB,
    polarization switch 3.5 dB; fiber delays and the amplitude modulator add nothing beyond
    their own action.
    """

    phase_db: float = 2.0
    rotate_db: float = 3.5
    delay_db: float = 0.0
    attenuate_db: float = 0.0

    def __post_init__(self) -> None:
        for name in ("phase_db", "rotate_db", "delay_db", "attenuate_db"):
            value = getattr(self, name)
            if value < 0:
                e = f"{name} must be non-negative (given {value})."
                logger.error(e)
                raise InvalidArgumentError(e)

    @classmethod
    def lossless(cls) -> "LossTable":
        return cls(0.0, 0.0, 0.0, 0.0)

    def for_kind(self, kind: PrimitiveKind) -> float:
        return {
            PrimitiveKind.PHASE: self.phase_db,
            PrimitiveKind.ROTATE: self.rotate_db,
            PrimitiveKind.DELAY: self.delay_db,
            PrimitiveKind.ATTENUATE: self.attenuate_db,
        }[kind]


def db_to_transmission(loss_db: float) -> float:
    """Power transmission of a device with the given insertion loss."""
    return float(10 ** (-loss_db / 10))


def rotation_cos_sin(theta: float) -> Tuple[float, float]:
    """cos and sin of a switch angle, snapped to exact 0 and ±1 at quarter turns."""
    c, s = float(np.cos(theta)), float(np.sin(theta))
    c = 0.0 if abs(c) < _SNAP_ATOL else (float(np.sign(c)) if abs(abs(c) - 1) < _SNAP_ATOL else c)
    s = 0.0 if abs(s) < _SNAP_ATOL else (float(np.sign(s)) if abs(abs(s) - 1) < _SNAP_ATOL else s)
    return c, s


def _bin_array(bins: Sequence[int], n_bins: Optional[int] = None) -> np.ndarray:
    arr = np.unique(np.asarray(bins, dtype=np.int64).reshape(-1))
    if arr.size and (arr[0] < 0 or (n_bins is not None and arr[-1] >= n_bins)):
        e = f"Gated bins {arr.tolist()[:8]}... fall outside the frame [0, {n_bins})."
        logger.error(e)
        raise InvalidArgumentError(e)
    return arr


def apply_phase(
    state: TimeBinState, phase_pattern: Sequence[float], pol_selector=PolSelector.BOTH
) -> TimeBinState:
    """Multiply each bin by exp(i*phi_b) on the selected polarization rail(s).

    Args:
        state (TimeBinState): input state
        phase_pattern (Sequence[float]): one phase (radians) per bin
        pol_selector (PolSelector, by default BOTH): which rail(s) the modulator acts on

    Returns:
        TimeBinState: phased state, same norm
    """
    phases = np.asarray(phase_pattern, dtype=np.float64)
    if phases.shape != (state.n_bins,):
        e = f"Phase pattern has {phases.size} entries for a {state.n_bins}-bin frame."
        logger.error(e)
        raise InvalidArgumentError(e)
    amps = state.amps.copy()
    factors = np.exp(1j * phases)
    for column in PolSelector(pol_selector).columns:
        amps[:, column] *= factors
    return state.with_amps(amps)


def apply_pol_rotate(state: TimeBinState, theta: float, gate_bins: Sequence[int]) -> TimeBinState:
    """Rotate (H, V) -> (cos*H + sin*V, -sin*H + cos*V) on the gated bins only.

    Args:
        state (TimeBinState): input state
        theta (float): rotation angle in radians; pi/2 is the full polarization switch
        gate_bins (Sequence[int]): bins inside the switch's gating window

    Returns:
        TimeBinState: rotated state
    """
    gated = _bin_array(gate_bins, state.n_bins)
    c, s = rotation_cos_sin(theta)
    amps = state.amps.copy()
    h = state.amps[gated, 0]
    v = state.amps[gated, 1]
    amps[gated, 0] = c * h + s * v
    amps[gated, 1] = -s * h + c * v
    return state.with_amps(amps)


def apply_delay(
    state: TimeBinState, k: int, pol=Polarization.V, advance: bool = False
) -> TimeBinState:
    """Shift one polarization rail by k bins.

    A plain delay moves the rail k bins later. With `advance` the rail moves k bins earlier:
    physically the other rail is the one delayed and the frame clock is re-referenced to it.

    Args:
        state (TimeBinState): input state
        k (int): number of bins
        pol (Polarization, by default V): rail that is shifted
        advance (bool, by default False): shift earlier instead of later

    Raises:
        FrameOverflowError: a nonzero amplitude would leave the frame

    Returns:
        TimeBinState: shifted state
    """
    if k < 0:
        e = f"Delay must be non-negative (given {k})."
        logger.error(e)
        raise InvalidArgumentError(e)
    if k == 0:
        return state.with_amps(state.amps)
    column = Polarization(pol).index
    n_bins = state.n_bins
    rail = state.amps[:, column]
    leaving = rail[:k] if advance else rail[max(n_bins - k, 0) :]
    if np.any(np.abs(leaving) > OVERFLOW_ATOL):
        direction = "before bin 0" if advance else f"past bin {n_bins - 1}"
        rail_name = Polarization(pol).value
        e = f"Delay of {k} bins on the {rail_name} rail pushes amplitude {direction}."
        logger.error(e)
        raise FrameOverflowError(e)
    shifted = np.zeros(n_bins, dtype=np.complex128)
    if k < n_bins:
        if advance:
            shifted[: n_bins - k] = rail[k:]
        else:
            shifted[k:] = rail[: n_bins - k]
    amps = state.amps.copy()
    amps[:, column] = shifted
    return state.with_amps(amps)


def apply_attenuate(state: TimeBinState, factors: Sequence[float]) -> TimeBinState:
    """Scale each bin's amplitudes (both rails) by a factor in [0, 1]."""
    factors = np.asarray(factors, dtype=np.float64)
    if factors.shape != (state.n_bins,):
        e = f"Attenuation pattern has {factors.size} entries for a {state.n_bins}-bin frame."
        logger.error(e)
        raise InvalidArgumentError(e)
    if np.any(factors < 0) or np.any(factors > 1):
        e = "Attenuation factors must lie in [0, 1]."
        logger.error(e)
        raise InvalidArgumentError(e)
    return state.with_amps(state.amps * factors[:, None])


def apply_loss(
    state: TimeBinState, loss_db: float, bin_set: Optional[Sequence[int]] = None
) -> TimeBinState:
    """Insertion loss: multiply amplitudes on bin_set (default: every bin) by 10^(-dB/20)."""
    if loss_db < 0:
        e = f"Loss must be non-negative (given {loss_db} dB)."
        logger.error(e)
        raise InvalidArgumentError(e)
    scale = 10 ** (-loss_db / 20)
    if bin_set is None:
        return state.with_amps(state.amps * scale)
    bins = _bin_array(bin_set, state.n_bins)
    amps = state.amps.copy()
    amps[bins, :] *= scale
    return state.with_amps(amps)


class Primitive(ABC):
    """One hardware instruction together with the insertion loss of its device."""

    kind: ClassVar[PrimitiveKind]
    loss_db: float

    @abstractmethod
    def apply(self, state: TimeBinState) -> TimeBinState:
        pass

    def transmission(self) -> float:
        return db_to_transmission(self.loss_db)

    def _check_loss(self) -> None:
        if self.loss_db < 0:
            e = f"{type(self).__name__} loss must be non-negative (given {self.loss_db} dB)."
            logger.error(e)
            raise InvalidArgumentError(e)


@dataclass(frozen=True, eq=False)
class PhasePattern(Primitive):
    phases: np.ndarray
    pol: PolSelector = PolSelector.BOTH
    loss_db: float = 0.0
    kind: ClassVar[PrimitiveKind] = PrimitiveKind.PHASE

    def __post_init__(self) -> None:
        object.__setattr__(self, "phases", np.asarray(self.phases, dtype=np.float64).reshape(-1))
        object.__setattr__(self, "pol", PolSelector(self.pol))
        self._check_loss()

    def apply(self, state: TimeBinState) -> TimeBinState:
        return apply_phase(state, self.phases, self.pol)

    def is_trivial(self) -> bool:
        return bool(np.allclose(np.exp(1j * self.phases), 1.0, rtol=0, atol=1e-14))

    def __repr__(self) -> str:
        return (
            f"PhasePattern({self.phases.size} bins, pol={self.pol.value}, "
            f"loss_db={self.loss_db})"
        )


@dataclass(frozen=True, eq=False)
class PolRotate(Primitive):
    theta: float
    gate_bins: np.ndarray
    loss_db: float = 0.0
    kind: ClassVar[PrimitiveKind] = PrimitiveKind.ROTATE

    def __post_init__(self) -> None:
        object.__setattr__(self, "gate_bins", _bin_array(self.gate_bins))
        self._check_loss()

    def apply(self, state: TimeBinState) -> TimeBinState:
        return apply_pol_rotate(state, self.theta, self.gate_bins)

    def __repr__(self) -> str:
        return (
            f"PolRotate(theta={self.theta:.6f}, {self.gate_bins.size} bins, "
            f"loss_db={self.loss_db})"
        )


@dataclass(frozen=True)
class Delay(Primitive):
    k: int
    pol: Polarization = Polarization.V
    advance: bool = False
    loss_db: float = 0.0
    kind: ClassVar[PrimitiveKind] = PrimitiveKind.DELAY

    def __post_init__(self) -> None:
        if self.k < 0:
            e = f"Delay must be non-negative (given {self.k})."
            logger.error(e)
            raise InvalidArgumentError(e)
        object.__setattr__(self, "pol", Polarization(self.pol))
        self._check_loss()

    def apply(self, state: TimeBinState) -> TimeBinState:
        return apply_delay(state, self.k, self.pol, self.advance)


@dataclass(frozen=True, eq=False)
class Attenuate(Primitive):
    factors: np.ndarray
    loss_db: float = 0.0
    kind: ClassVar[PrimitiveKind] = PrimitiveKind.ATTENUATE

    def __post_init__(self) -> None:
        factors = np.asarray(self.factors, dtype=np.float64).reshape(-1)
        if np.any(factors < 0) or np.any(factors > 1):
            e = "Attenuation factors must lie in [0, 1]."
            logger.error(e)
            raise InvalidArgumentError(e)
        object.__setattr__(self, "factors", factors)
        self._check_loss()

    def apply(self, state: TimeBinState) -> TimeBinState:
        return apply_attenuate(state, self.factors)

    def __repr__(self) -> str:
        return f"Attenuate({self.factors.size} bins, loss_db={self.loss_db})"


@dataclass(frozen=True, eq=False)
class CouplerSpec:
    """Mode coupler between each gated bin b and its partner b + delay_k.

    Args:
        delay_k (int): bin distance between the coupled modes
        coupling (float): coupling strength C in [0, 1]; C = 1 swaps the pair
        gate_bins (np.ndarray): early member b of every coupled pair
    """

    delay_k: int
    coupling: float
    gate_bins: np.ndarray

    def __post_init__(self) -> None:
        if self.delay_k < 1:
            e = f"Coupler delay must be at least 1 bin (given {self.delay_k})."
            logger.error(e)
            raise InvalidArgumentError(e)
        if not -1e-12 <= self.coupling <= 1 + 1e-12:
            e = f"Coupling strength must lie in [0, 1] (given {self.coupling})."
            logger.error(e)
            raise InvalidArgumentError(e)
        object.__setattr__(self, "coupling", min(max(float(self.coupling), 0.0), 1.0))
        early = _bin_array(self.gate_bins)
        if np.intersect1d(early, early + self.delay_k).size:
            e = "Coupled pairs overlap: a bin cannot be both an early and a late member."
            logger.error(e)
            raise InvalidArgumentError(e)
        object.__setattr__(self, "gate_bins", early)

    @property
    def late_bins(self) -> np.ndarray:
        return self.gate_bins + self.delay_k

    @property
    def mix_angle(self) -> float:
        """Partial rotation angle theta with C = sin(theta)^2, theta in [0, pi/2]."""
        return float(np.arcsin(np.sqrt(self.coupling)))

    def check_frame(self, n_bins: int) -> None:
        if self.gate_bins.size and (self.gate_bins[0] < 0 or self.late_bins[-1] >= n_bins):
            e = (
                f"Coupler pair ({int(self.gate_bins[-1])}, {int(self.late_bins[-1])}) does not "
                f"fit in a {n_bins}-bin frame."
            )
            logger.error(e)
            raise FrameOverflowError(e)


def coupler_matrix(coupling: float) -> np.ndarray:
    """The 2x2 mode-coupler matrix acting on (d_n, d_m)."""
    c, s = np.sqrt(1 - coupling), np.sqrt(coupling)
    return np.array([[c, s], [-s, c]], dtype=np.complex128)


def coupler_primitives(
    spec: CouplerSpec, loss_table: Optional[LossTable] = None
) -> List[Primitive]:
    """Lower one mode coupler to switch / delay / partial-rotation / return / close stages.

    1. full switch on the early bins moves d_n onto the V rail,
    2. V rail delayed by k so d_n meets d_m in the late bin,
    3. partial rotation with C = sin^2(theta) mixes the pair; d_m' is left on H,
    4. V rail advanced by k returns the other output to the early bin,
    5. closing rotation puts it back on the H rail as d_n'.
    """
    losses = loss_table or LossTable.lossless()
    rotate_db = losses.for_kind(PrimitiveKind.ROTATE)
    delay_db = losses.for_kind(PrimitiveKind.DELAY)
    return [
        PolRotate(np.pi / 2, spec.gate_bins, rotate_db),
        Delay(spec.delay_k, Polarization.V, False, delay_db),
        PolRotate(spec.mix_angle, spec.late_bins, rotate_db),
        Delay(spec.delay_k, Polarization.V, True, delay_db),
        PolRotate(-np.pi / 2, spec.gate_bins, rotate_db),
    ]


def apply_coupler(state: TimeBinState, coupler_spec: CouplerSpec) -> TimeBinState:
    """Couple every gated pair (b, b + k) with the 2x2 mode-coupler matrix.

    Expects the single-rail convention: the V rail must be empty on the coupled bins.

    Raises:
        FrameOverflowError: a coupled pair does not fit in the frame
        InvalidArgumentError: the V rail is occupied on a coupled bin
    """
    coupler_spec.check_frame(state.n_bins)
    touched = np.concatenate([coupler_spec.gate_bins, coupler_spec.late_bins])
    if np.any(np.abs(state.amps[touched, 1]) > OVERFLOW_ATOL):
        e = "Coupler input must be single-rail: V amplitude found on a coupled bin."
        logger.error(e)
        raise InvalidArgumentError(e)
    for primitive in coupler_primitives(coupler_spec):
        state = primitive.apply(state)
    return state
