import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np

from timebin_shor.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

NORM_EPS = 1e-12
DEFAULT_BIN_WIDTH_NS = 12.5  # a 16-bin delay equals the 200 ns fiber delay


class Polarization(str, Enum):
    H = "H"
    V = "V"

    @property
    def index(self) -> int:
        return 0 if self is Polarization.H else 1


@dataclass(frozen=True, eq=False)
class TimeBinState:
    """Complex amplitudes of one photon over (time bin, polarization) modes.

    The photon may be sub-normalized: the missing squared norm is the probability that it
    was lost somewhere upstream. Instances are never mutated; the primitives return new
    states built with `with_amps`.

    Args:
        amps (np.ndarray): complex array of shape (n_bins, 2); column 0 is H, column 1 is V.
        bin_width (float, by default 12.5): bin duration in nanoseconds.
    """

    amps: np.ndarray
    bin_width: float = DEFAULT_BIN_WIDTH_NS

    def __post_init__(self) -> None:
        amps = np.array(self.amps, dtype=np.complex128)
        if amps.ndim != 2 or amps.shape[1] != 2 or amps.shape[0] < 1:
            e = f"Amplitudes must have shape (n_bins, 2), got {amps.shape}."
            logger.error(e)
            raise InvalidArgumentError(e)
        if not self.bin_width > 0:
            e = f"bin_width must be positive (given {self.bin_width})."
            logger.error(e)
            raise InvalidArgumentError(e)
        norm = float(np.sum(np.abs(amps) ** 2))
        if norm > 1 + NORM_EPS:
            e = f"Squared norm {norm!r} exceeds 1; a photon cannot gain probability."
            logger.error(e)
            raise InvalidArgumentError(e)
        object.__setattr__(self, "amps", amps)

    @property
    def n_bins(self) -> int:
        return int(self.amps.shape[0])

    @property
    def duration(self) -> float:
        return self.n_bins * self.bin_width

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amps) ** 2))

    def with_amps(self, amps: np.ndarray) -> "TimeBinState":
        """Return a copy of this state holding new amplitudes (same bin width)."""
        return TimeBinState(amps, self.bin_width)

    def rail(self, polarization: Polarization) -> np.ndarray:
        return self.amps[:, polarization.index]


@dataclass(frozen=True)
class QubitLayout:
    """Correspondence between qubit names and bit positions of the bin index.

    Qubit q_k sits at bit position k, so basis state (q_{n-1} ... q_0) is bin
    b = sum(q_k * 2**k). Bit strings are always written highest bit position first.

    Args:
        bit_assignment (Mapping[str, int]): qubit name -> bit position; the positions must
            be a permutation of range(n_qubits).
    """

    bit_assignment: Mapping[str, int]

    def __post_init__(self) -> None:
        positions = sorted(self.bit_assignment.values())
        if positions != list(range(len(positions))):
            e = f"Bit positions {positions} are not a permutation of 0..{len(positions) - 1}."
            logger.error(e)
            raise InvalidArgumentError(e)
        object.__setattr__(self, "bit_assignment", dict(self.bit_assignment))

    @classmethod
    def from_names(cls, names: Sequence[str]) -> "QubitLayout":
        """First declared name takes bit position 0, the next one position 1, and so on."""
        if len(set(names)) != len(names):
            e = f"Qubit names must be unique: {list(names)}"
            logger.error(e)
            raise InvalidArgumentError(e)
        return cls({name: k for k, name in enumerate(names)})

    @property
    def n_qubits(self) -> int:
        return len(self.bit_assignment)

    @property
    def n_bins(self) -> int:
        return 2**self.n_qubits

    @property
    def names_by_position(self) -> Tuple[str, ...]:
        return tuple(sorted(self.bit_assignment, key=self.bit_assignment.__getitem__))

    def position(self, name: str) -> int:
        try:
            return self.bit_assignment[name]
        except KeyError:
            e = f"Unknown qubit '{name}'. Declared qubits: {list(self.names_by_position)}"
            logger.error(e)
            raise InvalidArgumentError(e) from None

    def bin_index(self, values: Mapping[str, int]) -> int:
        missing = set(self.bit_assignment) - set(values)
        if missing:
            e = f"No value given for qubit(s) {sorted(missing)}."
            logger.error(e)
            raise InvalidArgumentError(e)
        return sum((int(values[name]) & 1) << k for name, k in self.bit_assignment.items())

    def bit_values(self, bin_index: int) -> Dict[str, int]:
        return {name: (bin_index >> k) & 1 for name, k in self.bit_assignment.items()}

    def bit_string(self, bin_index: int) -> str:
        return format(bin_index, f"0{self.n_qubits}b") if self.n_qubits else ""


def _polarization(polarization) -> Polarization:
    try:
        return Polarization(polarization)
    except ValueError:
        e = f"Unknown polarization {polarization!r}; expected 'H' or 'V'."
        logger.error(e)
        raise InvalidArgumentError(e) from None


def uniform_state(
    n_bins: int, polarization=Polarization.H, bin_width: float = DEFAULT_BIN_WIDTH_NS
) -> TimeBinState:
    """Equal superposition over n_bins bins in one polarization.

    Args:
        n_bins (int): number of bins B
        polarization (Polarization, by default H): rail holding the amplitudes
        bin_width (float, optional): bin duration in ns

    Returns:
        TimeBinState: every bin of the chosen rail holds 1/sqrt(B)
    """
    if n_bins < 1:
        e = f"n_bins must be at least 1 (given {n_bins})."
        logger.error(e)
        raise InvalidArgumentError(e)
    amps = np.zeros((n_bins, 2), dtype=np.complex128)
    amps[:, _polarization(polarization).index] = 1 / np.sqrt(n_bins)
    return TimeBinState(amps, bin_width)


def basis_state(
    layout: QubitLayout, bit_string: str, bin_width: float = DEFAULT_BIN_WIDTH_NS
) -> TimeBinState:
    """Photon in the single bin encoding a computational basis state, H polarized.

    Args:
        layout (QubitLayout): qubit layout; fixes the frame to 2**n_qubits bins
        bit_string (str): qubit values, highest bit position first (e.g. "10" is bin 2)

    Returns:
        TimeBinState: amplitude 1 on bin int(bit_string, 2)
    """
    if len(bit_string) != layout.n_qubits or set(bit_string) - {"0", "1"}:
        e = f"Bit string {bit_string!r} is not {layout.n_qubits} binary digits."
        logger.error(e)
        raise InvalidArgumentError(e)
    amps = np.zeros((layout.n_bins, 2), dtype=np.complex128)
    amps[int(bit_string, 2) if bit_string else 0, Polarization.H.index] = 1.0
    return TimeBinState(amps, bin_width)


def probabilities(state: TimeBinState) -> np.ndarray:
    """Per-bin detection probability, summed over polarization. Sums to the squared norm."""
    return np.sum(np.abs(state.amps) ** 2, axis=1)


def overlap(state_a: TimeBinState, state_b: TimeBinState) -> complex:
    """Inner product <a|b> over every (bin, polarization) mode."""
    if state_a.amps.shape != state_b.amps.shape:
        e = f"Cannot overlap states of {state_a.n_bins} and {state_b.n_bins} bins."
        logger.error(e)
        raise InvalidArgumentError(e)
    return complex(np.vdot(state_a.amps, state_b.amps))


def fidelity_up_to_phase(state_a: TimeBinState, state_b: TimeBinState) -> float:
    """|<a|b>|^2 for normalized states; insensitive to one global phase."""
    return abs(overlap(state_a, state_b)) ** 2


def bloch_vector(state: TimeBinState) -> Tuple[float, float, float]:
    """(<sx>, <sy>, <sz>) of a one-qubit register held in bins 0 and 1.

    Both polarization rails are summed over; the result is normalized by the register norm.
    """
    if state.n_bins < 2:
        e = f"A qubit needs two bins; the state has {state.n_bins}."
        logger.error(e)
        raise InvalidArgumentError(e)
    zero, one = state.amps[0], state.amps[1]
    norm = float(np.sum(np.abs(zero) ** 2) + np.sum(np.abs(one) ** 2))
    if norm <= 0:
        e = "The qubit register is empty; the photon was lost."
        logger.error(e)
        raise InvalidArgumentError(e)
    coherence = complex(np.vdot(zero, one))
    sz = float(np.sum(np.abs(zero) ** 2) - np.sum(np.abs(one) ** 2))
    return 2 * coherence.real / norm, 2 * coherence.imag / norm, sz / norm
