"""Compiled Shor order finding on a single time-bin photon.

The argument register x0..x{n-1} occupies the low bit positions of the bin index and the
function register f0..f{m-1} the high ones. Modular exponentiation is hard-wired as CNOTs from
argument to function qubits, derived from the function-register encoding; the inverse QFT is
either compiled into the schedule or applied analytically after the fact.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import yaml

from timebin_shor.compiler import (
    CNOT,
    Circuit,
    CPhase,
    Frame,
    Gate,
    H,
    Schedule,
    X,
    compile,
    run_schedule,
)
from timebin_shor.detection import WavePacket, shaped_state
from timebin_shor.errors import (
    ConfigError,
    InvalidArgumentError,
    OrderNotFoundError,
    UnsupportedInstanceError,
)
from timebin_shor.primitives import Attenuate, LossTable, PrimitiveKind, apply_loss
from timebin_shor.state import (
    DEFAULT_BIN_WIDTH_NS,
    QubitLayout,
    TimeBinState,
    basis_state,
    probabilities,
)

logger = logging.getLogger(__name__)

# residue -> (f1 f0); each is reachable from the encoding of 1 with two CNOTs
BUILTIN_ENCODINGS: Dict[Tuple[int, int], Dict[int, str]] = {
    (15, 2): {1: "10", 2: "00", 4: "11", 8: "01"},
    (15, 4): {1: "10", 4: "00"},
    (15, 7): {1: "10", 7: "00", 4: "11", 13: "01"},
}

INHERENT_FAILURE = "inherent-failure"
NO_VALID_DENOMINATOR = "no-valid-denominator"


def mod_exp(a: int, x: int, N: int) -> int:
    """a**x mod N by square-and-multiply."""
    if N < 2 or x < 0:
        e = f"mod_exp needs N >= 2 and x >= 0 (given N={N}, x={x})."
        logger.error(e)
        raise InvalidArgumentError(e)
    return pow(a, x, N)


@dataclass(frozen=True)
class ShorConfig:
    """One compiled order-finding instance.

    Args:
        N (int): number to factor
        a (int): base, coprime with N
        n (int, by default 3): argument qubits
        m (int, by default 2): function qubits
        function_encoding (Mapping[int, str], optional): residue -> m-bit string (highest
            function qubit first); by default the built-in table for (N, a)
    """

    N: int
    a: int
    n: int = 3
    m: int = 2
    function_encoding: Optional[Mapping[int, str]] = None

    def __post_init__(self) -> None:
        problems = []
        if self.N < 3:
            problems.append(f"N must be at least 3 (given {self.N})")
        elif not 1 < self.a < self.N:
            problems.append(f"a must satisfy 1 < a < N (given a={self.a}, N={self.N})")
        elif math.gcd(self.a, self.N) != 1:
            problems.append(f"a={self.a} shares the factor {math.gcd(self.a, self.N)} with N")
        if self.n < 1 or self.m < 1:
            problems.append(f"register sizes must be positive (given n={self.n}, m={self.m})")
        if problems:
            for problem in problems:
                logger.error(problem)
            raise InvalidArgumentError("; ".join(problems))

        encoding = self.function_encoding
        if encoding is None:
            encoding = BUILTIN_ENCODINGS.get((self.N, self.a))
            if encoding is None or self.m != 2:
                e = (
                    f"No built-in encoding for N={self.N}, a={self.a}, m={self.m}; "
                    "supply a function-register encoding table."
                )
                logger.error(e)
                raise UnsupportedInstanceError(e)
        object.__setattr__(self, "function_encoding", self._checked_encoding(encoding))

    def _checked_encoding(self, encoding: Mapping[int, str]) -> Dict[int, str]:
        checked = {int(residue) % self.N: str(bits) for residue, bits in encoding.items()}
        problems = [
            f"encoding of {residue} ({bits!r}) is not {self.m} binary digits"
            for residue, bits in checked.items()
            if len(bits) != self.m or set(bits) - {"0", "1"}
        ]
        if len(set(checked.values())) != len(checked):
            problems.append("encoding is not injective")
        missing = sorted(set(self.residues()) - set(checked))
        if missing:
            problems.append(f"no encoding for realized residues {missing}")
        if problems:
            for problem in problems:
                logger.error(problem)
            raise UnsupportedInstanceError("; ".join(problems))
        return checked

    def residues(self) -> List[int]:
        """a**x mod N for every argument value x."""
        return [mod_exp(self.a, x, self.N) for x in range(2**self.n)]

    @property
    def layout(self) -> QubitLayout:
        return QubitLayout.from_names(self.argument_qubits + self.function_qubits)

    @property
    def argument_qubits(self) -> List[str]:
        return [f"x{i}" for i in range(self.n)]

    @property
    def function_qubits(self) -> List[str]:
        return [f"f{j}" for j in range(self.m)]

    def encode(self, residue: int) -> int:
        """Function-register value (as an m-bit integer) holding `residue`."""
        return int(self.function_encoding[residue % self.N], 2)  # type: ignore[index]


def load_encoding(path: Union[str, Path]) -> Dict[int, str]:
    """Read a residue -> bit-string table from YAML. Bit strings must be quoted."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        e = f"Cannot read encoding file {path}: {err}"
        logger.error(e)
        raise ConfigError([e]) from err
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as err:
        logger.error(f"Cannot parse encoding file {path}: {err}")
        raise ConfigError([f"encoding file {path} is not valid YAML: {err}"]) from err
    if not isinstance(raw, dict):
        raise ConfigError([f"encoding file {path} must hold a residue -> bit-string mapping"])
    problems = [
        f"encoding for {residue} must be a quoted bit string, got {bits!r}"
        for residue, bits in raw.items()
        if not isinstance(bits, str)
    ]
    problems += [
        f"residue {residue!r} is not an integer" for residue in raw if not isinstance(residue, int)
    ]
    if problems:
        for problem in problems:
            logger.error(problem)
        raise ConfigError(problems)
    return {int(residue): bits for residue, bits in raw.items()}


def modexp_network(config: ShorConfig) -> Tuple[int, List[Tuple[int, int]]]:
    """Derive the function-register start value and the CNOTs realizing x -> enc(a^x mod N).

    Works when the map is affine over GF(2) in the bits of x: argument bit i then flips the
    function bits enc(a^(2^i)) XOR enc(1).

    Raises:
        UnsupportedInstanceError: the encoded map is not reachable with CNOTs

    Returns:
        Tuple[int, List[Tuple[int, int]]]: (encoded value of 1, [(control, target) positions])
    """
    start = config.encode(1)
    flips = [config.encode(mod_exp(config.a, 2**i, config.N)) ^ start for i in range(config.n)]
    for x in range(2**config.n):
        set_bits = (i for i in range(config.n) if x >> i & 1)
        reached = reduce(lambda acc, i: acc ^ flips[i], set_bits, start)
        if reached != config.encode(mod_exp(config.a, x, config.N)):
            e = (
                f"Encoding for N={config.N}, a={config.a} is not affine in x "
                f"(x={x}); modular exponentiation cannot be wired with CNOTs."
            )
            logger.error(e)
            raise UnsupportedInstanceError(e)
    cnots = [
        (i, config.n + j) for i, flip in enumerate(flips) for j in range(config.m) if flip >> j & 1
    ]
    return start, cnots


def initialization_gates(config: ShorConfig) -> List[Gate]:
    start, _ = modexp_network(config)
    gates: List[Gate] = [H(i) for i in range(config.n)]
    gates += [X(config.n + j) for j in range(config.m) if start >> j & 1]
    return gates


def modexp_gates(config: ShorConfig) -> List[Gate]:
    _, cnots = modexp_network(config)
    return [CNOT(control, target) for control, target in cnots]


def inverse_qft_gates(n: int) -> List[Gate]:
    """Inverse QFT on qubits 0..n-1 without the closing swaps.

    The measured register value comes out bit-reversed; undo it with `bit_reverse`.
    """
    gates: List[Gate] = []
    for j in range(n):
        for i in range(j):
            gates.append(CPhase(n - 1 - i, n - 1 - j, -2 * np.pi / 2 ** (j - i + 1)))
        gates.append(H(n - 1 - j))
    return gates


def build_circuit(config: ShorConfig, include_qft: bool = True) -> Circuit:
    """Register initialization, CNOT modular exponentiation and (optionally) the inverse QFT."""
    gates = initialization_gates(config) + modexp_gates(config)
    if include_qft:
        gates += inverse_qft_gates(config.n)
    return Circuit(config.layout, tuple(gates))


def bit_reverse(value: int, n_bits: int) -> int:
    return int(format(value, f"0{n_bits}b")[::-1], 2) if n_bits else 0


def argument_marginal(
    state: TimeBinState,
    layout: QubitLayout,
    argument_qubits: Sequence[str],
    bit_reversed: bool = False,
) -> np.ndarray:
    """Probability of each argument value y, summed over every other qubit.

    Args:
        state (TimeBinState): register state
        layout (QubitLayout): layout the state was prepared with
        argument_qubits (Sequence[str]): argument qubit names, least significant first
        bit_reversed (bool, by default False): the register holds y with its bits reversed

    Returns:
        np.ndarray: 2**len(argument_qubits) entries; sums to the register's squared norm
    """
    if state.n_bins < layout.n_bins:
        e = f"State has {state.n_bins} bins; the layout needs {layout.n_bins}."
        logger.error(e)
        raise InvalidArgumentError(e)
    n = len(argument_qubits)
    positions = [layout.position(name) for name in argument_qubits]
    probs = probabilities(state)[: layout.n_bins]
    bins = np.arange(layout.n_bins)
    values = sum(((bins >> pos) & 1) << i for i, pos in enumerate(positions))
    if bit_reversed:
        values = np.array([bit_reverse(int(v), n) for v in values])
    return np.bincount(values, weights=probs, minlength=2**n)


def classical_inverse_qft(state: TimeBinState, config: ShorConfig) -> TimeBinState:
    """Apply the inverse QFT to the argument register analytically, one FFT per function value."""
    size_x, size_f = 2**config.n, 2**config.m
    amps = state.amps.copy()
    register = amps[: size_x * size_f]
    blocks = register.reshape(size_f, size_x, 2)
    register[:] = np.fft.fft(blocks, axis=1, norm="ortho").reshape(size_x * size_f, 2)
    return state.with_amps(amps)


def register_window(config: ShorConfig) -> Tuple[int, int]:
    """First and one-past-last bin of the initialized register (argument in superposition)."""
    start, _ = modexp_network(config)
    first = start << config.n
    return first, first + 2**config.n


@dataclass(frozen=True, eq=False)
class ShorRun:
    """States after each stage and the bookkeeping needed to interpret them."""

    config: ShorConfig
    qft: str
    amplitudes: str
    loss_on: bool
    states: Dict[str, TimeBinState]
    schedules: Dict[str, Schedule] = field(default_factory=dict)
    transmissions: Dict[str, float] = field(default_factory=dict)

    @property
    def final_state(self) -> TimeBinState:
        return self.states["qft"]

    @property
    def survival_probability(self) -> float:
        return self.final_state.norm_squared()

    @property
    def analytic_transmission(self) -> float:
        return float(np.prod(list(self.transmissions.values()))) if self.transmissions else 1.0

    def marginal(self, normalize: bool = True) -> np.ndarray:
        values = argument_marginal(
            self.final_state,
            self.config.layout,
            self.config.argument_qubits,
            bit_reversed=self.qft == "compiled",
        )
        total = values.sum()
        return values / total if normalize and total > 0 else values

    def stage_probabilities(self) -> Dict[str, np.ndarray]:
        """Per-bin detection probabilities after each stage, in stage order."""
        return {stage: probabilities(state) for stage, state in self.states.items()}


def run_shor(
    config: ShorConfig,
    qft: str = "compiled",
    amplitudes: str = "uniform",
    loss_table: Optional[LossTable] = None,
    loss_on: bool = False,
    wavepacket: Optional[WavePacket] = None,
    bin_width: float = DEFAULT_BIN_WIDTH_NS,
) -> ShorRun:
    """Run initialization, modular exponentiation and inverse QFT, keeping every stage.

    Stages are "init", "cnot1" (after the first CNOT), "modexp" and "qft".

    Args:
        config (ShorConfig): problem instance
        qft (str, by default "compiled"): "compiled" runs the QFT gates in the schedule,
            "classical" applies the transform analytically to the modexp output
        amplitudes (str, by default "uniform"): "uniform" prepares the register with H and X
            gates; "wavepacket" carves it out of the shaped photon with one attenuation
        loss_table (LossTable, optional): insertion losses, by default the device figures
        loss_on (bool, by default False): apply the losses
        wavepacket (WavePacket, optional): envelope for wavepacket mode; an unset center
            is placed on the middle of the register window
        bin_width (float, optional): bin duration in ns

    Returns:
        ShorRun: stage states, schedules and per-stage transmissions
    """
    if qft not in ("compiled", "classical"):
        e = f"qft must be 'compiled' or 'classical' (given {qft!r})."
        logger.error(e)
        raise InvalidArgumentError(e)
    if amplitudes not in ("uniform", "wavepacket"):
        e = f"amplitudes must be 'uniform' or 'wavepacket' (given {amplitudes!r})."
        logger.error(e)
        raise InvalidArgumentError(e)
    loss_table = loss_table or LossTable()
    layout = config.layout
    frame = Frame(layout.n_bins, bin_width)
    states: Dict[str, TimeBinState] = {}
    schedules: Dict[str, Schedule] = {}
    transmissions: Dict[str, float] = {}

    if amplitudes == "uniform":
        init = Circuit(layout, tuple(initialization_gates(config)))
        schedules["init"] = compile(init, frame, loss_table)
        vacuum = basis_state(layout, "0" * layout.n_qubits, bin_width)
        state = run_schedule(schedules["init"], vacuum, loss_on)
        transmissions["init"] = schedules["init"].transmission() if loss_on else 1.0
    else:
        wavepacket = wavepacket or WavePacket()
        first, last = register_window(config)
        if wavepacket.center is None:
            wavepacket = wavepacket.with_center((first + last) / 2 * bin_width)
        factors = np.zeros(frame.n_bins)
        factors[first:last] = 1.0
        carve = Attenuate(factors, loss_table.for_kind(PrimitiveKind.ATTENUATE))
        shaped = shaped_state(wavepacket, frame.n_bins, bin_width)
        state = carve.apply(shaped)
        # envelope mass outside the register window counts against survival
        kept = state.norm_squared() / shaped.norm_squared()
        if loss_on and carve.loss_db > 0:
            state = apply_loss(state, carve.loss_db)
        transmissions["init"] = kept * (carve.transmission() if loss_on else 1.0)
        logger.debug(f"Register window keeps {kept:.4f} of the shaped photon")
    states["init"] = state

    gates = modexp_gates(config)
    for stage, stage_gates in (("cnot1", gates[:1]), ("modexp", gates[1:])):
        schedules[stage] = compile(Circuit(layout, tuple(stage_gates)), frame, loss_table)
        state = run_schedule(schedules[stage], state, loss_on)
        transmissions[stage] = schedules[stage].transmission() if loss_on else 1.0
        states[stage] = state

    if qft == "compiled":
        qft_circuit = Circuit(layout, tuple(inverse_qft_gates(config.n)))
        schedules["qft"] = compile(qft_circuit, frame, loss_table)
        state = run_schedule(schedules["qft"], state, loss_on)
        transmissions["qft"] = schedules["qft"].transmission() if loss_on else 1.0
    else:
        state = classical_inverse_qft(state, config)
    states["qft"] = state

    run = ShorRun(config, qft, amplitudes, loss_on, states, schedules, transmissions)
    logger.info(
        f"Shor N={config.N} a={config.a}: qft={qft}, amplitudes={amplitudes}, "
        f"loss_on={loss_on}, survival {run.survival_probability:.4g}"
    )
    return run


def sample_arguments(marginal: np.ndarray, shots: int, seed=None) -> np.ndarray:
    """Draw measured argument values from a (possibly unnormalized) marginal."""
    rng = np.random.default_rng(seed)
    marginal = np.asarray(marginal, dtype=np.float64)
    return rng.choice(marginal.size, size=shots, p=marginal / marginal.sum())


def convergents(numerator: int, denominator: int) -> List[Fraction]:
    """Continued-fraction convergents of numerator/denominator, in order."""
    terms = []
    p, q = numerator, denominator
    while q:
        terms.append(p // q)
        p, q = q, p % q
    result = []
    for k in range(1, len(terms) + 1):
        value = Fraction(terms[k - 1])
        for term in reversed(terms[: k - 1]):
            value = term + 1 / value
        result.append(value)
    return result


@dataclass(frozen=True)
class SampleOutcome:
    y: int
    denominators: Tuple[int, ...]
    order: Optional[int]
    reason: Optional[str]
    factors: Optional[Tuple[int, int]] = None
    factor_failure: Optional[str] = None

    @property
    def succeeded(self) -> bool:
        return self.order is not None


def factors_from_order(a: int, r: int, N: int) -> Tuple[Optional[Tuple[int, int]], Optional[str]]:
    """Turn an order into the two factors gcd(a^(r/2) -/+ 1, N).

    Returns:
        Tuple[Optional[Tuple[int, int]], Optional[str]]: ((p, q), None) with 1 < p <= q < N,
            or (None, reason) when the order does not split N
    """
    if N < 2 or r < 1 or pow(a, r, N) != 1:
        e = f"{r} is not an order of {a} modulo {N}."
        logger.error(e)
        raise InvalidArgumentError(e)
    if r % 2:
        return None, "odd-order"
    half = pow(a, r // 2, N)
    if half == N - 1:
        return None, "trivial-square-root"
    found = {math.gcd(half - 1, N), math.gcd(half + 1, N)} - {1, N}
    if not found:
        return None, "trivial-factors"
    p = min(found)
    return (p, N // p), None


def classify_sample(y: int, n: int, a: int, N: int) -> SampleOutcome:
    """Order candidate, failure reason and factors for one measured argument value."""
    if not 0 <= y < 2**n:
        e = f"Sample {y} lies outside [0, {2**n})."
        logger.error(e)
        raise InvalidArgumentError(e)
    if y == 0:
        return SampleOutcome(y, (), None, INHERENT_FAILURE)
    denominators = tuple(f.denominator for f in convergents(y, 2**n) if f.denominator < N)
    valid = sorted({d for d in denominators if pow(a, d, N) == 1})
    if not valid:
        return SampleOutcome(y, denominators, None, NO_VALID_DENOMINATOR)
    order = valid[0]
    factors, failure = factors_from_order(a, order, N)
    return SampleOutcome(y, denominators, order, None, factors, failure)


@dataclass(frozen=True)
class OrderResult:
    samples: Tuple[int, ...]
    order: int
    factors: Optional[Tuple[int, int]]
    failure_reason: Optional[str]
    outcomes: Tuple[SampleOutcome, ...]


def extract_order(samples: Sequence[int], n: int, a: int, N: int) -> OrderResult:
    """Recover the order of a modulo N from measured argument values.

    Each sample proposes the convergent denominators of y / 2**n below N; the least one with
    a**r = 1 (mod N) over all samples wins. If no single sample yields an order, the lcm of
    every proposed denominator is tried.

    Raises:
        OrderNotFoundError: no sample (nor their lcm) gives a valid order; carries the
            per-sample outcomes
    """
    outcomes = tuple(classify_sample(int(y), n, a, N) for y in samples)
    orders = [o.order for o in outcomes if o.order is not None]
    if orders:
        order = min(orders)
    else:
        denominators = {d for o in outcomes for d in o.denominators}
        combined = reduce(math.lcm, denominators, 1)
        if not denominators or combined >= N or pow(a, combined, N) != 1:
            reasons = sorted({str(o.reason) for o in outcomes}) or ["no samples"]
            e = f"No valid order of {a} mod {N} in {len(outcomes)} samples ({', '.join(reasons)})."
            logger.error(e)
            raise OrderNotFoundError(e, outcomes)
        order = combined
    factors, failure = factors_from_order(a, order, N)
    logger.info(f"Order of {a} mod {N}: r={order}, factors {factors or failure}")
    return OrderResult(tuple(int(y) for y in samples), order, factors, failure, outcomes)
