"""Photon wave packet, detector model and time-tagged event sampling."""
import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, NamedTuple, Optional, Sequence, Union

import numpy as np

from timebin_shor.errors import InvalidArgumentError
from timebin_shor.state import DEFAULT_BIN_WIDTH_NS, Polarization, TimeBinState, probabilities

logger = logging.getLogger(__name__)

COHERENCE_TIME_NS = 148.0
MIN_COVERAGE = 0.99

SeedLike = Union[None, int, np.random.SeedSequence, np.random.Generator]


@dataclass(frozen=True)
class WavePacket:
    """Double-exponential intensity envelope (2/T) * exp(-4|t - center| / T).

    T is the 1/e^2 full width of the intensity. The envelope integrates to 1.

    Args:
        coherence_time (float, by default 148.0): T in ns
        center (float, optional): peak time in ns; None centers it on the frame
    """

    coherence_time: float = COHERENCE_TIME_NS
    center: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.coherence_time > 0:
            e = f"coherence_time must be positive (given {self.coherence_time})."
            logger.error(e)
            raise InvalidArgumentError(e)

    def with_center(self, center: float) -> "WavePacket":
        return WavePacket(self.coherence_time, center)

    def intensity(self, t: np.ndarray, center: float) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return (2 / self.coherence_time) * np.exp(-4 * np.abs(t - center) / self.coherence_time)

    def cumulative(self, t: np.ndarray, center: float) -> np.ndarray:
        """Fraction of the envelope that arrives before t."""
        u = np.asarray(t, dtype=np.float64) - center
        return 0.5 + np.sign(u) * 0.5 * (1 - np.exp(-4 * np.abs(u) / self.coherence_time))


def shaped_state(
    wavepacket: WavePacket,
    n_bins: int,
    bin_width: float = DEFAULT_BIN_WIDTH_NS,
    allow_truncation: bool = False,
) -> TimeBinState:
    """Photon whose bin amplitudes follow the wave packet, H polarized.

    Args:
        wavepacket (WavePacket): temporal envelope
        n_bins (int): frame length in bins
        bin_width (float, optional): bin duration in ns
        allow_truncation (bool, by default False): accept frames holding < 99% of the envelope

    Raises:
        InvalidArgumentError: bad widths, or a frame that truncates the envelope

    Returns:
        TimeBinState: amplitude sqrt(bin integral), renormalized over the frame
    """
    if n_bins < 1 or not bin_width > 0:
        e = f"Need n_bins >= 1 and bin_width > 0 (given {n_bins}, {bin_width})."
        logger.error(e)
        raise InvalidArgumentError(e)
    center = wavepacket.center if wavepacket.center is not None else n_bins * bin_width / 2
    edges = np.arange(n_bins + 1) * bin_width
    bin_mass = np.diff(wavepacket.cumulative(edges, center))
    coverage = float(bin_mass.sum())
    if coverage < MIN_COVERAGE and not allow_truncation:
        e = (
            f"The {n_bins * bin_width} ns frame holds only {coverage:.4f} of the wave packet "
            f"(need {MIN_COVERAGE}); widen the frame or allow truncation."
        )
        logger.error(e)
        raise InvalidArgumentError(e)
    if coverage <= 0:
        e = "The wave packet has no weight inside the frame."
        logger.error(e)
        raise InvalidArgumentError(e)
    amps = np.zeros((n_bins, 2), dtype=np.complex128)
    amps[:, Polarization.H.index] = np.sqrt(bin_mass / coverage)
    logger.debug(f"Shaped {n_bins}-bin state centered at {center} ns, coverage {coverage:.4f}")
    return TimeBinState(amps, bin_width)


@dataclass(frozen=True)
class DetectorModel:
    """Single-photon detector and time digitizer.

    Args:
        efficiency (float, by default 0.15): click probability for a photon that arrives
        jitter_sigma (float, by default 0.0637): Gaussian timing jitter in ns (150 ps FWHM)
        time_resolution (float, by default 0.1): digitizer bin in ns
        dark_rate (float, by default 0.0): dark counts per second
    """

    efficiency: float = 0.15
    jitter_sigma: float = 0.0637
    time_resolution: float = 0.1
    dark_rate: float = 0.0

    def __post_init__(self) -> None:
        problems = []
        if not 0 <= self.efficiency <= 1:
            problems.append(f"efficiency must lie in [0, 1] (given {self.efficiency})")
        if self.jitter_sigma < 0:
            problems.append(f"jitter_sigma must be non-negative (given {self.jitter_sigma})")
        if not self.time_resolution > 0:
            problems.append(f"time_resolution must be positive (given {self.time_resolution})")
        if self.dark_rate < 0:
            problems.append(f"dark_rate must be non-negative (given {self.dark_rate})")
        if problems:
            e = "; ".join(problems)
            logger.error(e)
            raise InvalidArgumentError(e)

    @classmethod
    def ideal(cls) -> "DetectorModel":
        return cls(efficiency=1.0, jitter_sigma=0.0, time_resolution=0.1, dark_rate=0.0)

    def dark_probability(self, duration_ns: float) -> float:
        """Probability of at least one dark count during a frame."""
        return float(1 - np.exp(-self.dark_rate * duration_ns * 1e-9))


class EventRecord(NamedTuple):
    shot: int
    detected: bool
    arrival_ns: float
    bin: int


@dataclass(frozen=True, eq=False)
class EventLog:
    """One record per shot, stored column-wise. Undetected shots have arrival NaN, bin -1."""

    shot: np.ndarray
    detected: np.ndarray
    arrival_ns: np.ndarray
    bin: np.ndarray
    dark: np.ndarray

    def __len__(self) -> int:
        return int(self.shot.size)

    def __iter__(self) -> Iterator[EventRecord]:
        for shot, detected, arrival, b in zip(self.shot, self.detected, self.arrival_ns, self.bin):
            yield EventRecord(int(shot), bool(detected), float(arrival), int(b))

    @property
    def n_detected(self) -> int:
        return int(np.count_nonzero(self.detected))

    def detected_bins(self) -> np.ndarray:
        return self.bin[self.detected]

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["shot", "detected", "arrival_ns", "bin"])
            for record in self:
                arrival = "" if np.isnan(record.arrival_ns) else f"{record.arrival_ns:.4f}"
                writer.writerow([record.shot, int(record.detected), arrival, record.bin])

    @classmethod
    def concatenate(cls, logs: Sequence["EventLog"]) -> "EventLog":
        """Merge partition logs in order, renumbering shots consecutively."""
        offsets = np.cumsum([0] + [len(log) for log in logs[:-1]])
        return cls(
            np.concatenate([log.shot + offset for log, offset in zip(logs, offsets)]),
            np.concatenate([log.detected for log in logs]),
            np.concatenate([log.arrival_ns for log in logs]),
            np.concatenate([log.bin for log in logs]),
            np.concatenate([log.dark for log in logs]),
        )


def _digitize(arrival: np.ndarray, detector: DetectorModel, state: TimeBinState) -> tuple:
    arrival = np.round(arrival / detector.time_resolution) * detector.time_resolution
    arrival = np.clip(arrival, 0.0, state.duration)
    bins = np.minimum((arrival // state.bin_width).astype(np.int64), state.n_bins - 1)
    return arrival, bins


def sample_events(
    state: TimeBinState, detector: DetectorModel, shots: int, seed: SeedLike = None
) -> EventLog:
    """Monte-Carlo one heralded photon per shot through the detector.

    Args:
        state (TimeBinState): photon arriving at the detector; its norm deficit is loss
        detector (DetectorModel): detector and digitizer
        shots (int): number of heralded photons
        seed (SeedLike, optional): integer seed, SeedSequence or Generator

    Returns:
        EventLog: per-shot records
    """
    if shots < 1:
        e = f"shots must be at least 1 (given {shots})."
        logger.error(e)
        raise InvalidArgumentError(e)
    rng = np.random.default_rng(seed)
    probs = probabilities(state)
    norm = float(probs.sum())

    detected = rng.random(shots) < norm * detector.efficiency
    n_hits = int(np.count_nonzero(detected))
    arrival = np.full(shots, np.nan)
    bins = np.full(shots, -1, dtype=np.int64)
    if n_hits:
        true_bins = rng.choice(state.n_bins, size=n_hits, p=probs / norm)
        times = (true_bins + 0.5) * state.bin_width
        if detector.jitter_sigma > 0:
            times = times + rng.normal(0.0, detector.jitter_sigma, n_hits)
        arrival[detected], bins[detected] = _digitize(times, detector, state)

    dark = np.zeros(shots, dtype=bool)
    p_dark = detector.dark_probability(state.duration)
    if p_dark > 0:
        dark = ~detected & (rng.random(shots) < p_dark)
        n_dark = int(np.count_nonzero(dark))
        if n_dark:
            times = rng.uniform(0.0, state.duration, n_dark)
            arrival[dark], bins[dark] = _digitize(times, detector, state)
        detected = detected | dark

    logger.debug(
        f"Sampled {shots} shots: {int(np.count_nonzero(detected))} detected "
        f"({int(np.count_nonzero(dark))} dark)"
    )
    return EventLog(np.arange(shots), detected, arrival, bins, dark)


def sample_events_partitioned(
    state: TimeBinState,
    detector: DetectorModel,
    shots: int,
    seed: Optional[int] = None,
    n_partitions: int = 4,
    max_workers: Optional[int] = None,
) -> EventLog:
    """Split the shots over independently seeded streams, sample them on a thread pool and
    merge the partitions back in shot order. Reproducible for a fixed seed and partition count.
    """
    if n_partitions < 1:
        e = f"n_partitions must be at least 1 (given {n_partitions})."
        logger.error(e)
        raise InvalidArgumentError(e)
    sizes = [len(part) for part in np.array_split(np.arange(shots), n_partitions) if len(part)]
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        jobs = zip(sizes, children)
        logs = list(pool.map(lambda job: sample_events(state, detector, *job), jobs))
    return EventLog.concatenate(logs)


def detection_probabilities(state: TimeBinState, detector: DetectorModel) -> np.ndarray:
    """Per-shot probability of a click assigned to each bin (photon plus dark counts)."""
    probs = probabilities(state)
    photon = detector.efficiency * probs
    no_photon = 1 - float(photon.sum())
    return photon + no_photon * detector.dark_probability(state.duration) / state.n_bins


def frame_edges(n_bins: int, bin_width: float = DEFAULT_BIN_WIDTH_NS) -> np.ndarray:
    return np.arange(n_bins + 1) * bin_width


def histogram(events: EventLog, bin_edges: Sequence[float]) -> np.ndarray:
    """Count detected arrivals per [edge_i, edge_i+1) interval; undetected shots are skipped."""
    edges = np.asarray(bin_edges, dtype=np.float64)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        e = "Histogram edges must be at least two strictly increasing values."
        logger.error(e)
        raise InvalidArgumentError(e)
    counts, _ = np.histogram(events.arrival_ns[events.detected], bins=edges)
    return counts


def write_histogram_csv(path: Union[str, Path], bin_edges: Sequence[float], counts) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["bin_start_ns", "bin_end_ns", "count"])
        for start, end, count in zip(bin_edges[:-1], bin_edges[1:], counts):
            writer.writerow([f"{start:.4f}", f"{end:.4f}", int(count)])
