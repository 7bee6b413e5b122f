import dataclasses
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Union

import yaml  # type:ignore[import]

from timebin_shor.detection import DetectorModel, WavePacket
from timebin_shor.errors import ConfigError
from timebin_shor.primitives import LossTable

logger = logging.getLogger(__name__)

_FLOAT_KEYS = (
    "bin_width_ns",
    "loss_phase_db",
    "loss_rotate_db",
    "loss_delay_db",
    "loss_attenuate_db",
    "coherence_time_ns",
    "efficiency",
    "jitter_sigma_ns",
    "time_resolution_ns",
    "dark_rate_hz",
)
_CHOICES = {"amplitudes": ("uniform", "wavepacket"), "qft": ("compiled", "classical")}


@dataclass(frozen=True)
class RunConfig:
    """Every knob of a simulation run. The field names are the keys of the YAML config file.

    Args:
        n_bins (Optional[int], by default None): frame length; None uses 2**n_qubits
        bin_width_ns (float, by default 12.5): bin duration
        loss (bool, by default True): apply insertion losses
        loss_phase_db (float, by default 2.0): phase modulator insertion loss
        loss_rotate_db (float, by default 3.5): polarization switch insertion loss
        loss_delay_db (float, by default 0.0): fiber delay loss
        loss_attenuate_db (float, by default 0.0): amplitude modulator insertion loss
        amplitudes (str, by default "uniform"): "uniform" or "wavepacket" input photon
        coherence_time_ns (float, by default 148.0): wave packet 1/e^2 width
        wavepacket_center_ns (Optional[float], by default None): envelope peak; None centers it
            on the frame (on the register window for the Shor demo)
        efficiency (float, by default 0.15): detector efficiency
        jitter_sigma_ns (float, by default 0.0637): detector timing jitter
        time_resolution_ns (float, by default 0.1): digitizer resolution
        dark_rate_hz (float, by default 0.0): detector dark-count rate
        shots (int, by default 0): heralded photons to sample; 0 skips sampling
        seed (int, by default 0): random seed for sampling
        qft (str, by default "compiled"): "compiled" or "classical" inverse QFT (Shor demo)
        output_dir (str, by default "results"): where results are written
    """

    n_bins: Optional[int] = None
    bin_width_ns: float = 12.5
    loss: bool = True
    loss_phase_db: float = 2.0
    loss_rotate_db: float = 3.5
    loss_delay_db: float = 0.0
    loss_attenuate_db: float = 0.0
    amplitudes: str = "uniform"
    coherence_time_ns: float = 148.0
    wavepacket_center_ns: Optional[float] = None
    efficiency: float = 0.15
    jitter_sigma_ns: float = 0.0637
    time_resolution_ns: float = 0.1
    dark_rate_hz: float = 0.0
    shots: int = 0
    seed: int = 0
    qft: str = "compiled"
    output_dir: str = "results"

    @classmethod
    def from_dict(cls, values: Mapping[str, Any]) -> "RunConfig":
        """Validate a flat key/value mapping and build a config from it (missing keys keep
        their defaults)."""
        validate_config(values)
        cleaned = dict(values)
        for key in _FLOAT_KEYS:
            if key in cleaned:
                cleaned[key] = float(cleaned[key])
        if cleaned.get("wavepacket_center_ns") is not None:
            cleaned["wavepacket_center_ns"] = float(cleaned["wavepacket_center_ns"])
        return cls(**cleaned)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def update(self, **overrides: Any) -> "RunConfig":
        """Return a copy with the given keys replaced; None values are ignored."""
        merged = self.to_dict()
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig.from_dict(merged)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "RunConfig":
        try:
            values = yaml.safe_load(text)
        except yaml.YAMLError as err:
            e = f"Config is not valid YAML: {err}"
            logger.error(e)
            raise ConfigError([e]) from err
        if values is None:
            values = {}
        if not isinstance(values, dict):
            e = "Config must be a flat mapping of keys to values."
            logger.error(e)
            raise ConfigError([e])
        return cls.from_dict(values)

    def loss_table(self) -> LossTable:
        return LossTable(
            self.loss_phase_db, self.loss_rotate_db, self.loss_delay_db, self.loss_attenuate_db
        )

    def detector(self) -> DetectorModel:
        return DetectorModel(
            self.efficiency, self.jitter_sigma_ns, self.time_resolution_ns, self.dark_rate_hz
        )

    def wavepacket(self) -> WavePacket:
        return WavePacket(self.coherence_time_ns, self.wavepacket_center_ns)

    def __repr__(self) -> str:
        s = "RunConfig:\n"
        for key, value in self.to_dict().items():
            s += f"  {key}: {value}\n"
        return s


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_config(values: Mapping[str, Any]) -> None:
    """Check every key of a config mapping, raising one ConfigError that lists all problems."""
    errors = []
    known = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(values) - known)
    if unknown:
        e = f"Unknown config key(s) {unknown}. Known keys: {sorted(known)}"
        logger.error(e)
        errors.append(e)

    for key in _FLOAT_KEYS:
        if key in values and not _is_number(values[key]):
            e = f"{key} should be a number (given {values[key]!r})."
            logger.error(e)
            errors.append(e)
        elif key in values and values[key] < 0:
            e = f"{key} should be non-negative (given {values[key]})."
            logger.error(e)
            errors.append(e)

    for key in ("bin_width_ns", "coherence_time_ns", "time_resolution_ns"):
        if _is_number(values.get(key)) and values[key] <= 0:
            e = f"{key} should be positive (given {values[key]})."
            logger.error(e)
            errors.append(e)

    if _is_number(values.get("efficiency")) and values["efficiency"] > 1:
        e = f"efficiency should lie in [0, 1] (given {values['efficiency']})."
        logger.error(e)
        errors.append(e)

    n_bins = values.get("n_bins")
    if n_bins is not None and (
        not isinstance(n_bins, int) or isinstance(n_bins, bool) or n_bins < 1
    ):
        e = f"n_bins should be a positive integer or null (given {n_bins!r})."
        logger.error(e)
        errors.append(e)

    center = values.get("wavepacket_center_ns")
    if center is not None and not _is_number(center):
        e = f"wavepacket_center_ns should be a number or null (given {center!r})."
        logger.error(e)
        errors.append(e)

    for key in ("shots", "seed"):
        if key in values and (
            not isinstance(values[key], int) or isinstance(values[key], bool) or values[key] < 0
        ):
            e = f"{key} should be a non-negative integer (given {values[key]!r})."
            logger.error(e)
            errors.append(e)

    if "loss" in values and not isinstance(values["loss"], bool):
        e = f"loss should be true or false (given {values['loss']!r})."
        logger.error(e)
        errors.append(e)

    for key, choices in _CHOICES.items():
        if key in values and values[key] not in choices:
            e = f"{key} should be one of {list(choices)} (given {values[key]!r})."
            logger.error(e)
            errors.append(e)

    if "output_dir" in values and not isinstance(values["output_dir"], str):
        e = f"output_dir should be a string (given {values['output_dir']!r})."
        logger.error(e)
        errors.append(e)

    if errors:
        raise ConfigError(errors)


def load_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        e = f"Cannot read config file {path}: {err}"
        logger.error(e)
        raise ConfigError([e]) from err
    config = RunConfig.from_yaml(text)
    logger.debug(f"Config loaded from {path}:\n{config}")
    return config
