import argparse
import json
import logging
import sys
import time
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from timebin_shor._config import RunConfig, load_config
from timebin_shor.compiler import (
    CNOT,
    Circuit,
    Frame,
    H,
    Ry,
    Rz,
    compile,
    random_circuit,
    read_circuit,
    run_schedule,
    validate,
)
from timebin_shor.detection import (
    frame_edges,
    histogram,
    sample_events,
    shaped_state,
    write_histogram_csv,
)
from timebin_shor.errors import (
    InvalidArgumentError,
    OrderNotFoundError,
    ResourceLimitError,
    ScheduleInfeasibleError,
    TimeBinError,
)
from timebin_shor.shor import (
    ShorConfig,
    ShorRun,
    bit_reverse,
    classify_sample,
    extract_order,
    load_encoding,
    run_shor,
)
from timebin_shor.state import QubitLayout, TimeBinState, bloch_vector, probabilities

logger = logging.getLogger(__name__)

PACKAGE_NAME = "timebin_shor"
LOG_FILE_NAME = "timebin-activity.log"
MAX_BENCH_BINS = 2**16
BENCH_DEPTH = 20
PEAK_THRESHOLD = 1e-6

_installed_handlers: List[logging.Handler] = []

EPILOG = """\
Settings are resolved in this order, later ones winning:
  1. built-in defaults,
  2. the YAML file given with --config (flat keys, e.g. `loss_phase_db: 2.0`),
  3. command-line flags.
The effective settings are written to <output-dir>/run_config.yaml.

Exit status: 0 success, 2 invalid input, 3 infeasible schedule, 4 resource limit.
"""


class PackageFilter(logging.Filter):
    def __init__(self, package_name: str):
        self.package_name = package_name

    def filter(self, record):
        return record.name.split(".")[0] == self.package_name


def setup_logging(log_dir: str = "logs", verbose: bool = False) -> None:
    """Log everything from this package to a rotating file, and warnings to stderr."""
    root = logging.getLogger()
    for handler in _installed_handlers:
        root.removeHandler(handler)
        handler.close()
    _installed_handlers.clear()

    Path(log_dir).mkdir(parents=True, exist_ok=True)
    formatter = logging.Formatter(
        "%(asctime)s | %(filename)s:%(lineno)d | %(funcName)s | %(levelname)s | %(message)s "
    )
    file_handler = RotatingFileHandler(
        Path(log_dir) / LOG_FILE_NAME, maxBytes=1000000, backupCount=10
    )
    file_handler.setLevel(logging.DEBUG)
    file_handler.setFormatter(formatter)
    file_handler.addFilter(PackageFilter(PACKAGE_NAME))

    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setLevel(logging.DEBUG if verbose else logging.WARNING)
    stream_handler.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    stream_handler.addFilter(PackageFilter(PACKAGE_NAME))

    for handler in (file_handler, stream_handler):
        root.addHandler(handler)
        _installed_handlers.append(handler)
    root.setLevel(logging.DEBUG)


def _write_json(path: Path, payload: Dict[str, Any]) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")


def _prepare_output(config: RunConfig) -> Path:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.yaml").write_text(config.to_yaml(), encoding="utf-8")
    return out


def _input_state(config: RunConfig, frame: Frame) -> TimeBinState:
    if config.amplitudes == "wavepacket":
        return shaped_state(config.wavepacket(), frame.n_bins, frame.bin_width)
    amps = np.zeros((frame.n_bins, 2), dtype=np.complex128)
    amps[0, 0] = 1.0
    return TimeBinState(amps, frame.bin_width)


def _write_samples(out: Path, state: TimeBinState, config: RunConfig):
    events = sample_events(state, config.detector(), config.shots, config.seed)
    events.to_csv(out / "events.csv")
    edges = frame_edges(state.n_bins, state.bin_width)
    write_histogram_csv(out / "histogram.csv", edges, histogram(events, edges))
    logger.info(f"Sampled {config.shots} shots, {events.n_detected} detected")
    return events


def cmd_run(circuit_file: str, config: RunConfig) -> int:
    """Compile a circuit file, run it on the configured input photon and write the results.

    Writes probabilities.json and, when shots > 0, events.csv and histogram.csv.
    """
    circuit = read_circuit(circuit_file)
    frame = Frame(config.n_bins or circuit.layout.n_bins, config.bin_width_ns)
    schedule = compile(circuit, frame, config.loss_table())
    report = validate(schedule)
    if not report.ok:
        first = report.diagnostics[0]
        e = f"instruction {first.instruction_index}: {first.message}"
        logger.error(e)
        raise ScheduleInfeasibleError(e)

    state_in = _input_state(config, frame)
    state_out = run_schedule(schedule, state_in, loss_on=config.loss)
    out = _prepare_output(config)
    probs = probabilities(state_out)
    _write_json(
        out / "probabilities.json",
        {
            "probabilities": [{"bin": b, "prob": float(p)} for b, p in enumerate(probs)],
            "metadata": {
                "circuit": str(circuit_file),
                "n_qubits": circuit.n_qubits,
                "n_bins": frame.n_bins,
                "bin_width_ns": frame.bin_width,
                "n_primitives": len(schedule),
                "n_passes": schedule.n_passes,
                "amplitudes": config.amplitudes,
                "loss": config.loss,
                "survival_probability": state_out.norm_squared() / state_in.norm_squared(),
                "analytic_transmission": schedule.transmission() if config.loss else 1.0,
            },
        },
    )
    if config.shots > 0:
        _write_samples(out, state_out, config)
    return 0


def _argument_of_bin(shor_config: ShorConfig, n_bins: int, bit_reversed: bool) -> np.ndarray:
    values = np.arange(n_bins) % 2**shor_config.n
    if bit_reversed:
        values = np.array([bit_reverse(int(v), shor_config.n) for v in values])
    return values


def _write_stage_histograms(path: Path, run: ShorRun) -> None:
    """One row per bin: its register bits and the probability after each stage."""
    stages = run.stage_probabilities()
    layout = run.config.layout
    lines = ["bin,bits," + ",".join(stages)]
    for b in range(layout.n_bins):
        values = ",".join(f"{probs[b]:.10f}" for probs in stages.values())
        lines.append(f"{b},{layout.bit_string(b)},{values}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")


def cmd_shor(
    config: RunConfig, N: int = 15, a: int = 2, encoding_file: Optional[str] = None
) -> int:
    """Run the compiled order-finding demo.

    Writes shor_report.json, order_finding.csv and stage_histograms.csv.
    """
    encoding = load_encoding(encoding_file) if encoding_file else None
    shor_config = ShorConfig(N, a, function_encoding=encoding)
    if config.n_bins is not None and config.n_bins != shor_config.layout.n_bins:
        e = (
            f"The order-finding register fixes the frame at {shor_config.layout.n_bins} bins "
            f"(n_bins {config.n_bins} was requested)."
        )
        logger.error(e)
        raise InvalidArgumentError(e)
    run = run_shor(
        shor_config,
        qft=config.qft,
        amplitudes=config.amplitudes,
        loss_table=config.loss_table(),
        loss_on=config.loss,
        wavepacket=config.wavepacket(),
        bin_width=config.bin_width_ns,
    )
    out = _prepare_output(config)
    marginal = run.marginal(normalize=True)
    size = 2**shor_config.n

    counts: Optional[np.ndarray] = None
    if config.shots > 0:
        events = _write_samples(out, run.final_state, config)
        lookup = _argument_of_bin(shor_config, run.final_state.n_bins, run.qft == "compiled")
        samples = lookup[events.detected_bins()]
        counts = np.bincount(samples, minlength=size)
    else:
        samples = np.flatnonzero(marginal > PEAK_THRESHOLD)

    try:
        result = extract_order(samples.tolist(), shor_config.n, a, N)
        order, factors, failure = result.order, result.factors, result.failure_reason
    except OrderNotFoundError as err:
        order, factors, failure = None, None, str(err)

    outcomes = [classify_sample(y, shor_config.n, a, N) for y in range(size)]
    _write_json(
        out / "shor_report.json",
        {
            "N": N,
            "a": a,
            "n": shor_config.n,
            "m": shor_config.m,
            "qft": config.qft,
            "amplitudes": config.amplitudes,
            "loss": config.loss,
            "survival_probability": run.survival_probability,
            "analytic_transmission": run.analytic_transmission,
            "stage_survival": {k: s.norm_squared() for k, s in run.states.items()},
            "marginal": [float(p) for p in marginal],
            "shots": config.shots,
            "counts": None if counts is None else [int(c) for c in counts],
            "order": order,
            "factors": list(factors) if factors else None,
            "failure_reason": failure,
            "outcomes": [
                {
                    "y": o.y,
                    "denominators": list(o.denominators),
                    "order": o.order,
                    "reason": o.reason,
                    "factors": list(o.factors) if o.factors else None,
                    "factor_failure": o.factor_failure,
                }
                for o in outcomes
            ],
        },
    )
    lines = ["y,y_bits,probability,counts,order,reason"]
    for y, outcome in enumerate(outcomes):
        lines.append(
            f"{y},{format(y, f'0{shor_config.n}b')},{marginal[y]:.10f},"
            f"{'' if counts is None else int(counts[y])},"
            f"{'' if outcome.order is None else outcome.order},{outcome.reason or ''}"
        )
    (out / "order_finding.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_stage_histograms(out / "stage_histograms.csv", run)
    logger.info(f"Order finding for N={N}, a={a}: r={order}, factors={factors}")
    return 0


def _run_single(circuit: Circuit, config: RunConfig, input_bits: str) -> TimeBinState:
    frame = Frame(config.n_bins or circuit.layout.n_bins, config.bin_width_ns)
    amps = np.zeros((frame.n_bins, 2), dtype=np.complex128)
    amps[int(input_bits, 2), 0] = 1.0
    schedule = compile(circuit, frame, config.loss_table())
    return run_schedule(schedule, TimeBinState(amps, frame.bin_width), loss_on=config.loss)


def cmd_characterize(target: str, steps: int, config: RunConfig) -> int:
    """CNOT truth table, or Bloch-vector sweeps of Ry from |0> and Rz from |+>."""
    if steps < 2:
        e = f"steps must be at least 2 (given {steps})."
        logger.error(e)
        raise InvalidArgumentError(e)
    out = _prepare_output(config)

    if target == "cnot":
        layout = QubitLayout.from_names(["q0", "q1"])
        circuit = Circuit(layout, (CNOT(1, 0),))
        labels = [layout.bit_string(b) for b in range(layout.n_bins)]
        lines = ["input," + ",".join(labels)]
        table = []
        for label in labels:
            probs = probabilities(_run_single(circuit, config, label))[: layout.n_bins]
            row = probs / probs.sum()
            table.append(row)
            lines.append(label + "," + ",".join(f"{p:.10f}" for p in row))
        (out / "cnot_truth_table.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.info(f"CNOT truth table:\n{np.round(np.array(table), 6)}")
        return 0

    layout = QubitLayout.from_names(["q0"])
    lines = ["angle,sx,sy,sz"]
    for angle in np.linspace(0, 2 * np.pi, steps):
        if target == "ry-sweep":
            circuit = Circuit(layout, (Ry(0, angle),))
        elif target == "rz-sweep":
            circuit = Circuit(layout, (H(0), Rz(0, angle)))
        else:
            e = f"Unknown characterization target {target!r}."
            logger.error(e)
            raise InvalidArgumentError(e)
        sx, sy, sz = bloch_vector(_run_single(circuit, config, "0"))
        lines.append(f"{angle:.10f},{sx:.10f},{sy:.10f},{sz:.10f}")
    name = target.replace("-", "_") + ".csv"
    (out / name).write_text("\n".join(lines) + "\n", encoding="utf-8")
    logger.info(f"Wrote {steps} points of the {target} to {out / name}")
    return 0


def cmd_bench(n_bins: int, output_dir: str = "results", seed: int = 0) -> int:
    """Compile and run a depth-20 random circuit on an n_bins frame and report the timing."""
    if n_bins > MAX_BENCH_BINS:
        e = f"Benchmarks are capped at {MAX_BENCH_BINS} bins (given {n_bins})."
        logger.error(e)
        raise ResourceLimitError(e)
    if n_bins < 2 or n_bins & (n_bins - 1):
        e = f"n_bins must be a power of two >= 2 (given {n_bins})."
        logger.error(e)
        raise InvalidArgumentError(e)
    n_qubits = n_bins.bit_length() - 1
    circuit = random_circuit(n_qubits, BENCH_DEPTH, np.random.default_rng(seed))

    start = time.perf_counter()
    schedule = compile(circuit, Frame(n_bins))
    compiled = time.perf_counter()
    amps = np.zeros((n_bins, 2), dtype=np.complex128)
    amps[0, 0] = 1.0
    state = run_schedule(schedule, TimeBinState(amps))
    finished = time.perf_counter()

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {
        "n_bins": n_bins,
        "n_qubits": n_qubits,
        "depth": BENCH_DEPTH,
        "n_primitives": len(schedule),
        "compile_s": compiled - start,
        "run_s": finished - compiled,
        "wall_time_s": finished - start,
        "peak_state_bytes": int(state.amps.nbytes),
    }
    _write_json(out / "bench_report.json", report)
    print(json.dumps(report))
    return 0


def _config_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    keys = (
        "n_bins",
        "bin_width_ns",
        "loss",
        "loss_phase_db",
        "loss_rotate_db",
        "loss_delay_db",
        "loss_attenuate_db",
        "amplitudes",
        "coherence_time_ns",
        "wavepacket_center_ns",
        "efficiency",
        "jitter_sigma_ns",
        "time_resolution_ns",
        "dark_rate_hz",
        "shots",
        "seed",
        "qft",
        "output_dir",
    )
    return {key: getattr(args, key, None) for key in keys}


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the --config file, then command-line flags."""
    config = load_config(args.config) if args.config else RunConfig()
    return config.update(**_config_overrides(args))


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--log-dir", default="logs", help="directory for the activity log")
    common.add_argument("-v", "--verbose", action="store_true", help="echo debug logs to stderr")

    settings = argparse.ArgumentParser(add_help=False)
    group = settings.add_argument_group("run settings (override the config file)")
    group.add_argument("--config", help="YAML file of run settings")
    group.add_argument("--output-dir", dest="output_dir")
    group.add_argument("--n-bins", dest="n_bins", type=int)
    group.add_argument("--bin-width", dest="bin_width_ns", type=float, help="ns")
    group.add_argument("--loss", action=argparse.BooleanOptionalAction, default=None)
    group.add_argument("--loss-phase-db", dest="loss_phase_db", type=float)
    group.add_argument("--loss-rotate-db", dest="loss_rotate_db", type=float)
    group.add_argument("--loss-delay-db", dest="loss_delay_db", type=float)
    group.add_argument("--loss-attenuate-db", dest="loss_attenuate_db", type=float)
    group.add_argument("--amplitudes", choices=("uniform", "wavepacket"))
    group.add_argument("--coherence-time", dest="coherence_time_ns", type=float, help="ns")
    group.add_argument("--wavepacket-center", dest="wavepacket_center_ns", type=float, help="ns")
    group.add_argument("--efficiency", type=float)
    group.add_argument("--jitter-sigma", dest="jitter_sigma_ns", type=float, help="ns")
    group.add_argument("--time-resolution", dest="time_resolution_ns", type=float, help="ns")
    group.add_argument("--dark-rate", dest="dark_rate_hz", type=float, help="counts/s")
    group.add_argument("--shots", type=int)
    group.add_argument("--seed", type=int)
    group.add_argument("--qft", choices=("compiled", "classical"))

    parser = argparse.ArgumentParser(
        prog="timebin",
        description="Single-photon time-bin loop simulator and compiled Shor-15 demo.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str, parents) -> argparse.ArgumentParser:
        return sub.add_parser(
            name,
            help=help_text,
            parents=parents,
            epilog=EPILOG,
            formatter_class=argparse.RawDescriptionHelpFormatter,
        )

    run_parser = add("run", "compile and run a circuit file", [common, settings])
    run_parser.add_argument("circuit_file")
    run_parser.set_defaults(handler=lambda args: cmd_run(args.circuit_file, resolve_config(args)))

    shor_parser = add("shor", "compiled order finding and factoring", [common, settings])
    shor_parser.add_argument("-N", "--modulus", type=int, default=15)
    shor_parser.add_argument("-a", "--base", type=int, default=2)
    shor_parser.add_argument("--encoding", help="YAML table residue -> function-register bits")
    shor_parser.set_defaults(
        handler=lambda args: cmd_shor(resolve_config(args), args.modulus, args.base, args.encoding)
    )

    char_parser = add("characterize", "gate characterization", [common, settings])
    char_parser.add_argument("target", choices=("cnot", "ry-sweep", "rz-sweep"))
    char_parser.add_argument("--steps", type=int, default=16)
    char_parser.set_defaults(
        handler=lambda args: cmd_characterize(args.target, args.steps, resolve_config(args))
    )

    bench_parser = add("bench", "time a random circuit on a large frame", [common])
    bench_parser.add_argument("--n-bins", dest="n_bins", type=int, default=4096)
    bench_parser.add_argument("--output-dir", dest="output_dir", default="results")
    bench_parser.add_argument("--seed", type=int, default=0)
    bench_parser.set_defaults(
        handler=lambda args: cmd_bench(args.n_bins, args.output_dir, args.seed)
    )
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exit_request:
        return int(exit_request.code or 0)
    setup_logging(args.log_dir, args.verbose)
    logger.debug(f"Command line: {list(argv) if argv is not None else sys.argv[1:]}")
    try:
        return args.handler(args)
    except TimeBinError as err:
        logger.error(f"{type(err).__name__}: {err}")
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code


def run():
    sys.exit(main())
