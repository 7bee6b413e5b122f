"""Exceptions raised across the simulator, compiler and Shor pipeline.

Every exception carries the process exit status the CLI should use when it escapes a
subcommand (0 success, 2 user error, 3 infeasible schedule, 4 resource limit).
"""
from typing import Any, List, Optional, Sequence


class TimeBinError(Exception):
    exit_code: int = 1


class InvalidArgumentError(TimeBinError, ValueError):
    exit_code = 2


class ParseError(InvalidArgumentError):
    def __init__(self, message: str, line_number: Optional[int] = None) -> None:
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ConfigError(InvalidArgumentError):
    def __init__(self, problems: Sequence[str]) -> None:
        self.problems: List[str] = list(problems)
        super().__init__("Invalid configuration: " + "; ".join(self.problems))


class UnsupportedInstanceError(InvalidArgumentError):
    exit_code = 2


class FrameOverflowError(TimeBinError):
    """Amplitude would leave the frame. Always a scheduling bug, never a physics event."""

    exit_code = 3


class ScheduleInfeasibleError(TimeBinError):
    exit_code = 3

    def __init__(self, message: str, gate_index: Optional[int] = None) -> None:
        if gate_index is not None:
            message = f"gate {gate_index}: {message}"
        super().__init__(message)
        self.gate_index = gate_index


class ResourceLimitError(TimeBinError):
    exit_code = 4


class OrderNotFoundError(TimeBinError):
    def __init__(self, message: str, outcomes: Sequence[Any] = ()) -> None:
        super().__init__(message)
        self.outcomes = list(outcomes)
