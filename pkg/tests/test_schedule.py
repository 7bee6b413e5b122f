import logging

import numpy as np
import pytest
from pytest import LogCaptureFixture

from timebin_shor import __version__
from timebin_shor.compiler import Frame, Schedule, run_schedule, validate
from timebin_shor.errors import InvalidArgumentError
from timebin_shor.primitives import Attenuate, Delay, PhasePattern, PolRotate
from timebin_shor.state import Polarization, probabilities, uniform_state

logger = logging.getLogger(__name__)


def test_version():
    assert __version__ == "0.1.0"


def single_pass(frame: Frame, *primitives) -> Schedule:
    return Schedule(frame, primitives, (0,), (None,), (0,))


class TestFrame:
    def test_for_qubits(self):
        frame = Frame.for_qubits(5)
        assert frame.n_bins == 32
        assert frame.duration == pytest.approx(400.0)

    def test_bad_frames(self):
        with pytest.raises(InvalidArgumentError):
            Frame(0)
        with pytest.raises(InvalidArgumentError):
            Frame(4, bin_width=-1.0)

    def test_matches(self):
        assert Frame(4).matches(uniform_state(4))
        assert not Frame(8).matches(uniform_state(4))
        assert not Frame(4, 10.0).matches(uniform_state(4))


class TestSchedule:
    def test_pass_bookkeeping(self):
        frame = Frame(4)
        primitives = (PhasePattern(np.zeros(4)), Delay(1), PhasePattern(np.ones(4)))
        schedule = Schedule(frame, primitives, (0, 2), (None, None), (0, 3))
        assert len(schedule) == 3
        assert schedule.n_passes == 2
        assert schedule.pass_ends() == (1, 2)
        assert [len(p) for p in schedule.passes()] == [2, 1]
        assert schedule.couplers() == []

    @pytest.mark.parametrize(
        "starts",
        [(1,), (0, 0), (0, 5)],
    )
    def test_malformed_partition(self, starts):
        primitives = (PhasePattern(np.zeros(4)), PhasePattern(np.zeros(4)))
        with pytest.raises(InvalidArgumentError):
            Schedule(Frame(4), primitives, starts, (None,) * len(starts), (0,) * len(starts))

    def test_metadata_length(self):
        with pytest.raises(InvalidArgumentError):
            Schedule(Frame(4), (PhasePattern(np.zeros(4)),), (0,), (), (0,))

    def test_transmission(self):
        schedule = single_pass(
            Frame(4), PhasePattern(np.zeros(4), loss_db=2.0), Delay(1, loss_db=1.0)
        )
        assert schedule.transmission() == pytest.approx(10 ** (-0.3))


class TestRunSchedule:
    def test_frame_mismatch(self, caplog: LogCaptureFixture):
        schedule = single_pass(Frame(8), PhasePattern(np.zeros(8)))
        with pytest.raises(InvalidArgumentError):
            run_schedule(schedule, uniform_state(4))
        assert "does not match" in caplog.text

    def test_loss_switch(self):
        schedule = single_pass(Frame(4), PhasePattern(np.zeros(4), loss_db=10.0))
        state = uniform_state(4)
        assert run_schedule(schedule, state).norm_squared() == pytest.approx(1.0)
        lossy = run_schedule(schedule, state, loss_on=True)
        assert lossy.norm_squared() == pytest.approx(0.1)
        assert lossy.norm_squared() == pytest.approx(schedule.transmission())

    def test_runs_in_order(self):
        schedule = single_pass(
            Frame(4),
            PolRotate(np.pi / 2, [0]),
            Delay(2),
            PolRotate(-np.pi / 2, [2]),
        )
        amps = np.zeros((4, 2), dtype=complex)
        amps[0, 0] = 1.0
        out = run_schedule(schedule, uniform_state(4).with_amps(amps))
        np.testing.assert_allclose(probabilities(out), [0, 0, 1, 0])
        np.testing.assert_allclose(out.rail(Polarization.V), 0)


class TestValidate:
    def test_clean_schedule(self):
        schedule = single_pass(
            Frame(4),
            PolRotate(np.pi / 2, [0, 1]),
            Delay(2),
            PolRotate(np.pi / 4, [2, 3]),
            Delay(2, advance=True),
            PolRotate(-np.pi / 2, [0, 1]),
        )
        report = validate(schedule)
        assert report.ok
        assert bool(report)

    def test_overflow(self, caplog: LogCaptureFixture):
        schedule = single_pass(Frame(4), PolRotate(np.pi / 2, [2, 3]), Delay(2))
        report = validate(schedule)
        kinds = [d.kind for d in report.diagnostics]
        assert "overflow" in kinds
        assert report.diagnostics[0].instruction_index == 1
        assert "out of the 4-bin frame" in caplog.text

    def test_underflow(self):
        schedule = single_pass(Frame(4), PolRotate(np.pi / 2, [0]), Delay(1, advance=True))
        assert [d.kind for d in validate(schedule).diagnostics][0] == "underflow"

    def test_empty_rail_can_be_delayed(self):
        schedule = single_pass(Frame(4), Delay(3), Delay(3, advance=True))
        assert validate(schedule).ok

    def test_rail_collision(self):
        schedule = single_pass(Frame(4), PolRotate(np.pi / 2, [0]))
        report = validate(schedule)
        assert not report
        assert report.diagnostics[-1].kind == "rail-collision"

    def test_masked_bins_are_empty(self):
        schedule = single_pass(
            Frame(4),
            Attenuate([1, 1, 0, 0]),
            PolRotate(np.pi / 2, [2, 3]),
            Delay(2),
        )
        assert not any(d.kind == "overflow" for d in validate(schedule).diagnostics)

    def test_frame_mismatch(self):
        schedule = single_pass(Frame(4), PhasePattern(np.zeros(8)))
        assert validate(schedule).diagnostics[0].kind == "frame-mismatch"

    def test_gate_window(self):
        schedule = single_pass(Frame(4), PolRotate(0.1, [5]))
        assert validate(schedule).diagnostics[0].kind == "gate-window"

    def test_other_frame(self):
        schedule = single_pass(Frame(8), PhasePattern(np.zeros(8)))
        report = validate(schedule, Frame(4))
        assert [d.kind for d in report.diagnostics] == ["frame-mismatch"]
