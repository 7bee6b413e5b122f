import logging
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
from pytest import LogCaptureFixture

from timebin_shor import __version__
from timebin_shor.compiler import CNOT, Circuit, H, X, unitary_of
from timebin_shor.detection import WavePacket
from timebin_shor.errors import (
    ConfigError,
    InvalidArgumentError,
    OrderNotFoundError,
    UnsupportedInstanceError,
)
from timebin_shor.primitives import LossTable
from timebin_shor.shor import (
    INHERENT_FAILURE,
    NO_VALID_DENOMINATOR,
    ShorConfig,
    argument_marginal,
    bit_reverse,
    build_circuit,
    classical_inverse_qft,
    classify_sample,
    convergents,
    extract_order,
    factors_from_order,
    initialization_gates,
    inverse_qft_gates,
    load_encoding,
    mod_exp,
    modexp_gates,
    modexp_network,
    register_window,
    run_shor,
    sample_arguments,
)
from timebin_shor.state import QubitLayout, probabilities, uniform_state

logger = logging.getLogger(__name__)


def test_version():
    assert __version__ == "0.1.0"


@pytest.fixture
def config() -> ShorConfig:
    return ShorConfig(15, 2)


class TestShorConfig:
    def test_defaults(self, config: ShorConfig):
        assert config.n == 3 and config.m == 2
        assert config.layout.names_by_position == ("x0", "x1", "x2", "f0", "f1")
        assert config.residues() == [1, 2, 4, 8, 1, 2, 4, 8]
        assert config.encode(1) == 2

    @pytest.mark.parametrize("N, a", [(15, 1), (15, 15), (15, 5), (2, 1)])
    def test_bad_instances(self, N: int, a: int):
        with pytest.raises(InvalidArgumentError):
            ShorConfig(N, a)

    def test_no_builtin_encoding(self, caplog: LogCaptureFixture):
        with pytest.raises(UnsupportedInstanceError):
            ShorConfig(15, 11)
        assert "No built-in encoding" in caplog.text

    def test_custom_encoding(self):
        config = ShorConfig(15, 11, function_encoding={1: "00", 11: "01"})
        assert config.encode(11) == 1

    def test_encoding_must_be_injective(self):
        with pytest.raises(UnsupportedInstanceError, match="injective"):
            ShorConfig(15, 4, function_encoding={1: "10", 4: "10"})

    def test_encoding_must_cover_residues(self):
        with pytest.raises(UnsupportedInstanceError, match="no encoding"):
            ShorConfig(15, 2, function_encoding={1: "10", 2: "00"})

    def test_mod_exp(self):
        assert mod_exp(7, 4, 15) == 1
        with pytest.raises(InvalidArgumentError):
            mod_exp(2, -1, 15)

    def test_mod_exp_matches_repeated_multiplication(self):
        for n in range(2, 65):
            for a in range(n):
                value = 1 % n
                for x in range(65):
                    assert mod_exp(a, x, n) == value
                    value = value * a % n


class TestCircuit:
    def test_network_for_base_two(self, config: ShorConfig):
        start, cnots = modexp_network(config)
        assert start == 2
        # x0 flips f1, x1 flips f0, x2 does nothing
        assert cnots == [(0, 4), (1, 3)]
        assert modexp_gates(config) == [CNOT(0, 4), CNOT(1, 3)]

    def test_initialization(self, config: ShorConfig):
        assert initialization_gates(config) == [H(0), H(1), H(2), X(4)]
        assert register_window(config) == (16, 24)

    @pytest.mark.parametrize("a", [2, 4, 7])
    def test_every_builtin_base_is_wired_exactly(self, a: int):
        config = ShorConfig(15, a)
        circuit = build_circuit(config, include_qft=False)
        column = unitary_of(circuit)[:, 0]
        x = np.arange(8)
        expected_bins = x + 8 * np.array([config.encode(pow(a, int(v), 15)) for v in x])
        np.testing.assert_allclose(np.abs(column[expected_bins]) ** 2, 1 / 8, atol=1e-12)

    def test_non_affine_encoding(self):
        encoding = {1: "000", 2: "001", 4: "010", 8: "100", 16: "011", 11: "101"}
        config = ShorConfig(21, 2, m=3, function_encoding=encoding)
        with pytest.raises(UnsupportedInstanceError, match="not affine"):
            modexp_network(config)

    def test_inverse_qft_outputs_reversed_bits(self):
        n = 3
        circuit = Circuit(QubitLayout.from_names(["a", "b", "c"]), tuple(inverse_qft_gates(n)))
        u = unitary_of(circuit)
        x, y = np.meshgrid(np.arange(8), np.arange(8))
        dft = np.exp(-2j * np.pi * x * y / 8) / np.sqrt(8)
        reverse = [bit_reverse(v, n) for v in range(8)]
        np.testing.assert_allclose(u[reverse, :], dft, atol=1e-12)

    def test_bit_reverse(self):
        assert bit_reverse(1, 3) == 4
        assert bit_reverse(6, 3) == 3
        assert bit_reverse(0, 0) == 0


class TestRunShor:
    def test_stage_states(self, config: ShorConfig):
        run = run_shor(config)
        init = probabilities(run.states["init"])
        np.testing.assert_allclose(init[16:24], 1 / 8, atol=1e-12)
        assert init.sum() == pytest.approx(1.0)
        modexp = probabilities(run.states["modexp"])
        assert set(np.flatnonzero(modexp > 1e-12)) == {16, 1, 26, 11, 20, 5, 30, 15}

    def test_stages_run_in_order(self, config: ShorConfig):
        run = run_shor(config)
        assert list(run.states) == ["init", "cnot1", "modexp", "qft"]
        # x0 flips f1 first
        cnot1 = probabilities(run.states["cnot1"])
        assert set(np.flatnonzero(cnot1 > 1e-12)) == {16, 1, 18, 3, 20, 5, 22, 7}
        stages = run.stage_probabilities()
        assert list(stages) == list(run.states)
        for probs in stages.values():
            assert probs.shape == (32,)
            assert probs.sum() == pytest.approx(1.0)

    @pytest.mark.parametrize("qft", ["compiled", "classical"])
    def test_ideal_marginal(self, config: ShorConfig, qft: str):
        marginal = run_shor(config, qft=qft).marginal()
        np.testing.assert_allclose(marginal, [0.25, 0, 0.25, 0, 0.25, 0, 0.25, 0], atol=1e-10)

    def test_losses_scale_but_keep_shape(self, config: ShorConfig):
        ideal = run_shor(config).marginal()
        lossy = run_shor(config, loss_table=LossTable(), loss_on=True)
        np.testing.assert_allclose(lossy.marginal(), ideal, atol=1e-10)
        assert lossy.survival_probability == pytest.approx(lossy.analytic_transmission)
        assert lossy.survival_probability < 1e-3

    def test_wavepacket_losses_count_the_register_window(self, config: ShorConfig):
        ideal = run_shor(config, qft="classical", amplitudes="wavepacket").marginal()
        lossy = run_shor(
            config, qft="classical", amplitudes="wavepacket", loss_table=LossTable(), loss_on=True
        )
        np.testing.assert_allclose(lossy.marginal(), ideal, atol=1e-10)
        assert lossy.transmissions["init"] == pytest.approx(lossy.states["init"].norm_squared())
        assert lossy.survival_probability == pytest.approx(lossy.analytic_transmission)
        assert lossy.survival_probability < lossy.states["init"].norm_squared()

    def test_wavepacket_mode(self, config: ShorConfig):
        run = run_shor(config, qft="classical", amplitudes="wavepacket")
        marginal = run.marginal()
        assert marginal[::2].sum() > 0.95
        # the register window holds about three quarters of the envelope
        assert 0.7 < run.states["init"].norm_squared() < 0.8

    def test_wavepacket_center_can_be_set(self, config: ShorConfig):
        run = run_shor(
            config, qft="classical", amplitudes="wavepacket", wavepacket=WavePacket(148.0, 200.0)
        )
        init = probabilities(run.states["init"])
        assert np.argmax(init) == 16

    def test_bad_modes(self, config: ShorConfig):
        with pytest.raises(InvalidArgumentError):
            run_shor(config, qft="fast")
        with pytest.raises(InvalidArgumentError):
            run_shor(config, amplitudes="flat")

    def test_marginal_needs_the_register(self, config: ShorConfig):
        with pytest.raises(InvalidArgumentError):
            argument_marginal(uniform_state(8), config.layout, config.argument_qubits)

    def test_classical_qft_keeps_norm(self, config: ShorConfig):
        state = run_shor(config).states["modexp"]
        assert classical_inverse_qft(state, config).norm_squared() == pytest.approx(1.0)

    def test_sample_arguments(self):
        samples = sample_arguments(np.array([0, 2.0, 0, 2.0]), 1000, seed=1)
        assert set(samples.tolist()) == {1, 3}

    def test_half_of_the_samples_find_the_order(self, config: ShorConfig):
        samples = sample_arguments(run_shor(config).marginal(), 10000, seed=11)
        succeeded = {y: classify_sample(y, 3, 2, 15).succeeded for y in range(8)}
        rate = np.mean([succeeded[int(y)] for y in samples])
        assert rate == pytest.approx(0.5, abs=0.02)


class TestOrderFinding:
    def test_convergents(self):
        assert convergents(3, 8) == [Fraction(0), Fraction(1, 2), Fraction(1, 3), Fraction(3, 8)]
        assert convergents(6, 8) == [Fraction(0), Fraction(1), Fraction(3, 4)]

    @pytest.mark.parametrize("y", [2, 6])
    def test_good_peaks(self, y: int):
        outcome = classify_sample(y, 3, 2, 15)
        assert outcome.order == 4
        assert outcome.factors == (3, 5)
        assert outcome.succeeded

    def test_peak_at_half(self):
        outcome = classify_sample(4, 3, 2, 15)
        assert outcome.reason == NO_VALID_DENOMINATOR
        assert outcome.denominators == (1, 2)
        assert not outcome.succeeded

    def test_zero_is_an_inherent_failure(self):
        assert classify_sample(0, 3, 2, 15).reason == INHERENT_FAILURE

    def test_odd_sample_gives_multiple_of_order(self):
        outcome = classify_sample(1, 3, 2, 15)
        assert outcome.order == 8
        assert outcome.factors is None
        assert outcome.factor_failure == "trivial-factors"

    def test_sample_range(self):
        with pytest.raises(InvalidArgumentError):
            classify_sample(8, 3, 2, 15)

    def test_factors_from_order(self):
        assert factors_from_order(2, 4, 15) == ((3, 5), None)
        assert factors_from_order(7, 4, 15) == ((3, 5), None)
        assert factors_from_order(4, 2, 15) == ((3, 5), None)
        assert factors_from_order(14, 2, 15) == (None, "trivial-square-root")
        assert factors_from_order(2, 3, 7) == (None, "odd-order")
        with pytest.raises(InvalidArgumentError):
            factors_from_order(2, 3, 15)

    def test_extract_order(self):
        result = extract_order([2, 4, 6, 0, 4], 3, 2, 15)
        assert result.order == 4
        assert result.factors == (3, 5)
        assert result.failure_reason is None
        assert len(result.outcomes) == 5

    def test_extract_order_from_lcm(self):
        # 3/8 proposes 2 and 3; neither is the order of 3 mod 7 but their lcm is
        result = extract_order([3], 3, 3, 7)
        assert result.outcomes[0].reason == NO_VALID_DENOMINATOR
        assert result.order == 6
        assert result.failure_reason == "trivial-square-root"

    def test_no_order(self, caplog: LogCaptureFixture):
        with pytest.raises(OrderNotFoundError) as err:
            extract_order([0, 4, 4], 3, 2, 15)
        assert len(err.value.outcomes) == 3
        assert "No valid order" in caplog.text

    def test_no_samples(self):
        with pytest.raises(OrderNotFoundError):
            extract_order([], 3, 2, 15)


class TestLoadEncoding:
    def test_load(self, tmp_path: Path):
        path = tmp_path / "encoding.yaml"
        path.write_text('1: "10"\n11: "01"\n')
        assert load_encoding(path) == {1: "10", 11: "01"}

    def test_unquoted_bits(self, tmp_path: Path):
        path = tmp_path / "encoding.yaml"
        path.write_text("1: 10\n11: 01\n")
        with pytest.raises(ConfigError) as err:
            load_encoding(path)
        assert len(err.value.problems) == 2

    def test_not_a_mapping(self, tmp_path: Path):
        path = tmp_path / "encoding.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError):
            load_encoding(path)

    def test_bad_yaml(self, tmp_path: Path):
        path = tmp_path / "encoding.yaml"
        path.write_text("1: [\n")
        with pytest.raises(ConfigError):
            load_encoding(path)

    def test_missing_file(self, tmp_path: Path, caplog: LogCaptureFixture):
        with pytest.raises(ConfigError):
            load_encoding(tmp_path / "missing.yaml")
        assert "Cannot read encoding file" in caplog.text
