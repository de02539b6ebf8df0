import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from memhdc.config import device_specs, load_device_config, parse_kv, typed, DEVICE_KEYS
from memhdc.device import (
    G_MAX,
    G_MIN,
    READ_SIGMA_CALIBRATED,
    ConductanceMatrix,
    ConverterSpec,
    NoiseSpec,
    PointMass,
    Uniform,
    adc_quantize,
    analog_vmm,
    calibrate_tia_gain,
    dac_encode,
    program_conductance,
    randomize_conductance,
)
from memhdc.errors import ConfigError, DimensionError

SPEC = ConverterSpec()


def replay_rng(seed, *key):
    # independent restatement of the documented stream derivation
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *key])))


class TestProgramConductance:
    def test_zero_noise_is_identity(self):
        target = np.linspace(G_MIN, G_MAX, 12).reshape(3, 4)
        out = program_conductance(target, NoiseSpec.off())
        np.testing.assert_array_equal(out.g, target)

    def test_clips_to_g_max(self):
        target = np.full((2, 2), G_MAX + 5e-6)
        out = program_conductance(target, NoiseSpec.off())
        assert np.all(out.g == G_MAX)

    def test_replays_reference_rng(self):
        rng = np.random.default_rng(3)
        target = rng.uniform(10e-6, 90e-6, size=(4, 4))
        noise = NoiseSpec(write_sigma_g=2e-6, seed=42)
        out = program_conductance(target, noise, key=(7,))
        ref = replay_rng(42, 1, 7)  # TAG_WRITE = 1, then the caller's key
        expected = [[min(max(target[i][j] + 2e-6 * ref.standard_normal(), G_MIN), G_MAX)
                     for j in range(4)] for i in range(4)]
        np.testing.assert_array_equal(out.g, np.array(expected))

    def test_rejects_oversized_tile(self):
        with pytest.raises(DimensionError):
            program_conductance(np.full((249, 4), 1e-5), NoiseSpec.off())
        with pytest.raises(DimensionError):
            program_conductance(np.full((4, 257), 1e-5), NoiseSpec.off())

    def test_rejects_bad_bounds(self):
        with pytest.raises(ConfigError):
            program_conductance(np.full((2, 2), 1e-5), NoiseSpec.off(), bounds=(5e-5, 1e-5))

    def test_bounds_hold_over_many_cells(self):
        noise = NoiseSpec(write_sigma_g=30e-6, seed=5)
        rng = np.random.default_rng(0)
        cells = 0
        for k in range(2):
            target = rng.uniform(0, 2 * G_MAX, size=(248, 256))
            g = program_conductance(target, noise, key=(k,)).g
            assert g.min() >= G_MIN and g.max() <= G_MAX
            cells += g.size
        assert cells >= 10**5

    def test_programmed_tile_is_read_only(self):
        g = program_conductance(np.full((2, 2), 1e-5), NoiseSpec.off())
        with pytest.raises(ValueError):
            g.g[0, 0] = 0.0


class TestRandomize:
    def test_point_mass(self):
        out = randomize_conductance(5, 7, PointMass(3e-5), seed=1)
        assert np.all(out.g == 3e-5)

    def test_encoder_subarray_shape(self):
        assert randomize_conductance(81, 128, seed=0).shape == (81, 128)

    def test_uniform_mean_within_three_standard_errors(self):
        out = randomize_conductance(100, 100, Uniform(G_MIN, G_MAX), seed=11)
        se = (G_MAX - G_MIN) / np.sqrt(12) / np.sqrt(out.g.size)
        assert abs(out.g.mean() - (G_MIN + G_MAX) / 2) < 3 * se

    def test_deterministic(self):
        a = randomize_conductance(10, 10, seed=9).g
        b = randomize_conductance(10, 10, seed=9).g
        c = randomize_conductance(10, 10, seed=10).g
        assert np.array_equal(a, b) and not np.array_equal(a, c)

    def test_rejects_oversized(self):
        with pytest.raises(DimensionError):
            randomize_conductance(300, 10)


class TestDac:
    def test_zero_code(self):
        assert dac_encode([0], SPEC)[0] == 0.0

    def test_full_code(self):
        assert dac_encode([255], SPEC)[0] == pytest.approx(0.141, rel=1e-15)

    def test_mid_code(self):
        assert dac_encode([128], SPEC)[0] == pytest.approx(0.070776, abs=1e-6)

    @pytest.mark.parametrize("code", [-1, 256])
    def test_out_of_range(self, code):
        with pytest.raises(ConfigError):
            dac_encode([code], SPEC)


class TestAnalogVmm:
    def test_zero_input(self):
        cond = randomize_conductance(6, 4, seed=0)
        assert np.all(analog_vmm(np.zeros(6), cond, NoiseSpec.off(), SPEC) == 0)

    def test_single_cell_ohms_law(self):
        cond = ConductanceMatrix(np.array([[50e-6]]))
        spec = ConverterSpec(tia_gain=1e4)
        assert analog_vmm([0.1], cond, NoiseSpec.off(), spec)[0] == pytest.approx(0.05, rel=1e-12)

    def test_matches_triple_loop(self):
        rng = np.random.default_rng(4)
        g = rng.uniform(G_MIN, G_MAX, size=(5, 3))
        v = rng.uniform(0, 0.141, size=5)
        out = analog_vmm(v, ConductanceMatrix(g), NoiseSpec.off(), SPEC)
        expected = [SPEC.tia_gain * sum(v[i] * g[i][j] for i in range(5)) for j in range(3)]
        np.testing.assert_allclose(out, expected, rtol=1e-12, atol=0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            analog_vmm(np.zeros(4), randomize_conductance(5, 3), NoiseSpec.off(), SPEC)

    def test_read_noise_replays_stream(self):
        cond = randomize_conductance(3, 4, seed=0)
        v = np.array([0.1, 0.0, 0.141])
        noise = NoiseSpec(read_sigma_v=1e-3, write_sigma_g=0, seed=8)
        out = analog_vmm(v, cond, noise, SPEC, key=(2, 3))
        ref = replay_rng(8, 2, 2, 3)  # TAG_READ = 2
        clean = SPEC.tia_gain * (v @ cond.g)
        expected = [clean[j] + 1e-3 * ref.standard_normal() for j in range(4)]
        np.testing.assert_allclose(out, expected, rtol=1e-14)

    def test_noise_envelope(self):
        cond = ConductanceMatrix(np.zeros((1, 250)), g_min=0.0)
        noise = NoiseSpec(read_sigma_v=READ_SIGMA_CALIBRATED, write_sigma_g=0, seed=1)
        out = analog_vmm(np.zeros((400, 1)), cond, noise, SPEC)
        assert out.size == 10**5
        assert np.mean(np.abs(out) > 2.77e-3) <= 0.004


class TestAdc:
    def test_zero(self):
        assert adc_quantize([0.0], SPEC)[0] == 0

    def test_saturates(self):
        assert np.all(adc_quantize([SPEC.adc_fullscale, 10 * SPEC.adc_fullscale], SPEC) == 255)

    def test_half_scale_rounds_away_from_zero(self):
        assert adc_quantize([SPEC.adc_fullscale / 2], SPEC)[0] == 128

    def test_negative_clamps_to_zero(self):
        assert adc_quantize([-1.0], SPEC)[0] == 0


@given(st.floats(0, 1), st.floats(0, 1))
def test_adc_monotone(a, b):
    lo, hi = sorted([a, b])
    assert adc_quantize([lo], SPEC)[0] <= adc_quantize([hi], SPEC)[0]


@given(st.integers(0, 255), st.integers(0, 255))
def test_dac_monotone(a, b):
    lo, hi = sorted([a, b])
    assert dac_encode([lo], SPEC)[0] <= dac_encode([hi], SPEC)[0]


@given(arrays(np.int64, st.tuples(st.integers(1, 4), st.integers(1, 30)), elements=st.integers(0, 255)),
       st.integers(1, 20), st.integers(0, 2**32))
def test_zero_noise_chain_equals_affine_formula(codes, cols, seed):
    cond = randomize_conductance(codes.shape[1], cols, seed=seed)
    out = analog_vmm(dac_encode(codes, SPEC), cond, NoiseSpec.off(), SPEC)
    volts = codes / 255 * SPEC.dac_fullscale
    exact = SPEC.tia_gain * np.einsum("bi,ij->bj", volts, cond.g)
    np.testing.assert_allclose(out, exact, rtol=1e-12, atol=1e-300)


def test_determinism_across_runs():
    noise = NoiseSpec(read_sigma_v=1e-3, write_sigma_g=2e-6, seed=17)
    runs = []
    for _ in range(3):
        cond = program_conductance(np.full((8, 8), 5e-5), noise)
        runs.append(adc_quantize(analog_vmm(np.full(8, 0.1), cond, noise, SPEC, key=(1,)), SPEC))
    assert all(np.array_equal(runs[0], r) for r in runs[1:])


def test_calibrate_tia_gain():
    spec = calibrate_tia_gain(2e-3, SPEC)
    assert spec.tia_gain * 2e-3 == pytest.approx(0.8 * SPEC.adc_fullscale)


def test_converter_spec_validation():
    with pytest.raises(ConfigError):
        ConverterSpec(v_high=0.0, v_low=0.0)
    with pytest.raises(ConfigError):
        NoiseSpec(read_sigma_v=-1)


def test_device_config_file(tmp_path):
    path = tmp_path / "dev.cfg"
    path.write_text(
        "# converters\n"
        "dac_bits = 8\nadc_bits = 10\ndac_fullscale_v = 0.2\nadc_fullscale_v = 0.5\n"
        "tia_gain = 2000\nv_high = 0.2\nv_low = 0.01\n"
        "read_sigma_v = 0.001  # 1 mV\nwrite_sigma_g = 2e-6\ng_min = 2e-6\ng_max = 80e-6\nseed = 4\n")
    conv, noise, bounds = load_device_config(path)
    assert conv == ConverterSpec(8, 0.2, 10, 0.5, 2000.0, 0.2, 0.01)
    assert noise == NoiseSpec(0.001, 2e-6, 4)
    assert bounds == (2e-6, 80e-6)


def test_config_errors():
    with pytest.raises(ConfigError):
        parse_kv("no equals sign")
    with pytest.raises(ConfigError):
        parse_kv("a = 1\na = 2")
    with pytest.raises(ConfigError):
        typed({"bogus": "1"}, DEVICE_KEYS)
    with pytest.raises(ConfigError):
        typed({"dac_bits": "eight"}, DEVICE_KEYS)
    with pytest.raises(ConfigError):
        device_specs({"g_min": 1e-4, "g_max": 1e-5})
