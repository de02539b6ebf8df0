import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from memhdc.device import ConverterSpec, NoiseSpec, PointMass, adc_quantize, analog_calls, make_rng
from memhdc.encoder import (
    N_TRIGRAMS,
    SPACE,
    TRIGRAM_DIM,
    EncoderConfig,
    SoftwareEncoder,
    all_trigram_features,
    build_encoder,
    encode_sample,
    extract_sign,
    fit_clip_T,
    normalize_text,
    project_trigram,
    quantize_hv,
    read_hv_file,
    symbols_to_text,
    trigram_features,
    trigram_ids,
    write_hv_file,
)
from memhdc.errors import ConfigError, DimensionError

SPEC = ConverterSpec()


@pytest.fixture(scope="module")
def quiet():
    return build_encoder(0, noise=NoiseSpec.off())


@pytest.fixture(scope="module")
def noisy():
    return build_encoder(0, noise=NoiseSpec(seed=0))


def one_hot_trigram(a, b, c):
    tv = np.zeros(TRIGRAM_DIM, dtype=np.uint8)
    tv[[a, 27 + b, 54 + c]] = 1
    return tv


class TestNormalize:
    def test_example(self):
        assert symbols_to_text(normalize_text("Hello, World!")) == "hello world"

    def test_non_letters_collapse(self):
        assert symbols_to_text(normalize_text("a1b")) == "a b"
        assert symbols_to_text(normalize_text("  Ça--va ?  ")) == "a va"

    def test_indices(self):
        assert normalize_text("az b").tolist() == [0, 25, SPACE, 1]

    @given(st.text())
    def test_alphabet_closed(self, text):
        idx = normalize_text(text)
        assert np.all((idx >= 0) & (idx <= SPACE))
        out = symbols_to_text(idx)
        assert out == out.strip() and "  " not in out


class TestTrigrams:
    def test_abc(self):
        tv = trigram_features(normalize_text("abc"))
        assert tv.shape == (1, 81)
        assert np.flatnonzero(tv[0]).tolist() == [0, 28, 56]

    def test_space_edges(self):
        tv = trigram_features(normalize_text("a b"))
        assert np.flatnonzero(tv[0]).tolist() == [0, 27 + 26, 54 + 1]

    def test_count(self):
        assert len(trigram_features(normalize_text("abcd"))) == 2

    @given(st.lists(st.integers(0, 26), min_size=0, max_size=60))
    def test_count_law_and_one_hot(self, symbols):
        tv = trigram_features(symbols)
        assert len(tv) == max(0, len(symbols) - 2)
        if len(tv):
            blocks = tv.reshape(len(tv), 3, 27)
            assert np.all(blocks.sum(axis=2) == 1)

    def test_all_trigram_table_matches_ids(self):
        table = all_trigram_features()
        assert table.shape == (N_TRIGRAMS, 81)
        symbols = normalize_text("the quick brown fox")
        np.testing.assert_array_equal(table[trigram_ids(symbols)], trigram_features(symbols))


class TestProjection:
    def test_encoder_layout(self, quiet):
        assert quiet.plan.cores == [0, 1, 2, 3]
        assert quiet.matrix.shape == (81, 512)

    def test_noise_free_matches_brute_force(self, quiet):
        tv = one_hot_trigram(7, 4, 26)
        codes = project_trigram(tv, quiet)
        g = quiet.matrix
        spec = quiet.spec
        expected = []
        for j in range(512):
            current = sum((spec.v_high if tv[i] else spec.v_low) * g[i, j] for i in range(81))
            expected.append(adc_quantize([spec.tia_gain * current], spec)[0])
        np.testing.assert_array_equal(codes, expected)

    def test_zero_probe_reads_pure_noise(self, noisy):
        codes = project_trigram(np.zeros(81, dtype=np.uint8), noisy, key=(5,))
        expected = np.concatenate([
            adc_quantize(noisy.noise.read_sigma_v * make_rng(noisy.noise.seed, 2, 5, k).standard_normal(128), SPEC)
            for k in range(4)])
        np.testing.assert_array_equal(codes, expected)

    def test_repeatable_without_noise(self, quiet):
        tv = one_hot_trigram(1, 2, 3)
        np.testing.assert_array_equal(project_trigram(tv, quiet, key=(1,)), project_trigram(tv, quiet, key=(2,)))

    def test_calibration_keeps_trigrams_below_saturation(self, quiet):
        codes = project_trigram(all_trigram_features(), quiet)
        assert codes.max() <= round(0.8 * 255) + 1

    def test_wrong_width(self, quiet):
        with pytest.raises(DimensionError):
            project_trigram(np.zeros(80), quiet)

    def test_sign_bit_outside_adc(self):
        with pytest.raises(ConfigError):
            build_encoder(0, EncoderConfig(sign_bit_position=8))


class TestExtractSign:
    def test_examples(self):
        assert extract_sign([4], 2).tolist() == [1]
        assert extract_sign([3], 2).tolist() == [-1]
        assert extract_sign([255], 7).tolist() == [1]
        assert extract_sign([0], 0).tolist() == [-1]

    def test_bad_position(self):
        with pytest.raises(ConfigError):
            extract_sign([1], 8)

    @given(st.integers(0, 255), st.integers(0, 7))
    def test_matches_binary_string(self, code, bit):
        assert extract_sign([code], bit)[0] == (1 if format(code, "08b")[7 - bit] == "1" else -1)


class TestEncodeSample:
    def test_single_trigram(self, quiet):
        symbols = normalize_text("abc")
        expected = extract_sign(project_trigram(trigram_features(symbols), quiet), 2)[0]
        np.testing.assert_array_equal(encode_sample(symbols, quiet), expected)

    def test_five_trigrams_oracle(self, quiet):
        symbols = normalize_text("hello w")
        assert len(symbols) == 7
        total = [0] * 512
        for start in range(5):
            a, b, c = (int(s) for s in symbols[start:start + 3])
            codes = project_trigram(one_hot_trigram(a, b, c), quiet)
            for j in range(512):
                total[j] += 1 if (int(codes[j]) >> 2) & 1 else -1
        assert encode_sample(symbols, quiet).tolist() == total

    def test_too_short(self, quiet):
        with pytest.raises(DimensionError):
            encode_sample(normalize_text("ab"), quiet)

    def test_accumulated_bound(self, quiet, markov_corpus):
        for sample in markov_corpus.samples[:40]:
            symbols = normalize_text(sample.text)
            hv = encode_sample(symbols, quiet)
            n = len(symbols) - 2
            assert np.all(np.abs(hv) <= n) and np.all((hv - n) % 2 == 0)


def test_flip_rate_falls_with_bit_significance(noisy):
    """Two reads of the same trigrams: the LSB flips far more often than bit 2."""
    rng = np.random.default_rng(0)
    ids = rng.integers(0, N_TRIGRAMS, size=20)
    tv = all_trigram_features()[ids]
    first = project_trigram(tv, noisy, key=(1,))
    second = project_trigram(tv, noisy, key=(2,))
    assert first.size >= 10**4
    rate = {b: np.mean(extract_sign(first, b) != extract_sign(second, b)) for b in (0, 2)}
    assert rate[2] < rate[0]


class TestSoftwareEncoder:
    def test_cancelling_trigrams(self):
        # rows of 'a' sit above the block mean, rows of 'b' below it
        g = np.full((81, 8), 50e-6)
        for block in range(3):
            g[27 * block + 0] = 70e-6
            g[27 * block + 1] = 30e-6
        enc = SoftwareEncoder(g, SPEC)
        symbols = normalize_text("abab")
        np.testing.assert_array_equal(enc.sign_hvs(symbols), [[1] * 8, [-1] * 8])
        np.testing.assert_array_equal(enc.encode_sample(symbols), np.zeros(8))

    def test_table_is_centered_projection_sign(self, quiet):
        enc = SoftwareEncoder.from_state(quiet)
        volts = np.where(all_trigram_features() > 0, SPEC.v_high, SPEC.v_low)
        proj = volts @ quiet.matrix
        centered = proj - proj.mean(axis=0)
        np.testing.assert_array_equal(enc.table, np.where(centered >= -1e-12 * np.abs(proj.mean(axis=0)), 1, -1))

    def test_makes_no_analog_calls(self, quiet):
        before = analog_calls.count
        enc = SoftwareEncoder.from_state(quiet)
        enc.encode_sample(normalize_text("no analog calls here"))
        assert analog_calls.count == before

    def test_point_mass_matrix_is_all_positive(self):
        state = build_encoder(0, EncoderConfig(hv_dim=16, col_block=16), distribution=PointMass(5e-5),
                              noise=NoiseSpec.off())
        enc = SoftwareEncoder.from_state(state)
        assert np.all(enc.table == 1)


class TestQuantize:
    def test_endpoints(self):
        assert quantize_hv([-10, 10, 0, 17], 10, SPEC).tolist() == [0, 255, 128, 255]

    def test_bad_clip(self):
        with pytest.raises(ConfigError):
            quantize_hv([1], 0, SPEC)

    @given(st.lists(st.integers(-500, 500), min_size=1, max_size=50), st.integers(1, 300))
    def test_range_and_monotone(self, hv, clip):
        q = quantize_hv(hv, clip, SPEC)
        assert q.min() >= 0 and q.max() <= 255
        order = np.argsort(hv, kind="stable")
        assert np.all(np.diff(q[order]) >= 0)

    def test_fit_clip_T(self):
        acc = np.array([[-3, 3], [3, -3]])
        assert fit_clip_T(acc) == 6


def test_hv_file_round_trip(tmp_path):
    hvs = np.array([[1, -2, 3], [0, 5, -7]])
    write_hv_file(tmp_path / "x.tsv", ["a:1", "b:2"], [0, 1], hvs, "accumulated")
    ids, labels, back, stage = read_hv_file(tmp_path / "x.tsv")
    assert ids == ["a:1", "b:2"] and labels.tolist() == [0, 1] and stage == "accumulated"
    np.testing.assert_array_equal(back, hvs)


def test_quantized_hvs_reproducible(noisy):
    symbols = normalize_text("reproducible hypervectors")
    a = quantize_hv(encode_sample(symbols, noisy, key=(3,)), 8, noisy.spec)
    b = quantize_hv(encode_sample(symbols, noisy, key=(3,)), 8, noisy.spec)
    np.testing.assert_array_equal(a, b)
