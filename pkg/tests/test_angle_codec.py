import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sinesteer.angle_codec import (
    CodecConfig,
    bin_index,
    clamp_angle,
    decode,
    decode_expected,
    encode,
    encode_bins,
    fit_phase,
)
from sinesteer.errors import (
    AngleOutOfRange,
    DegenerateWave,
    InvalidConfig,
    InvalidDistribution,
    PhaseOutOfRange,
)

from oracles import grid_search_decode, scalar_wave

DEFAULT = CodecConfig()


class TestConfig:
    def test_defaults(self):
        assert DEFAULT.n_neurons == 95 and DEFAULT.phi_max == 190.0
        assert DEFAULT.bin_width == pytest.approx(4.0)

    @pytest.mark.parametrize("n", [0, 3, 2.5])
    def test_rejects_small_or_fractional_n(self, n):
        with pytest.raises(InvalidConfig):
            CodecConfig(n, 190)

    @pytest.mark.parametrize("phi_max", [0, -1, math.inf])
    def test_rejects_bad_phi_max(self, phi_max):
        with pytest.raises(InvalidConfig):
            CodecConfig(95, phi_max)


class TestEncode:
    def test_zero_angle_first_neuron_is_zero(self):
        assert encode(0.0)[0] == 0.0

    def test_phi_max_first_neuron_is_minus_one(self):
        for n in (5, 16, 95):
            cfg = CodecConfig(n, 190)
            assert encode(190.0, cfg)[0] == pytest.approx(-1.0, abs=1e-15)

    def test_small_example_against_scalar_oracle(self):
        cfg = CodecConfig(5, 90)
        expected = scalar_wave(90.0, 5, 90.0)
        np.testing.assert_allclose(expected, [-1, 0, 1, 0, -1], atol=1e-12)
        np.testing.assert_allclose(encode(90.0, cfg), expected, atol=1e-12)

    def test_matches_scalar_oracle_default(self):
        for angle in (-190.0, -37.5, 0.0, 12.25, 190.0):
            np.testing.assert_allclose(encode(angle), scalar_wave(angle, 95, 190.0), atol=1e-13)

    def test_out_of_range(self):
        with pytest.raises(AngleOutOfRange):
            encode(190.0001)
        with pytest.raises(AngleOutOfRange):
            encode(float("nan"))

    @given(st.floats(-190, 190))
    def test_values_bounded(self, angle):
        y = encode(angle)
        assert y.shape == (95,)
        assert np.all(np.abs(y) <= 1.0)


class TestDecode:
    def test_round_trip_one_degree_grid(self):
        for angle in np.arange(-190, 191, 1.0):
            res = decode(encode(angle))
            assert abs(res.angle - angle) < 1e-9
            assert abs(res.amplitude - 1.0) < 1e-9
            assert res.residual_rmse < 1e-9

    def test_zero_wave_is_degenerate(self):
        with pytest.raises(DegenerateWave):
            decode(np.zeros(95))

    def test_phase_out_of_range(self):
        # phase pi corresponds to 2*phi_max
        wave = np.sin(DEFAULT.carrier_phases - math.pi * 0.75)
        with pytest.raises(PhaseOutOfRange):
            decode(wave)

    def test_wrong_length(self):
        with pytest.raises(InvalidConfig):
            decode(np.zeros(10))

    def test_noisy_wave_matches_grid_search(self):
        rng = np.random.default_rng(42)
        wave = encode(42.0) + rng.normal(0.0, 0.1, 95)
        oracle = grid_search_decode(wave, DEFAULT)
        assert abs(decode(wave).angle - oracle) < 0.1

    @pytest.mark.parametrize("sigma", [0.05, 0.2, 0.3])
    def test_noise_levels_within_one_grid_step(self, sigma):
        rng = np.random.default_rng(int(sigma * 100))
        for angle in rng.uniform(-150, 150, 10):
            wave = encode(angle) + rng.normal(0.0, sigma, 95)
            assert abs(decode(wave).angle - grid_search_decode(wave, DEFAULT)) <= 0.01 + 1e-9

    def test_batch_fit_matches_single(self):
        angles = np.array([-100.0, 0.0, 33.0])
        waves = np.stack([encode(a) for a in angles])
        phase, amp, res = fit_phase(waves)
        for k, a in enumerate(angles):
            single = decode(waves[k])
            assert phase[k] * 2 * 190 / math.pi == pytest.approx(single.angle, abs=1e-12)
            assert amp[k] == pytest.approx(single.amplitude)

    @settings(max_examples=200)
    @given(st.integers(4, 200), st.floats(1.0, 400.0), st.floats(-1.0, 1.0))
    def test_round_trip_property(self, n, phi_max, frac):
        cfg = CodecConfig(n, phi_max)
        angle = frac * phi_max
        res = decode(encode(angle, cfg), cfg)
        assert abs(res.angle - angle) < 1e-9
        assert abs(res.amplitude - 1.0) < 1e-9
        assert res.residual_rmse < 1e-9

    @given(st.floats(-190, 190), st.floats(1e-5, 1e3))
    def test_gain_equivariance(self, angle, gain):
        base = decode(encode(angle)).angle
        assert decode(gain * encode(angle)).angle == pytest.approx(base, abs=1e-9)


def test_topology_distance_monotone():
    for start in (-190.0, -50.0, 0.0, 60.0):
        ref = encode(start)
        offsets = np.arange(0.0, 190.0 - abs(start) + 1e-9, 0.5)
        targets = [start + d if start <= 0 else start - d for d in offsets]
        targets = [t for t in targets if abs(t) <= 190]
        dist = [np.sqrt(np.mean((encode(t) - ref) ** 2)) for t in targets]
        assert np.all(np.diff(dist) >= -1e-12)


class TestBins:
    def test_zero_lands_in_center_bin(self):
        edges = [-190 + 4 * k for k in range(96)]
        oracle = next(k for k in range(95) if edges[k] <= 0 < edges[k + 1])  # 0-based
        assert oracle + 1 == 48
        probs = encode_bins(0.0, DEFAULT, None)
        assert probs[47] == 1.0 and probs.sum() == 1.0

    def test_boundaries(self):
        assert encode_bins(-190.0, DEFAULT, None)[0] == 1.0
        assert encode_bins(190.0, DEFAULT, None)[-1] == 1.0
        # a shared edge goes to the higher-index bin
        assert bin_index(-186.0) == 1

    def test_smoothed_symmetric(self):
        probs = encode_bins(0.0, DEFAULT, 80.0)
        centre = 47
        for k in range(1, 48):
            assert probs[centre - k] == pytest.approx(probs[centre + k], abs=1e-12)
        assert probs.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.argmax(probs) == centre

    def test_out_of_range(self):
        with pytest.raises(AngleOutOfRange):
            encode_bins(-200.0, DEFAULT, None)

    @given(st.floats(-190, 190))
    def test_hard_bins_within_half_width(self, angle):
        est = decode_expected(encode_bins(angle, DEFAULT, None))
        assert abs(est - angle) <= DEFAULT.bin_width / 2 + 1e-12

    @given(st.floats(-190, 190), st.floats(1.0, 500.0))
    def test_smoothed_is_distribution(self, angle, var):
        p = encode_bins(angle, DEFAULT, var)
        assert np.all(p >= 0) and abs(p.sum() - 1) < 1e-9


class TestExpected:
    def test_one_hot(self):
        for i in (0, 10, 94):
            p = np.zeros(95)
            p[i] = 1.0
            assert decode_expected(p) == pytest.approx(-190 + 4 * i + 2)

    def test_uniform(self):
        assert decode_expected(np.full(95, 1 / 95)) == pytest.approx(0.0, abs=1e-12)

    def test_two_extremes(self):
        first_centre = (-190 + (-186)) / 2
        last_centre = (186 + 190) / 2
        assert (first_centre, last_centre) == (-188, 188)
        p = np.zeros(95)
        p[0] = p[-1] = 0.5
        assert decode_expected(p) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize(
        "probs",
        [np.full(95, 0.02), np.r_[-0.1, np.full(94, 1.1 / 94)], np.full(90, 1 / 90), np.r_[np.nan, np.zeros(94)]],
    )
    def test_invalid(self, probs):
        with pytest.raises(InvalidDistribution):
            decode_expected(probs)


@pytest.mark.parametrize("raw,expected", [(200.0, 190.0), (-500.0, -190.0), (10.0, 10.0)])
def test_clamp(raw, expected):
    assert clamp_angle(raw) == expected
