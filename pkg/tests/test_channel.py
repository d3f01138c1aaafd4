import numpy as np
import pytest

from slpmld import ConfigurationError, RngStream, awgn, sample_channel


class TestRngStream:
    def test_reproducible(self):
        a = RngStream(5, 3, "noise").generator().standard_normal(4)
        b = RngStream(5, 3, "noise").generator().standard_normal(4)
        assert np.array_equal(a, b)

    @pytest.mark.parametrize("other", [RngStream(5, 4, "noise"), RngStream(6, 3, "noise"),
                                       RngStream(5, 3, "bits")])
    def test_streams_differ(self, other):
        a = RngStream(5, 3, "noise").generator().standard_normal(4)
        assert not np.array_equal(a, other.generator().standard_normal(4))

    def test_unknown_purpose(self):
        with pytest.raises(ConfigurationError):
            RngStream(0, 0, "weather").generator()


class TestSampleChannel:
    def test_shapes(self):
        H = sample_channel(3, 4, 16, np.random.default_rng(0))
        assert (H.K, H.N_R, H.N_T) == (3, 4, 16)
        assert H.stacked.shape == (12, 16)
        assert np.array_equal(H.stacked[4:8], H.per_user[1])

    def test_unit_variance(self):
        H = sample_channel(2, 50, 100, np.random.default_rng(1))
        assert np.mean(np.abs(H.stacked) ** 2) == pytest.approx(1.0, abs=0.03)
        assert abs(np.mean(H.stacked.real * H.stacked.imag)) < 0.02

    def test_accepts_stream(self):
        a = sample_channel(2, 2, 4, RngStream(1, 2, "channel"))
        b = sample_channel(2, 2, 4, RngStream(1, 2, "channel"))
        assert np.array_equal(a.stacked, b.stacked)

    @pytest.mark.parametrize("dims", [(0, 2, 4), (2, 0, 4), (2, 2, 0)])
    def test_bad_dims(self, dims):
        with pytest.raises(ConfigurationError):
            sample_channel(*dims, np.random.default_rng(0))


class TestAwgn:
    def test_zero_noise_is_copy(self):
        y = np.ones(3, dtype=complex)
        out = awgn(y, 0.0, np.random.default_rng(0))
        assert np.array_equal(out, y) and out is not y

    def test_variance(self):
        out = awgn(np.zeros(200000), 0.25, np.random.default_rng(2))
        assert np.var(out) == pytest.approx(0.25, rel=0.02)

    def test_negative_variance(self):
        with pytest.raises(ConfigurationError):
            awgn(np.zeros(2), -1.0, np.random.default_rng(0))
