"""Test the Fourier-domain Wiener stage and its baselines"""

import numpy as np
import pytest

from hosadecon.core.config import SeriesKind, SynthConfig, WienerConfig
from hosadecon.core.errors import EstimationError
from hosadecon.dsp.metrics import relative_l2_error
from hosadecon.dsp.synth import (
    NoiseModel,
    generate_pulse,
    generate_reflectivity,
    generate_trace,
)
from hosadecon.dsp.wiener import (
    default_fft_size,
    estimate_noise_variance,
    naive_inverse,
    reflectivity_power,
    run_iterative_wiener,
    wiener_step,
)
from hosadecon.models.series import Pulse, RfTrace

FS = 50e6


def _trace(n=512, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return RfTrace(scale * rng.standard_normal(n), FS, id="line_000")


class TestWienerStep:
    """Test a single Wiener filter application"""

    def test_zero_over_zero_is_zero(self):
        """Test H = 0 with Px = 0 and sigma^2 = 0"""
        Y = np.ones(8, dtype=complex)
        est = wiener_step(Y, np.zeros(8, dtype=complex), np.zeros(8), 0.01, 0.0)
        np.testing.assert_array_equal(est.G, np.zeros(8))
        np.testing.assert_array_equal(est.X1, np.zeros(8))

    def test_noise_free_is_inverse(self):
        """Test that sigma^2 = 0 reduces G to 1/H where Px > 0"""
        H = np.array([2.0, 1j, -0.5, 4.0])
        est = wiener_step(np.ones(4, dtype=complex), H, np.ones(4), 0.01, 0.0)
        np.testing.assert_allclose(est.G, 1 / H)

    def test_validation(self):
        """Test shape and sign checks"""
        with pytest.raises(ValueError):
            wiener_step(np.ones(4), np.ones(3), np.ones(4), 0.01, 1.0)
        with pytest.raises(ValueError):
            wiener_step(np.ones(4), np.ones(4), -np.ones(4), 0.01, 1.0)

    def test_gain_never_exceeds_inverse(self):
        """Test |G H| <= 1, with equality only when sigma^2 = 0"""
        rng = np.random.default_rng(5)
        H = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        Px = rng.uniform(0.1, 2.0, 64)
        Y = np.ones(64, dtype=complex)
        noisy = wiener_step(Y, H, Px, 0.5, 0.3)
        assert np.all(np.abs(noisy.G * H) < 1.0)
        exact = wiener_step(Y, H, Px, 0.5, 0.0)
        np.testing.assert_allclose(np.abs(exact.G * H), 1.0)

    def test_linear_in_trace_spectrum(self):
        """Test X1 = G Y is linear in Y for fixed H and Px"""
        rng = np.random.default_rng(6)
        H = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        Px = rng.uniform(0.0, 1.0, 32)
        Y1 = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        Y2 = rng.standard_normal(32) + 1j * rng.standard_normal(32)
        combined = wiener_step(2.0 * Y1 - 3.0 * Y2, H, Px, 0.1, 0.2).X1
        parts = (
            2.0 * wiener_step(Y1, H, Px, 0.1, 0.2).X1
            - 3.0 * wiener_step(Y2, H, Px, 0.1, 0.2).X1
        )
        np.testing.assert_allclose(combined, parts, atol=1e-12)

    def test_pulse_zero_with_noise(self):
        """Test that H = 0 and sigma^2 > 0 give G = 0"""
        est = wiener_step(np.ones(4, dtype=complex), np.zeros(4), np.ones(4), 0.1, 1.0)
        np.testing.assert_array_equal(est.G, np.zeros(4))

    def test_signal_equals_noise_term(self):
        """Test |G| = 1 / (2 |H|) where |H|^2 Px = alpha sigma^2"""
        H = np.array([0.5, 2.0, 1j])
        alpha, sigma2 = 0.2, 0.5
        Px = alpha * sigma2 / np.abs(H) ** 2
        est = wiener_step(np.ones(3, dtype=complex), H, Px, alpha, sigma2)
        np.testing.assert_allclose(np.abs(est.G), 1 / (2 * np.abs(H)))


class TestIterativeWiener:
    """Test the iterative filter on controlled inputs"""

    def setup_method(self):
        """Set up test environment"""
        self.cfg = WienerConfig()
        self.delta = Pulse(np.array([1.0]), FS)

    def test_identity_pulse_without_noise(self):
        """Test that h = delta and sigma^2 = 0 return the trace"""
        trace = _trace()
        result = run_iterative_wiener(trace, self.delta, self.cfg, NoiseModel(0.0))
        np.testing.assert_allclose(result.series.samples, trace.samples, atol=1e-9)
        assert result.series.kind == SeriesKind.WIENER_ESTIMATE
        assert result.series.id == "line_000"

    def test_energy_falls_with_noise(self):
        """Test monotonic shrinkage over four decades of sigma^2"""
        trace = _trace(seed=1)
        rng = np.random.default_rng(2)
        pulse = Pulse(rng.standard_normal(16), FS, alignment=3)
        energies = []
        for sigma2 in np.logspace(-4, 0, 9):
            result = run_iterative_wiener(trace, pulse, self.cfg, NoiseModel(sigma2))
            energies.append(float(np.sum(result.series.samples**2)))
        assert all(b < a for a, b in zip(energies, energies[1:]))

    def test_log(self):
        """Test the iteration log"""
        cfg = WienerConfig(iterations=3, fft_size=2048)
        result = run_iterative_wiener(_trace(), self.delta, cfg, NoiseModel(0.5))
        log = result.log
        assert log.iterations == 3
        assert len(log.residual_energy) == 3
        assert log.fft_size == 2048
        assert log.sigma2 == 0.5
        assert log.seed_mode == "regularized_inverse_periodogram"

    def test_output_length(self):
        """Test that x1 matches the trace length"""
        pulse = Pulse(np.hanning(31), FS, alignment=15)
        result = run_iterative_wiener(_trace(n=1000), pulse, self.cfg, NoiseModel(0.1))
        assert len(result.series) == 1000

    def test_rejects_mismatched_inputs(self):
        """Test pulse length and sample-rate checks"""
        with pytest.raises(EstimationError):
            run_iterative_wiener(
                _trace(n=64), Pulse(np.ones(64), FS), self.cfg, NoiseModel(0.1)
            )
        with pytest.raises(ValueError):
            run_iterative_wiener(
                _trace(), Pulse(np.ones(4), 2 * FS), self.cfg, NoiseModel(0.1)
            )
        with pytest.raises(EstimationError):
            run_iterative_wiener(
                _trace(n=512), self.delta, WienerConfig(fft_size=256), NoiseModel(0.1)
            )

    def test_grid_size_does_not_move_the_estimate(self):
        """Test that doubling fft_size leaves a noise-free inverse unchanged"""
        rng = np.random.default_rng(7)
        x = rng.standard_normal(500)
        pulse = Pulse(np.array([1.0, 0.5]), FS)
        trace = RfTrace(np.convolve(x, pulse.samples), FS)
        small = run_iterative_wiener(trace, pulse, self.cfg, NoiseModel(0.0))
        large = run_iterative_wiener(
            trace, pulse, WienerConfig(fft_size=1024), NoiseModel(0.0)
        )
        assert small.log.fft_size == 512
        np.testing.assert_allclose(
            large.series.samples[8:-8], small.series.samples[8:-8], atol=1e-6
        )
        np.testing.assert_allclose(small.series.samples[:500], x, atol=1e-6)

    def test_reflectivity_power(self):
        """Test the white reflectivity level behind the Px1 cap"""
        trace = RfTrace(np.full(100, 2.0), FS)
        pulse = Pulse(np.array([1.0, 1.0]), FS)
        assert reflectivity_power(trace, pulse, 0.0) == pytest.approx(2.0)
        assert reflectivity_power(trace, pulse, 1.0) == pytest.approx(1.5)
        assert reflectivity_power(trace, pulse, 10.0) == 0.0
        with pytest.raises(EstimationError):
            reflectivity_power(trace, Pulse(np.zeros(2), FS), 0.0)

    def test_capped_spectrum_is_logged(self):
        """Test that the log carries the cap used on Px1"""
        trace = _trace(seed=3)
        result = run_iterative_wiener(trace, self.delta, self.cfg, NoiseModel(0.25))
        expected = float(np.mean(trace.samples**2)) - 0.25
        assert result.log.reflectivity_power == pytest.approx(expected)


class TestSyntheticLine:
    """Test the Wiener estimate on one 10 dB synthetic line"""

    def setup_method(self):
        """Set up test environment"""
        cfg = SynthConfig(n_samples=4096, snr_db=10.0)
        self.pulse = generate_pulse(cfg)
        self.truth = generate_reflectivity(cfg, seed=11)
        self.trace = generate_trace(self.pulse, self.truth, cfg.snr_db, seed=12)
        self.noise = estimate_noise_variance(self.trace)

    def _error(self, iterations):
        cfg = WienerConfig(iterations=iterations)
        result = run_iterative_wiener(self.trace, self.pulse, cfg, self.noise)
        return relative_l2_error(result.series, self.truth)

    def test_iterations_stay_bounded(self):
        """Test that more iterations do not grow the error"""
        first, tenth, thirtieth = self._error(1), self._error(10), self._error(30)
        assert tenth < 2.0
        assert tenth <= 1.5 * first
        assert thirtieth < 2.0

    def test_beats_naive_inverse(self):
        """Test error and output variance against Y / H"""
        result = run_iterative_wiener(
            self.trace, self.pulse, WienerConfig(), self.noise
        )
        naive = naive_inverse(self.trace, self.pulse)
        assert relative_l2_error(result.series, self.truth) < relative_l2_error(
            naive, self.truth
        )
        assert np.var(naive.samples) > np.var(result.series.samples)


class TestBaselines:
    """Test the naive inverse, FFT sizing and noise estimation"""

    def test_naive_inverse_of_delta(self):
        """Test that Y / H with H = 1 is the trace itself"""
        trace = _trace()
        naive = naive_inverse(trace, Pulse(np.array([1.0]), FS))
        np.testing.assert_allclose(naive.samples, trace.samples, atol=1e-12)
        assert naive.kind == SeriesKind.NAIVE_ESTIMATE

    def test_naive_inverse_undoes_circular_convolution(self):
        """Test exact recovery when the pulse spectrum has no zeros"""
        rng = np.random.default_rng(3)
        x = rng.standard_normal(256)
        h = np.array([1.0, 0.5])
        y = np.real(np.fft.ifft(np.fft.fft(x) * np.fft.fft(h, 256)))
        naive = naive_inverse(RfTrace(y, FS), Pulse(h, FS), fft_size=256)
        np.testing.assert_allclose(naive.samples, x, atol=1e-9)

    def test_default_fft_size(self):
        """Test next power of two >= N + P"""
        assert default_fft_size(8192, 64) == 16384
        assert default_fft_size(1000, 24) == 1024
        assert default_fft_size(1000, 25) == 2048

    def test_noise_variance(self):
        """Test the MAD estimate on white noise"""
        noise = estimate_noise_variance(_trace(n=8192, seed=4, scale=0.5))
        assert noise.sigma == pytest.approx(0.5, rel=0.05)
        assert set(noise.sigma2_by_level) == {1, 2, 3, 4, 5}

    def test_noise_variance_over_seeds(self):
        """Test sigma^2 in [0.8, 1.2] for unit Gaussian noise, n = 4096"""
        inside = [
            0.8 <= estimate_noise_variance(_trace(n=4096, seed=s)).sigma2 <= 1.2
            for s in range(100)
        ]
        assert sum(inside) >= 95

    def test_noise_variance_of_silence(self):
        """Test that an all-zero trace has no noise"""
        noise = estimate_noise_variance(RfTrace(np.zeros(1024), FS))
        assert noise.sigma2 == 0.0
        assert all(v == 0.0 for v in noise.sigma2_by_level.values())

    def test_noise_variance_under_sparse_spikes(self):
        """Test the MAD estimate with a sparse spike train over sigma = 0.1"""
        rng = np.random.default_rng(8)
        spikes = np.where(rng.random(4096) < 0.01, 1.0, 0.0)
        trace = RfTrace(spikes + 0.1 * rng.standard_normal(4096), FS)
        assert estimate_noise_variance(trace).sigma == pytest.approx(0.1, rel=0.2)
