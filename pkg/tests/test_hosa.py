"""Test cumulant, bispectrum, bicepstrum and blind pulse estimation"""

import math

import numpy as np
import pytest

from hosadecon.core.config import HosaOptions, MagnitudeSource, SynthConfig
from hosadecon.core.errors import DegenerateInputError, EstimationError
from hosadecon.dsp.hosa import (
    BicepstrumGrid,
    BispectrumGrid,
    CepstrumSeq,
    CumulantGrid,
    bicepstrum_of,
    bispectral_magnitude,
    bispectrum_of,
    estimate_cumulant,
    estimate_pulse,
    extract_pulse_cepstrum,
    lag_window,
    reconstruct_pulse,
    run_estimate_pulse,
)
from hosadecon.dsp.metrics import normalized_cross_correlation
from hosadecon.dsp.synth import generate_pulse, generate_reflectivity, generate_trace
from hosadecon.models.series import RfTrace

FS = 50e6
TWO_TAP = np.array([1.0, 0.5])


def _exact_cumulant(h: np.ndarray, max_lag: int) -> CumulantGrid:
    """c(m1, m2) = sum_n h(n) h(n+m1) h(n+m2) for unit-skew white input"""
    size = 2 * max_lag + 1
    padded = np.concatenate([np.zeros(max_lag), h, np.zeros(2 * max_lag)])
    values = np.zeros((size, size))
    for i, m1 in enumerate(range(-max_lag, max_lag + 1)):
        for j, m2 in enumerate(range(-max_lag, max_lag + 1)):
            values[i, j] = sum(
                padded[n] * padded[n + m1] * padded[n + m2]
                for n in range(max_lag, max_lag + h.size)
            )
    return CumulantGrid(max_lag=max_lag, values=values, n_averaged=0, n_traces=0)


def _two_tap_cepstrum(n: np.ndarray) -> np.ndarray:
    """log(1 + 0.5 z^-1) expanded: (-1)^(n+1) 0.5^n / n for n >= 1"""
    return (-1.0) ** (n + 1) * 0.5**n / n


def _gabor_log_spectrum(size):
    """Complex log H of the reference pulse, peak at time zero"""
    pulse = generate_pulse(SynthConfig())
    h = np.zeros(size)
    h[(np.arange(len(pulse)) - pulse.alignment) % size] = pulse.samples
    H = np.fft.fft(h)
    magnitude = np.maximum(np.abs(H), 1e-12 * np.abs(H).max())
    return pulse, np.log(magnitude) + 1j * np.angle(H)


def _gabor_bispectrum(size):
    """log C(k1, k2) = log H(k1) + log H(k2) + log H*(k1 + k2)"""
    pulse, log_h = _gabor_log_spectrum(size)
    k = np.arange(size)
    log_c = log_h[:, None] + log_h[None, :] + np.conj(log_h[(k[:, None] + k) % size])
    return pulse, log_c


def _synthetic_traces(snr_db=math.inf, count=16, seed=0):
    cfg = SynthConfig(snr_db=snr_db, rng_seed=seed)
    pulse = generate_pulse(cfg)
    traces = []
    for i in range(count):
        refl = generate_reflectivity(cfg, seed=seed * 1000 + i, id=f"line_{i:03d}")
        traces.append(
            generate_trace(pulse, refl, snr_db, seed=seed * 1000 + 500 + i, id=refl.id)
        )
    return traces, pulse


class TestCumulant:
    """Test the third-order moment estimate"""

    def test_matches_triple_loop(self):
        """Test the FFT path against the defining sum on random short inputs"""
        rng = np.random.default_rng(0)
        for _ in range(50):
            max_lag = int(rng.integers(0, 9))
            n = int(rng.integers(max(2 * max_lag + 1, 4), 65))
            y = rng.standard_normal(n)
            grid = estimate_cumulant([RfTrace(y, FS)], max_lag, segment_len=n)
            padded = np.concatenate([y, np.zeros(max_lag)])

            for m1 in range(-max_lag, max_lag + 1):
                for m2 in range(-max_lag, max_lag + 1):
                    direct = sum(
                        y[k] * padded[k + m1] * padded[k + m2]
                        for k in range(n)
                        if k + m1 >= 0 and k + m2 >= 0
                    ) / n
                    assert grid.at(m1, m2) == pytest.approx(direct, abs=1e-12)

    def test_zero_lag_example(self):
        """Test c(0,0) of [2, -1, -1] is (8 - 1 - 1) / 3"""
        grid = estimate_cumulant([RfTrace([2.0, -1.0, -1.0], FS)], 0, segment_len=3)
        assert grid.values.shape == (1, 1)
        assert grid.at(0, 0) == pytest.approx(2.0)

    def test_symmetry_and_bookkeeping(self):
        """Test c(m1,m2) = c(m2,m1) and the segment count"""
        rng = np.random.default_rng(1)
        traces = [RfTrace(rng.exponential(size=1000), FS) for _ in range(3)]
        grid = estimate_cumulant(traces, 8, segment_len=256)
        np.testing.assert_array_equal(grid.values, grid.values.T)
        assert grid.n_segments == 9
        assert grid.n_traces == 3
        assert grid.n_averaged == 256

    def test_lag_validation(self):
        """Test that L must stay below half a segment"""
        trace = RfTrace(np.ones(100), FS)
        with pytest.raises(EstimationError):
            estimate_cumulant([trace], 50, segment_len=100)
        with pytest.raises(EstimationError):
            estimate_cumulant([RfTrace(np.ones(10), FS)], 8, segment_len=64)
        with pytest.raises(DegenerateInputError):
            estimate_cumulant([], 4, segment_len=64)

    def test_gaussian_noise_is_rejected(self):
        """Test that white Gaussian noise leaves a small cumulant"""
        rng = np.random.default_rng(2)
        n = 2**16
        gaussian = [RfTrace(rng.standard_normal(n), FS) for _ in range(16)]
        skewed = [RfTrace(rng.exponential(size=n) - 1.0, FS) for _ in range(16)]
        noise_norm = np.linalg.norm(estimate_cumulant(gaussian, 8, 1024).values)
        signal_norm = np.linalg.norm(estimate_cumulant(skewed, 8, 1024).values)
        assert noise_norm < 0.05 * signal_norm


class TestBispectrum:
    """Test the windowed 2-D DFT"""

    def test_zero_grid(self):
        """Test that a zero cumulant gives a zero bispectrum"""
        grid = CumulantGrid(4, np.zeros((9, 9)), n_averaged=0, n_traces=0)
        assert not np.any(bispectrum_of(grid, 32).values)

    def test_impulse_is_flat(self):
        """Test that c = delta(0,0) gives C = 1 everywhere"""
        values = np.zeros((9, 9))
        values[4, 4] = 1.0
        grid = CumulantGrid(4, values, n_averaged=0, n_traces=0)
        bisp = bispectrum_of(grid, 32)
        np.testing.assert_allclose(bisp.values, np.ones((32, 32)), atol=1e-12)

    def test_matches_direct_dft(self):
        """Test the circular lag placement against an explicit double sum"""
        rng = np.random.default_rng(3)
        max_lag, size = 8, 64
        values = rng.standard_normal((17, 17))
        grid = CumulantGrid(max_lag, values, n_averaged=0, n_traces=0)
        bisp = bispectrum_of(grid, size)

        m = np.arange(-max_lag, max_lag + 1)
        k = np.arange(size)
        kernel = np.exp(-2j * np.pi * np.outer(k, m) / size)
        direct = kernel @ (values * lag_window(max_lag)) @ kernel.T
        np.testing.assert_allclose(bisp.values, direct, atol=1e-9)

    def test_window_shape(self):
        """Test the separable Parzen taper"""
        w = lag_window(8)
        assert w[8, 8] == pytest.approx(1.0)
        np.testing.assert_allclose(w, w.T)
        assert w[0, 8] < w[4, 8] < w[8, 8]

    def test_grid_size_validation(self):
        """Test K even and >= 2L+1"""
        grid = CumulantGrid(8, np.zeros((17, 17)), n_averaged=0, n_traces=0)
        with pytest.raises(EstimationError):
            bispectrum_of(grid, 16)
        with pytest.raises(EstimationError):
            bispectrum_of(grid, 33)


class TestBicepstrum:
    """Test log, unwrap and inverse DFT"""

    def test_flat_unit_bispectrum(self):
        """Test that C = 1 gives a zero bicepstrum"""
        bic = bicepstrum_of(BispectrumGrid(16, np.ones((16, 16), dtype=complex)))
        np.testing.assert_allclose(bic.values, 0.0, atol=1e-12)

    def test_flat_e_bispectrum(self):
        """Test that C = e gives a unit impulse at the origin"""
        flat = np.full((16, 16), math.e, dtype=complex)
        bic = bicepstrum_of(BispectrumGrid(16, flat))
        expected = np.zeros((16, 16))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(bic.values, expected, atol=1e-12)
        assert bic.unwrap_residue == 0.0
        assert bic.floored_fraction == 0.0

    def test_zero_bispectrum(self):
        """Test that log of nothing is refused"""
        with pytest.raises(DegenerateInputError):
            bicepstrum_of(BispectrumGrid(8, np.zeros((8, 8), dtype=complex)))

    def test_polarity_is_normalized(self):
        """Test that negating C leaves the bicepstrum unchanged"""
        bisp = bispectrum_of(_exact_cumulant(TWO_TAP, 2), 64, window=False)
        flipped = BispectrumGrid(64, -bisp.values)
        np.testing.assert_allclose(
            bicepstrum_of(flipped, 1e-6).values,
            bicepstrum_of(bisp, 1e-6).values,
            atol=1e-12,
        )

    def test_two_tap_closed_form(self):
        """Test h^(n) of h = [1, 0.5] against its power series"""
        bisp = bispectrum_of(_exact_cumulant(TWO_TAP, 2), 64, window=False)
        bic = bicepstrum_of(bisp, floor_eps=1e-6)
        ceps = extract_pulse_cepstrum(bic)
        n = np.arange(1, 9)
        np.testing.assert_allclose(
            [ceps.at(k) for k in n], _two_tap_cepstrum(n), atol=1e-3
        )
        # minimum phase: nothing on the anti-causal side
        assert max(abs(ceps.at(-k)) for k in n) < 1e-3
        assert ceps.at(0) == 0.0
        assert bic.imaginary_residue < 1e-6
        assert bic.linear_phase_removed == (0, 0)


class TestReconstruction:
    """Test pulse reconstruction from a complex cepstrum"""

    def test_two_tap_pulse(self):
        """Test exp/IDFT of the closed-form cepstrum"""
        values = np.zeros(64)
        n = np.arange(1, 32)
        values[n] = _two_tap_cepstrum(n)
        pulse = reconstruct_pulse(CepstrumSeq(values), pulse_len=8, fs=FS)
        expected = TWO_TAP / np.linalg.norm(TWO_TAP)
        a = pulse.alignment
        np.testing.assert_allclose(pulse.samples[a : a + 2], expected, atol=1e-9)
        assert np.sum(pulse.samples**2) == pytest.approx(1.0)
        assert np.sum(np.abs(np.delete(pulse.samples, [a, a + 1]))) < 1e-9

    def test_zero_cepstrum_is_impulse(self):
        """Test that h^ = 0 yields a unit impulse"""
        pulse = reconstruct_pulse(CepstrumSeq(np.zeros(32)), pulse_len=16, fs=FS)
        expected = np.zeros(16)
        expected[pulse.alignment] = 1.0
        np.testing.assert_allclose(pulse.samples, expected, atol=1e-12)

    def test_magnitude_override(self):
        """Test that an external |H| replaces the cepstral magnitude"""
        ceps = CepstrumSeq(np.zeros(32))
        with pytest.raises(ValueError):
            reconstruct_pulse(ceps, 16, FS, magnitude=np.ones(31))
        pulse = reconstruct_pulse(ceps, 16, FS, magnitude=np.full(32, 5.0))
        assert np.max(pulse.samples) == pytest.approx(1.0)

    def test_energy_fraction_gate(self):
        """Test the error when the pulse does not fit the window"""
        rng = np.random.default_rng(4)
        values = np.zeros(64)
        values[1:] = 0.3 * rng.standard_normal(63)
        with pytest.raises(EstimationError, match="pulse energy"):
            reconstruct_pulse(CepstrumSeq(values), pulse_len=2, fs=FS)
        with pytest.raises(EstimationError):
            reconstruct_pulse(CepstrumSeq(np.zeros(16)), pulse_len=32, fs=FS)

    def test_cepstrum_origin_is_zero(self):
        """Test that the unidentifiable gain term is rejected"""
        with pytest.raises(ValueError):
            CepstrumSeq(np.ones(8))

    def test_gabor_cascade(self):
        """Test bicepstrum -> diagonal cepstrum -> pulse on an exact log bispectrum"""
        truth, log_c = _gabor_bispectrum(256)
        bic = BicepstrumGrid(size=256, values=np.fft.ifft2(log_c).real)
        pulse = reconstruct_pulse(extract_pulse_cepstrum(bic), 128, FS)
        assert normalized_cross_correlation(pulse.samples, truth.samples) >= 0.95


class TestBispectralMagnitude:
    """Test |H| recovered from log|C| by least squares"""

    def test_flat_bispectrum(self):
        """Test that a flat bispectrum gives a flat magnitude"""
        magnitude = bispectral_magnitude(BispectrumGrid(16, np.full((16, 16), 3.0)))
        np.testing.assert_allclose(magnitude, np.ones(16), atol=1e-8)

    def test_zero_bispectrum(self):
        """Test that an empty bispectrum is refused"""
        with pytest.raises(DegenerateInputError):
            bispectral_magnitude(BispectrumGrid(8, np.zeros((8, 8))))

    def test_gabor_magnitude(self):
        """Test |H| of the reference pulse across its band"""
        _, log_c = _gabor_bispectrum(256)
        magnitude = bispectral_magnitude(BispectrumGrid(256, -2.0 * np.exp(log_c)))
        _, log_h = _gabor_log_spectrum(256)
        truth = np.exp(log_h.real)
        truth /= truth.max()
        band = truth >= 0.1
        np.testing.assert_allclose(magnitude[band], truth[band], rtol=0.1)
        assert magnitude.max() == pytest.approx(1.0)
        assert np.all(magnitude[truth < 1e-6] < 1e-3)

    def test_gabor_pulse_from_bispectrum_alone(self):
        """Test the pulse built from cepstral phase and least-squares magnitude"""
        truth, log_c = _gabor_bispectrum(256)
        bic = BicepstrumGrid(size=256, values=np.fft.ifft2(log_c).real)
        magnitude = bispectral_magnitude(BispectrumGrid(256, np.exp(log_c)))
        pulse = reconstruct_pulse(
            extract_pulse_cepstrum(bic),
            128,
            FS,
            magnitude=magnitude,
            energy_fraction=0.95,
        )
        assert normalized_cross_correlation(pulse.samples, truth.samples) >= 0.95


class TestEstimatePulse:
    """Test the end-to-end estimator"""

    def test_zero_traces(self):
        """Test that silent input is refused"""
        traces = [RfTrace(np.zeros(4096), FS) for _ in range(4)]
        with pytest.raises(DegenerateInputError):
            estimate_pulse(traces, HosaOptions(ensemble=4))
        with pytest.raises(DegenerateInputError):
            estimate_pulse([])

    def test_short_trace(self):
        """Test the minimum processing length"""
        with pytest.raises(DegenerateInputError):
            estimate_pulse([RfTrace(np.ones(32), FS)])

    def test_mixed_rates(self):
        """Test that the ensemble shares one sample rate"""
        rng = np.random.default_rng(5)
        traces = [
            RfTrace(rng.exponential(size=4096), FS),
            RfTrace(rng.exponential(size=4096), 2 * FS),
        ]
        with pytest.raises(EstimationError, match="sample rates"):
            estimate_pulse(traces, HosaOptions(ensemble=2))

    def test_scale_invariance(self):
        """Test that a gain on every trace leaves the pulse unchanged"""
        traces, _ = _synthetic_traces(count=4)
        opts = HosaOptions(ensemble=4)
        base = estimate_pulse(traces, opts)
        scaled = estimate_pulse([t.with_samples(3.7 * t.samples) for t in traces], opts)
        np.testing.assert_allclose(scaled.samples, base.samples, atol=1e-6)
        assert scaled.alignment == base.alignment

    def test_shift_invariance(self):
        """Test that a common circular delay leaves the pulse unchanged"""
        traces, _ = _synthetic_traces(count=4)
        delayed = [t.with_samples(np.roll(t.samples, 1024)) for t in traces]
        np.testing.assert_allclose(
            estimate_cumulant(delayed, 64, 1024).values,
            estimate_cumulant(traces, 64, 1024).values,
            atol=1e-12,
        )
        # Welch segments straddle the wrap point, so compare the bispectral magnitude
        opts = HosaOptions(
            ensemble=4, magnitude_source=MagnitudeSource.BICEPSTRUM, energy_fraction=0.5
        )
        base = estimate_pulse(traces, opts)
        shifted = estimate_pulse(delayed, opts)
        np.testing.assert_allclose(shifted.samples, base.samples, atol=1e-6)

    def test_quality_report(self):
        """Test the diagnostics that accompany an estimate"""
        traces, truth = _synthetic_traces(count=4)
        opts = HosaOptions(ensemble=8)
        estimate = run_estimate_pulse(traces, opts, truth=truth)
        quality = estimate.quality
        assert quality.ensemble_size == 4
        assert quality.n_segments == 32
        assert quality.magnitude_source == "power_spectrum"
        assert 0.99 <= quality.energy_fraction <= 1.0
        assert -1.0 <= quality.ncc_vs_truth <= 1.0
        assert len(estimate.pulse) == opts.pulse_len
        assert estimate.cepstrum.size == opts.fft_size

    @pytest.mark.slow
    def test_recovers_noise_free_pulse(self):
        """Test NCC >= 0.95 with 16 noise-free traces"""
        traces, truth = _synthetic_traces()
        pulse = estimate_pulse(traces, HosaOptions())
        assert normalized_cross_correlation(pulse.samples, truth.samples) >= 0.95

    @pytest.mark.slow
    def test_recovers_pulse_at_10db(self):
        """Test NCC >= 0.90 with 16 traces at 10 dB SNR"""
        traces, truth = _synthetic_traces(snr_db=10.0, seed=1)
        pulse = estimate_pulse(traces, HosaOptions())
        assert normalized_cross_correlation(pulse.samples, truth.samples) >= 0.90

    @pytest.mark.slow
    def test_bispectrum_only_route(self):
        """Test NCC with |H| from the bispectrum instead of the power spectrum"""
        opts = HosaOptions(
            magnitude_source=MagnitudeSource.BICEPSTRUM, energy_fraction=0.95
        )
        traces, truth = _synthetic_traces()
        pulse = estimate_pulse(traces, opts)
        assert normalized_cross_correlation(pulse.samples, truth.samples) >= 0.90
        traces, truth = _synthetic_traces(snr_db=10.0, seed=1)
        pulse = estimate_pulse(traces, opts)
        assert normalized_cross_correlation(pulse.samples, truth.samples) >= 0.85
