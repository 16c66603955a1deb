import math

import numpy as np
import pytest

from oscibath.analysis import (
    AmbiguousPeriod,
    NoOscillation,
    TooFewPeaks,
    TooShort,
    detect_transient,
    eigenfrequency_candidates,
    envelope,
    extract_period,
    nearest_candidate,
    synchronization_metrics,
)
from oscibath.coefficients import PhenomenologicalParams, PhenomenologicalProvider
from oscibath.integrator import integrate_single_first_order, integrate_single_second_order
from oscibath.model import (
    CouplingNetwork,
    OscillatorSpec,
    ProviderConfig,
    SimulationConfig,
)

DT = 0.01


def grid(t_end, dt=DT):
    return np.arange(0.0, t_end + dt / 2, dt)


class TestDetectTransient:
    def test_ramped_periodic_signal(self):
        # ramp reaches 0.999 before t = 1.32, so windowed statistics settle
        # within the first couple of unit windows
        t = grid(20.0)
        x = (1.0 - np.exp(-((t / 0.5) ** 2))) * np.sin(2.0 * math.pi * t)
        estimate = detect_transient(t, x, window=1.0)
        assert not estimate.low_confidence
        assert estimate.time <= 2.0

    def test_constant_series(self):
        t = grid(10.0)
        estimate = detect_transient(t, np.full_like(t, 0.7), window=1.0)
        assert estimate.time == 0.0
        assert not estimate.low_confidence

    def test_monotone_growth_is_low_confidence(self):
        t = grid(20.0)
        estimate = detect_transient(t, np.exp(0.1 * t), window=2.0)
        assert estimate.low_confidence
        assert estimate.time == pytest.approx(10.0)

    def test_too_short(self):
        t = grid(3.0)
        with pytest.raises(TooShort):
            detect_transient(t, np.sin(t), window=1.0)


class TestExtractPeriod:
    def test_synthetic_known_period(self):
        t = grid(60.0)
        x = 2.0 + np.sin(2.0 * math.pi * t / 3.0)
        report = extract_period(t, x)
        assert report.period == pytest.approx(3.0, abs=0.003)
        assert not report.is_stationary
        assert report.mean_level == pytest.approx(2.0, abs=0.01)
        assert report.amplitude == pytest.approx(1.0, abs=0.01)

    def test_constant_series_is_stationary(self):
        t = grid(30.0)
        with pytest.raises(NoOscillation) as excinfo:
            extract_period(t, np.full_like(t, 0.5))
        assert excinfo.value.report.is_stationary
        assert excinfo.value.report.period is None
        assert excinfo.value.report.mean_level == pytest.approx(0.5)

    def test_pipeline_inherits_coefficient_period(self):
        # the integrated occupation number oscillates at the coefficient
        # frequency: full pipeline from provider through the solver
        params = PhenomenologicalParams(0.1, 0.05, 0.05, 0.04, osc_freq=1.0,
                                        phase_D=math.pi)
        ts = integrate_single_first_order(OscillatorSpec(1.0, n0=0.0),
                                          PhenomenologicalProvider(params),
                                          t_end=50.0)
        report = extract_period(ts.t, ts.n[0], (25.0, 50.0), atol=1e-12)
        assert not report.is_stationary
        assert report.period == pytest.approx(2.0 * math.pi, rel=0.02)

    def test_affine_invariance(self):
        t = grid(60.0)
        x = np.sin(2.0 * math.pi * t / 3.0)
        base = extract_period(t, x)
        scaled = extract_period(t, 3.7 * x + 5.0)
        assert abs(scaled.period - base.period) <= base.period_uncertainty

    def test_window_translation_by_whole_periods(self):
        t = grid(120.0)
        period = 3.0
        x = np.sin(2.0 * math.pi * t / period)
        a = extract_period(t, x, (10.0, 50.0))
        b = extract_period(t, x, (10.0 + 5 * period, 50.0 + 5 * period))
        assert abs(a.period - b.period) <= (a.period_uncertainty
                                            + b.period_uncertainty)

    def test_white_noise_is_ambiguous(self):
        t = grid(60.0)
        x = np.random.default_rng(0).normal(size=t.size)
        with pytest.raises(AmbiguousPeriod):
            extract_period(t, x)

    def test_monotone_growth_is_ambiguous(self):
        t = grid(60.0)
        with pytest.raises(AmbiguousPeriod):
            extract_period(t, np.exp(0.1 * t))

    def test_window_must_hold_64_samples(self):
        t = grid(60.0)
        x = np.sin(t)
        with pytest.raises(TooShort):
            extract_period(t, x, (10.0, 10.5))


class TestEnvelope:
    @pytest.mark.parametrize("amp,freq", [(1.0, 1.0), (0.3, 2.5), (40.0, 0.7)])
    def test_pure_sine_has_flat_envelope(self, amp, freq):
        t = grid(80.0)
        report = envelope(t, amp * np.sin(freq * t))
        assert report.modulation_depth <= 1e-3

    def test_known_amplitude_modulation(self):
        # peak values sweep (1 +- 0.3), so depth = 0.6 / 1.0
        t = grid(130.0)
        x = (1.0 + 0.3 * np.sin(0.1 * t)) * np.sin(t)
        report = envelope(t, x)
        assert report.modulation_depth == pytest.approx(0.6, abs=0.05)
        assert np.all(np.diff(report.peak_times) > 0)

    def test_too_few_peaks(self):
        t = grid(3.0)
        with pytest.raises(TooFewPeaks):
            envelope(t, np.sin(t))


class TestSynchronization:
    def test_identical_channels(self):
        t = grid(60.0)
        x = np.sin(t)
        sync = synchronization_metrics(t, x, x)
        assert sync.period_ratio == pytest.approx(1.0, abs=1e-6)
        assert sync.phase_lock_score == pytest.approx(1.0, abs=1e-6)

    def test_constant_phase_offset_locks(self):
        t = grid(60.0)
        sync = synchronization_metrics(t, np.sin(t), np.sin(t + 0.4))
        assert sync.period_ratio == pytest.approx(1.0, abs=0.01)
        assert sync.phase_lock_score >= 0.999

    def test_score_is_symmetric(self):
        t = grid(60.0)
        a = np.sin(t)
        b = np.sin(1.3 * t + 0.2)
        ab = synchronization_metrics(t, a, b)
        ba = synchronization_metrics(t, b, a)
        assert ab.phase_lock_score == ba.phase_lock_score

    def test_uncoupled_detuned_runs_track_eigenfrequencies(self):
        reports = []
        for omega in (1.0, 1.5):
            params = PhenomenologicalParams(0.1, 0.05, 0.05, 0.04,
                                            osc_freq=omega, phase_D=math.pi)
            ts = integrate_single_second_order(
                OscillatorSpec(omega, n0=0.0, v0=0.0),
                PhenomenologicalProvider(params), t_end=50.0)
            reports.append(ts)
        sync = synchronization_metrics(reports[0].t, reports[0].n[0],
                                       reports[1].n[0], (25.0, 50.0),
                                       atol=1e-12)
        assert sync.period_ratio == pytest.approx(1.5, rel=0.02)

    def test_stationary_channel_propagates(self):
        t = grid(60.0)
        with pytest.raises(NoOscillation):
            synchronization_metrics(t, np.sin(t), np.full_like(t, 1.0))


class TestEigenfrequencyCandidates:
    def test_two_oscillator_candidates(self):
        config = SimulationConfig(
            oscillators=(OscillatorSpec(1.0), OscillatorSpec(1.5)),
            provider_config=(ProviderConfig("custom"),) * 2,
            coupling=CouplingNetwork.uniform(2, 0.5),
            t_end=10.0)
        candidates = eigenfrequency_candidates(config)
        assert candidates["bare"] == (1.0, 1.5)
        assert candidates["normal_mode"] == pytest.approx((1.0,))

    def test_nearest_candidate(self):
        candidates = {"bare": (1.0, 1.5), "normal_mode": (0.316,)}
        assert nearest_candidate(1.48, candidates) == ("bare", 1.5)
        assert nearest_candidate(0.3, candidates) == ("normal_mode", 0.316)


def test_headline_property_no_asymptotic_limit():
    # positive-mean friction and diffusion with periodic late-time
    # oscillation: the occupation number keeps oscillating instead of
    # reaching a stationary value
    params = PhenomenologicalParams(0.12, 0.06, 0.06, 0.05, osc_freq=1.0,
                                    phase_D=math.pi)
    ts = integrate_single_first_order(OscillatorSpec(1.0, n0=0.0),
                                      PhenomenologicalProvider(params),
                                      t_end=50.0)
    report = extract_period(ts.t, ts.n[0], (25.0, 50.0), atol=1e-12)
    assert not report.is_stationary
    assert report.period is not None and report.period > 0
