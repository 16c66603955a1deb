"""Late-time observables of occupation-number traces.

Estimators for the quantities the simulations are about: where the transient
ends, the dominant late-time period (autocorrelation-primary with a spectral
cross-check), the oscillation envelope and its modulation depth, and
two-channel synchronization (period ratio and an analytic-signal phase-lock
score).

All functions work on a plain (t, x) sample pair restricted to an analysis
window; they are pure and safe to run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import detrend, hilbert
from scipy.signal.windows import tukey

from .model import SimulationConfig

__all__ = [
    "AnalysisError",
    "TooShort",
    "NoOscillation",
    "AmbiguousPeriod",
    "TooFewPeaks",
    "TransientEstimate",
    "OscillationReport",
    "EnvelopeReport",
    "SyncReport",
    "detect_transient",
    "extract_period",
    "envelope",
    "synchronization_metrics",
    "eigenfrequency_candidates",
    "nearest_candidate",
]

#: Minimum number of samples an analysis window must contain.
MIN_WINDOW_SAMPLES = 64

#: Relative change between consecutive windows below which a channel counts
#: as settled.
STABILITY_FRACTION = 0.05

#: The two period estimators must agree to this relative tolerance.
ESTIMATOR_AGREEMENT = 0.10

_TINY = 1e-300


class AnalysisError(Exception):
    """Base class for analysis failures."""


class TooShort(AnalysisError):
    """The series is too short for the requested estimator."""


class NoOscillation(AnalysisError):
    """The windowed signal is stationary; no period exists.

    Carries the partial ``report`` (mean level, stationarity flag) plus the
    windowed standard deviation as ``residual_std``.
    """

    def __init__(self, message: str, report: "OscillationReport",
                 residual_std: float):
        super().__init__(message)
        self.report = report
        self.residual_std = residual_std


class AmbiguousPeriod(AnalysisError):
    """The autocorrelation and spectral estimates disagree."""


class TooFewPeaks(AnalysisError):
    """Fewer than three local maxima in the analysis window."""


@dataclass(frozen=True)
class TransientEstimate:
    """Where the late-time regime begins; low_confidence marks the fallback."""

    time: float
    low_confidence: bool = False


@dataclass(frozen=True)
class OscillationReport:
    """Late-time oscillation summary for one channel.

    ``period`` and ``period_uncertainty`` are None when the channel is
    stationary; ``amplitude`` is the mean peak-to-trough half-range.
    """

    transient_end: float
    mean_level: float
    amplitude: float | None
    period: float | None
    period_uncertainty: float | None
    is_stationary: bool


@dataclass(frozen=True)
class EnvelopeReport:
    """Local maxima of one channel and the relative spread of their values."""

    peak_times: tuple[float, ...]
    peak_values: tuple[float, ...]
    modulation_depth: float


@dataclass(frozen=True)
class SyncReport:
    """Two-channel synchronization summary."""

    period_a: float
    period_b: float
    period_uncertainty_a: float
    period_uncertainty_b: float
    period_ratio: float
    ratio_uncertainty: float
    phase_lock_score: float


def _slice_window(t: np.ndarray, x: np.ndarray,
                  window: tuple[float, float] | None):
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    if window is None:
        return t, x
    ta, tb = window
    slack = 1e-9 * max(abs(ta), abs(tb), 1.0)
    ia = int(np.searchsorted(t, ta - slack, side="left"))
    ib = int(np.searchsorted(t, tb + slack, side="right"))
    return t[ia:ib], x[ia:ib]


def detect_transient(t: np.ndarray, x: np.ndarray,
                     window: float) -> TransientEstimate:
    """Earliest time after which consecutive-window mean and amplitude settle.

    The series is cut into consecutive windows of the given length; a pair of
    neighbours counts as settled when both the mean and the half-range change
    by less than 5% of the local signal scale.  If no settled suffix exists
    the midpoint is returned with low_confidence set.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(x, dtype=float)
    span = t[-1] - t[0]
    n_win = int(math.floor(span / window + 1e-9))
    if n_win < 4:
        raise TooShort("series cannot host 4 windows")

    edges = t[0] + window * np.arange(n_win + 1)
    idx = np.searchsorted(t, edges)
    idx[-1] = t.size
    means = np.empty(n_win)
    amps = np.empty(n_win)
    for j in range(n_win):
        chunk = x[idx[j]:idx[j + 1]]
        if chunk.size == 0:
            raise TooShort("window contains no samples")
        means[j] = chunk.mean()
        amps[j] = (chunk.max() - chunk.min()) / 2.0

    stable = np.empty(n_win - 1, dtype=bool)
    for j in range(n_win - 1):
        scale = max(abs(means[j]), abs(means[j + 1]),
                    amps[j], amps[j + 1], _TINY)
        stable[j] = (abs(means[j + 1] - means[j]) < STABILITY_FRACTION * scale
                     and abs(amps[j + 1] - amps[j]) < STABILITY_FRACTION * scale)

    k = n_win - 1
    while k > 0 and stable[k - 1]:
        k -= 1
    if k == n_win - 1 and not stable[-1]:
        return TransientEstimate(time=t[0] + span / 2.0, low_confidence=True)
    return TransientEstimate(time=float(t[0] + k * window))


def _parabolic_offset(ym: float, y0: float, yp: float) -> float:
    denom = ym - 2.0 * y0 + yp
    if denom == 0.0:
        return 0.0
    delta = 0.5 * (ym - yp) / denom
    return float(np.clip(delta, -0.5, 0.5))


def _acf_period(xc: np.ndarray, dt: float) -> float:
    """Lag of the dominant autocorrelation peak, sub-sample refined."""
    m = xc.size
    nfft = 1 << int(math.ceil(math.log2(2 * m)))
    spec = np.abs(np.fft.rfft(xc, nfft)) ** 2
    acf = np.fft.irfft(spec)[:m] / m
    acf = acf / acf[0]

    negative = np.nonzero(acf < 0)[0]
    if negative.size == 0:
        raise AmbiguousPeriod("autocorrelation never dips; no dominant period")
    start = int(negative[0])
    maxlag = m // 2
    if start >= maxlag:
        raise AmbiguousPeriod("autocorrelation dip beyond half the window")
    k = start + int(np.argmax(acf[start:maxlag]))
    k = min(max(k, 1), m - 2)
    delta = _parabolic_offset(acf[k - 1], acf[k], acf[k + 1])
    return (k + delta) * dt


def _spectral_period(xc: np.ndarray, dt: float, span: float) -> float:
    """Period of the dominant spectral peak (tapered, zero-padded, refined)."""
    m = xc.size
    xs = xc * tukey(m, alpha=0.2)
    nfft = 8 * (1 << int(math.ceil(math.log2(m))))
    spec = np.abs(np.fft.rfft(xs, nfft))
    freqs = np.fft.rfftfreq(nfft, dt)
    k_lo = int(np.searchsorted(freqs, 1.5 / span))
    if k_lo >= spec.size - 1:
        raise AmbiguousPeriod("analysis window too short for any resolvable period")
    k = k_lo + int(np.argmax(spec[k_lo:]))
    k = min(max(k, 1), spec.size - 2)
    logs = np.log(spec[k - 1:k + 2] + _TINY)
    delta = _parabolic_offset(logs[0], logs[1], logs[2])
    f_ref = freqs[k] + delta * (freqs[1] - freqs[0])
    if f_ref <= 0:
        raise AmbiguousPeriod("no positive-frequency spectral peak")
    return 1.0 / f_ref


def _local_maxima(t: np.ndarray, x: np.ndarray):
    """3-point local maxima with quadratic sub-sample refinement."""
    interior = np.nonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:]))[0] + 1
    times = np.empty(interior.size)
    values = np.empty(interior.size)
    for out_idx, i in enumerate(interior):
        delta = _parabolic_offset(x[i - 1], x[i], x[i + 1])
        times[out_idx] = t[i] + delta * (t[i + 1] - t[i])
        values[out_idx] = x[i] - 0.25 * (x[i - 1] - x[i + 1]) * delta
    return times, values


def extract_period(t: np.ndarray, x: np.ndarray,
                   window: tuple[float, float] | None = None,
                   atol: float = 1e-12) -> OscillationReport:
    """Dominant late-time period of one channel.

    Primary estimate: the dominant autocorrelation peak of the mean-subtracted
    windowed signal, refined by quadratic interpolation; cross-checked against
    the dominant bin of the tapered, zero-padded spectrum.  ``atol`` feeds the
    stationarity threshold (use the integrator's absolute tolerance when the
    data came from a simulation).

    Raises NoOscillation for stationary signals, AmbiguousPeriod when the two
    estimators disagree by more than 10%, TooShort for windows under 64
    samples.
    """
    tw, xw = _slice_window(t, x, window)
    if tw.size < MIN_WINDOW_SAMPLES:
        raise TooShort(f"analysis window has {tw.size} samples; "
                       f"need {MIN_WINDOW_SAMPLES}")
    dt = float(tw[1] - tw[0])
    span = float(tw[-1] - tw[0])
    mean_level = float(xw.mean())
    sd = float(xw.std())

    if sd < max(100.0 * atol, 1e-6 * abs(mean_level)):
        report = OscillationReport(
            transient_end=float(tw[0]), mean_level=mean_level,
            amplitude=None, period=None, period_uncertainty=None,
            is_stationary=True)
        raise NoOscillation("signal is stationary over the analysis window",
                            report, residual_std=sd)

    xc = xw - mean_level
    p_acf = _acf_period(xc, dt)
    p_fft = _spectral_period(xc, dt, span)
    if abs(p_acf - p_fft) > ESTIMATOR_AGREEMENT * p_acf:
        raise AmbiguousPeriod(
            f"autocorrelation period {p_acf:.6g} and spectral period "
            f"{p_fft:.6g} disagree by more than 10%")

    _, peak_vals = _local_maxima(tw, xw)
    _, trough_vals = _local_maxima(tw, -xw)
    if peak_vals.size and trough_vals.size:
        amplitude = float((peak_vals.mean() + trough_vals.mean()) / 2.0)
    else:
        amplitude = float((xw.max() - xw.min()) / 2.0)

    return OscillationReport(
        transient_end=float(tw[0]),
        mean_level=mean_level,
        amplitude=amplitude,
        period=float(p_acf),
        period_uncertainty=float(max(dt, abs(p_acf - p_fft))),
        is_stationary=False,
    )


def envelope(t: np.ndarray, x: np.ndarray,
             window: tuple[float, float] | None = None) -> EnvelopeReport:
    """Peak envelope of one channel and its modulation depth.

    modulation_depth is the spread (max - min) of the refined peak values
    over the window divided by their mean.
    """
    tw, xw = _slice_window(t, x, window)
    times, values = _local_maxima(tw, xw)
    if times.size < 3:
        raise TooFewPeaks(f"found {times.size} local maxima; need 3")
    spread = float(values.max() - values.min())
    depth = spread / max(abs(float(values.mean())), _TINY)
    return EnvelopeReport(peak_times=tuple(times), peak_values=tuple(values),
                          modulation_depth=depth)


def _instantaneous_phase(xw: np.ndarray) -> np.ndarray:
    xd = detrend(xw)
    xd = xd * tukey(xd.size, alpha=0.2)
    return np.angle(hilbert(xd))


def _taper_interior(size: int) -> slice:
    # flat part of the Tukey(0.2) window; phase estimates inside the tapered
    # 10% bands carry transform edge artifacts and are excluded from means
    edge = int(math.ceil(0.1 * size))
    return slice(edge, size - edge)


def synchronization_metrics(t: np.ndarray, x_a: np.ndarray, x_b: np.ndarray,
                            window: tuple[float, float] | None = None,
                            atol: float = 1e-12) -> SyncReport:
    """Period ratio and phase-lock score of two channels.

    phase_lock_score is the magnitude of the mean phasor of the
    analytic-signal phase difference over the window (taken on the untapered
    interior): 1 for perfect locking, near 0 for unrelated phases.
    Stationary channels propagate NoOscillation.
    """
    report_a = extract_period(t, x_a, window, atol)
    report_b = extract_period(t, x_b, window, atol)

    _, xa = _slice_window(t, x_a, window)
    _, xb = _slice_window(t, x_b, window)
    phase_diff = _instantaneous_phase(xa) - _instantaneous_phase(xb)
    interior = _taper_interior(phase_diff.size)
    score = float(np.abs(np.mean(np.exp(1j * phase_diff[interior]))))

    pa, pb = report_a.period, report_b.period
    ua, ub = report_a.period_uncertainty, report_b.period_uncertainty
    ratio = pa / pb
    ratio_unc = ratio * math.hypot(ua / pa, ub / pb)
    return SyncReport(period_a=pa, period_b=pb,
                      period_uncertainty_a=ua, period_uncertainty_b=ub,
                      period_ratio=ratio, ratio_uncertainty=ratio_unc,
                      phase_lock_score=score)


def eigenfrequency_candidates(config: SimulationConfig) -> dict[str, tuple[float, ...]]:
    """Candidate frequencies an extracted period may track.

    Two families: the oscillators' own frequencies, and the frequencies of
    the coupling network's normal modes (square roots of the coupling
    Laplacian's nonzero eigenvalues, i.e. the dissipation-free mode
    frequencies).  Which family the printed periods follow is reported, not
    decided.
    """
    bare = tuple(o.omega for o in config.oscillators)
    beta = config.coupling.beta
    laplacian = np.diag(beta.sum(axis=1)) - beta
    eigs = np.linalg.eigvalsh(laplacian)
    modes = tuple(float(math.sqrt(e)) for e in eigs if e > 1e-12)
    return {"bare": bare, "normal_mode": modes}


def nearest_candidate(omega: float,
                      candidates: dict[str, tuple[float, ...]]) -> tuple[str, float]:
    """Family name and value of the candidate frequency closest to omega."""
    best: tuple[str, float] | None = None
    best_dist = math.inf
    for family, values in candidates.items():
        for value in values:
            dist = abs(value - omega)
            if dist < best_dist:
                best_dist = dist
                best = (family, value)
    if best is None:
        raise ValueError("no candidate frequencies")
    return best
