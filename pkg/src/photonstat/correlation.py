"""Intensity traces, pulsed-excitation g2 with background subtraction, and
the long-delay coincidence-peak envelope used to detect blinking bunching."""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import errors, kernels

DEFAULT_BIN_WIDTH_S = 0.005
DEFAULT_SIDE_PEAK_RANGE = (10, 20)


@dataclass
class IntensityTrace:
    bin_width_s: float
    counts: np.ndarray       # per-bin totals, both channels summed
    start_time_s: float = 0.0


@dataclass
class G2Histogram:
    lag_bin_width_ps: float
    lag_edges_ps: np.ndarray
    counts: np.ndarray
    peak_ks: np.ndarray            # side/center peak indices (pulse periods)
    peak_areas: np.ndarray
    center_peak_area: int
    side_peak_areas: np.ndarray    # areas for k != 0, ordered by k
    g2_zero_raw: float
    g2_zero_corrected: float
    signal_fraction_rho: float
    side_peak_selection: tuple
    intra_window_ps: int


@dataclass
class G2Envelope:
    taus_s: np.ndarray
    values: np.ndarray
    one_sigma: np.ndarray


@dataclass
class StateLabels:
    threshold: int
    labels: np.ndarray      # True = bright
    on_fraction: float
    mode_counts: tuple


def bin_intensity(stream, bin_width_s=DEFAULT_BIN_WIDTH_S):
    """Per-bin photon totals; the trailing partial bin is dropped when the
    acquisition duration is known from metadata."""
    if bin_width_s <= 0:
        raise errors.InvalidParams("bin_width_s must be > 0")
    if len(stream) == 0:
        raise errors.EmptyStream("cannot bin an empty stream")
    t = stream.abs_time_ps()
    width_ps = bin_width_s * 1e12
    span_ps = stream.duration_s() * 1e12
    n_bins = max(int(span_ps // width_ps), 1)
    idx = (t / width_ps).astype(np.int64)
    counts = np.bincount(idx[idx < n_bins], minlength=n_bins)
    return IntensityTrace(bin_width_s=bin_width_s, counts=counts)


def intensity_histogram(trace):
    """Occurrence histogram over integer counts/bin; index = counts value."""
    if len(trace.counts) == 0:
        raise errors.EmptyStream("empty trace")
    return np.bincount(trace.counts.astype(np.int64))


def estimate_lifetime_scale_ps(stream):
    """Crude decay-scale estimate (mean microtime above the prompt mode),
    used only to size the default intra-peak integration window."""
    micro_ps = stream.microtime.astype(np.int64) * stream.header.resolution_ps
    hist = np.bincount(micro_ps // max(stream.header.sync_period_ps // 256, 1))
    t0 = int(np.argmax(hist)) * max(stream.header.sync_period_ps // 256, 1)
    d = micro_ps[micro_ps >= t0] - t0
    return float(d.mean()) if len(d) else stream.header.sync_period_ps / 10


def g2_pulsed(stream, intra_window_ps=None, n_side_peaks=20,
              side_peak_range=DEFAULT_SIDE_PEAK_RANGE, lag_bin_width_ps=None,
              signal_fraction=None, _pair_lags=None):
    """Pulsed-excitation cross-correlation histogram and g2(0).

    Pairs channel-0 with channel-1 events within +-(n_side_peaks + 1/2) sync
    periods via a two-pointer sliding window; peak areas integrate
    |lag - k*period| <= intra_window_ps. g2_zero_raw normalizes the center
    peak by the mean side-peak area over ``side_peak_range`` (in |k|).
    """
    if len(stream) == 0:
        raise errors.EmptyStream("empty stream")
    period = stream.header.sync_period_ps
    if intra_window_ps is None:
        intra_window_ps = min(int(5 * estimate_lifetime_scale_ps(stream)),
                              period // 2)
    intra_window_ps = int(intra_window_ps)
    if intra_window_ps > period // 2:
        raise errors.WindowTooWide("intra_window_ps must be <= sync_period/2")
    t = stream.abs_time_ps()
    t0 = t[stream.channel == 0]
    t1 = t[stream.channel == 1]
    if len(t0) == 0 or len(t1) == 0:
        raise errors.SingleChannelStream("g2 needs events on both channels")
    t0 = np.sort(t0)
    t1 = np.sort(t1)

    window = int((n_side_peaks + 0.5) * period)
    lags = (_pair_lags or kernels.pair_lags)(t0, t1, window)

    # peak areas: nearest peak index and residual
    k = np.rint(lags / period).astype(np.int64)
    resid = lags - k * period
    in_peak = np.abs(resid) <= intra_window_ps
    areas = np.bincount(k[in_peak] + n_side_peaks,
                        minlength=2 * n_side_peaks + 1)
    ks = np.arange(-n_side_peaks, n_side_peaks + 1)
    center = int(areas[n_side_peaks])
    side = areas[ks != 0]

    s_lo, s_hi = side_peak_range
    if s_hi > n_side_peaks:
        raise errors.WindowTooWide(
            f"side_peak_range {side_peak_range} exceeds n_side_peaks={n_side_peaks}")
    sel = (np.abs(ks) >= s_lo) & (np.abs(ks) <= s_hi)
    mean_side = areas[sel].mean()
    g2_raw = center / mean_side if mean_side > 0 else math.nan

    rho = _estimate_signal_fraction(stream) if signal_fraction is None \
        else float(signal_fraction)
    g2_corr = subtract_background_rho(g2_raw, rho) if math.isfinite(g2_raw) \
        else math.nan

    if lag_bin_width_ps is None:
        lag_bin_width_ps = max(stream.header.resolution_ps,
                               (2 * window) // 4000)
    n_lag_bins = 2 * (window // int(lag_bin_width_ps)) + 1
    edges = (np.arange(n_lag_bins + 1) - n_lag_bins / 2) * lag_bin_width_ps
    counts, _ = np.histogram(lags, bins=edges)

    return G2Histogram(
        lag_bin_width_ps=float(lag_bin_width_ps), lag_edges_ps=edges,
        counts=counts, peak_ks=ks, peak_areas=areas,
        center_peak_area=center, side_peak_areas=side,
        g2_zero_raw=float(g2_raw), g2_zero_corrected=float(g2_corr),
        signal_fraction_rho=rho, side_peak_selection=(s_lo, s_hi),
        intra_window_ps=intra_window_ps)


def g2_pulsed_bruteforce(stream, **kwargs):
    """All-pairs reference implementation (independent oracle for g2_pulsed).

    Computes every channel-0/channel-1 delay by explicit pairwise
    differences; only usable on small streams.
    """
    def all_pairs(t0, t1, window):
        lags = (t1[None, :].astype(np.int64) - t0[:, None].astype(np.int64)).ravel()
        return lags[np.abs(lags) <= window]

    return g2_pulsed(stream, _pair_lags=all_pairs, **kwargs)


def _estimate_signal_fraction(stream):
    """rho = signal/(signal+background) from dark-rate metadata; 1.0 when
    the stream carries no detector metadata."""
    det = stream.header.meta.get("detector_params")
    if not det or len(stream) == 0:
        return 1.0
    dur = stream.duration_s()
    if dur <= 0:
        return 1.0
    total = len(stream) / dur
    bg = 2.0 * float(det.get("dark_rate_hz", 0.0))
    return max(1.0 - bg / total, 0.0) if total > 0 else 1.0


def subtract_background(g2_zero_raw, signal_rate, background_rate):
    """Background-corrected g2(0) from the signal fraction rho."""
    if signal_rate < 0 or background_rate < 0:
        raise errors.InvalidParams("rates must be >= 0")
    total = signal_rate + background_rate
    if total <= 0:
        raise errors.ZeroTotalRate("signal_rate + background_rate must be > 0")
    return subtract_background_rho(g2_zero_raw, signal_rate / total)


def subtract_background_rho(g2_zero_raw, rho):
    if rho <= 0:
        raise errors.ZeroTotalRate("signal fraction rho must be > 0")
    return max((g2_zero_raw - (1.0 - rho ** 2)) / rho ** 2, 0.0)


def default_tau_grid(max_tau_s=1.0, min_tau_s=1e-6, points_per_decade=5):
    n = int(round(math.log10(max_tau_s / min_tau_s) * points_per_decade)) + 1
    return np.geomspace(min_tau_s, max_tau_s, n)


def g2_envelope(stream, taus_s=None):
    """Coincidence-peak envelope over log-spaced delays.

    For each tau the cross-channel pair count at pulse separations inside a
    geometric window around tau is normalized by the uncorrelated
    expectation, so a stationary Poisson pair gives 1. Windows between
    consecutive grid points keep >= 5% relative tau resolution.
    """
    if len(stream) == 0:
        raise errors.EmptyStream("empty stream")
    period = stream.header.sync_period_ps
    taus = default_tau_grid() if taus_s is None else np.asarray(taus_s, dtype=float)
    if np.any(taus * 1e12 < period):
        raise errors.InvalidParams("tau grid must be >= 1 sync period")
    dur = stream.duration_s()
    if dur < 10 * taus.max():
        raise errors.TraceTooShort(
            f"duration {dur:.3g}s < 10 x max tau {taus.max():.3g}s")

    n0 = np.sort(stream.nsync[stream.channel == 0].astype(np.int64))
    n1 = np.sort(stream.nsync[stream.channel == 1].astype(np.int64))
    if len(n0) == 0 or len(n1) == 0:
        raise errors.SingleChannelStream("envelope needs events on both channels")
    n_pulses = int(stream.header.meta.get("sim", {}).get(
        "n_pulses", int(max(n0[-1], n1[-1])) + 1))

    # geometric window edges around each grid point
    edges = np.sqrt(taus[:-1] * taus[1:])
    edges = np.concatenate(([taus[0] ** 2 / edges[0]], edges,
                            [taus[-1] ** 2 / edges[-1]]))
    k_edges = np.maximum(np.rint(edges * 1e12 / period).astype(np.int64), 1)

    lam0 = len(n0) / n_pulses
    lam1 = len(n1) / n_pulses
    values = np.full(len(taus), np.nan)
    sigmas = np.full(len(taus), np.nan)
    for m in range(len(taus)):
        k_lo, k_hi = int(k_edges[m]), int(k_edges[m + 1])
        if k_hi <= k_lo:
            k_hi = k_lo + 1
        obs = _count_pairs_in_range(n0, n1, k_lo, k_hi)
        obs += _count_pairs_in_range(n1, n0, k_lo, k_hi)
        ks = np.arange(k_lo, k_hi)
        expect = 2.0 * lam0 * lam1 * np.sum(np.maximum(n_pulses - ks, 0))
        if expect <= 0:
            continue
        values[m] = obs / expect
        sigmas[m] = math.sqrt(max(obs, 1.0)) / expect
    return G2Envelope(taus_s=taus, values=values, one_sigma=sigmas)


def _count_pairs_in_range(na, nb, k_lo, k_hi):
    """Number of pairs with nb - na in [k_lo, k_hi); both arrays sorted."""
    lo = np.searchsorted(nb, na + k_lo, side="left")
    hi = np.searchsorted(nb, na + k_hi, side="left")
    return int(np.sum(hi - lo))


def telegraph_envelope(tau_s, p_on, i_on, i_off, k_total_per_s):
    """Closed-form blinking autocorrelation for a two-state telegraph process:
    1 + p(1-p)(I_on - I_off)^2 / <I>^2 * exp(-k*tau)."""
    mean_i = p_on * i_on + (1 - p_on) * i_off
    amp = p_on * (1 - p_on) * (i_on - i_off) ** 2 / mean_i ** 2
    return 1.0 + amp * np.exp(-k_total_per_s * np.asarray(tau_s))


def threshold_states(trace, smooth_sigma=2.0, min_prominence=0.05):
    """Bright/grey labels from the valley between the two modes of the
    occurrence histogram; raises NotBimodal when fewer than two modes."""
    from scipy.signal import find_peaks

    occ = intensity_histogram(trace)
    smoothed = ndimage.gaussian_filter1d(occ.astype(float), smooth_sigma)
    peaks, props = find_peaks(smoothed, prominence=min_prominence * smoothed.max())
    if len(peaks) < 2:
        raise errors.NotBimodal(f"found {len(peaks)} mode(s), need 2")
    # two most prominent modes
    top = peaks[np.argsort(props["prominences"])[-2:]]
    lo_mode, hi_mode = int(top.min()), int(top.max())
    valley = lo_mode + int(np.argmin(occ[lo_mode:hi_mode + 1]))
    labels = trace.counts > valley
    return StateLabels(threshold=valley, labels=labels,
                       on_fraction=float(labels.mean()),
                       mode_counts=(lo_mode, hi_mode))
