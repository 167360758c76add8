import numpy as np
import pytest
from scipy import stats

from photonstat import (DetectorParams, EmitterParams, SimConfig,
                        TelegraphBlinking, bin_intensity, errors, g2_envelope,
                        g2_pulsed, g2_pulsed_bruteforce, intensity_histogram,
                        simulate_stream, subtract_background,
                        telegraph_envelope, threshold_states)
from photonstat.correlation import (IntensityTrace, default_tau_grid,
                                    subtract_background_rho)
from photonstat.photon_stream import StreamHeader, make_stream

from conftest import PERIOD, RES, poisson_stream, random_stream


def _stream(nsync, channel=None, micro=None, meta=None, period=PERIOD):
    nsync = np.asarray(nsync, dtype=np.uint64)
    n = len(nsync)
    channel = np.zeros(n, np.uint8) if channel is None else channel
    micro = np.zeros(n, np.uint32) if micro is None else micro
    h = StreamHeader(sync_period_ps=period, resolution_ps=RES, meta=meta or {})
    return make_stream(h, channel, nsync, micro)


# ---------------------------------------------------------------- intensity

def test_bin_intensity_single_photon():
    s = _stream([0], meta={"sim": {"duration_s": 400_000 * 1e-12}})
    tr = bin_intensity(s, bin_width_s=400_000 * 1e-12)
    assert np.array_equal(tr.counts, [1])


def test_bin_intensity_counts_and_histogram():
    # photons at known bins; histogram {0:?, 2:1, 3:1}
    width = 1e-3
    # 400 ns period: 2500 pulses per 1 ms bin
    nsync = np.array([0, 1, 2, 2500, 2501, 2502], np.uint64)
    s = _stream(nsync, meta={"sim": {"duration_s": 2e-3}})
    tr = bin_intensity(s, bin_width_s=width)
    assert np.array_equal(tr.counts, [3, 3])
    occ = intensity_histogram(tr)
    assert np.array_equal(occ, [0, 0, 0, 2])


def test_bin_intensity_fano_poisson(rng):
    s = poisson_stream(rng, rate_hz=20_000, duration_s=2.0)
    tr = bin_intensity(s, bin_width_s=0.001)
    fano = tr.counts.var() / tr.counts.mean()
    assert abs(fano - 1.0) < 0.15
    assert len(tr.counts) == 2000


def test_intensity_histogram_poisson_chi2(rng):
    s = poisson_stream(rng, rate_hz=5_000, duration_s=4.0)
    tr = bin_intensity(s, bin_width_s=0.001)
    occ = intensity_histogram(tr)
    mu = tr.counts.mean()
    k = np.arange(len(occ))
    expect = len(tr.counts) * stats.poisson.pmf(k, mu)
    mask = expect > 5
    chi2 = np.sum((occ[mask] - expect[mask]) ** 2 / expect[mask])
    assert chi2 < stats.chi2.ppf(0.999, mask.sum() - 1)


def test_bin_intensity_errors():
    s = _stream([1])
    with pytest.raises(errors.InvalidParams):
        bin_intensity(s, bin_width_s=0.0)
    with pytest.raises(errors.EmptyStream):
        bin_intensity(_stream([]))


# ------------------------------------------------------------------- g2

def test_g2_antibunched_pairs():
    # photons on alternating channels but never in the same pulse:
    # center peak exactly zero, side peaks populated
    nsync = np.arange(0, 40_000, dtype=np.uint64)
    channel = (nsync % 2).astype(np.uint8)
    s = _stream(nsync, channel=channel,
                micro=np.full(len(nsync), 100, np.uint32))
    g2 = g2_pulsed(s, intra_window_ps=1000, signal_fraction=1.0)
    assert g2.center_peak_area == 0
    assert g2.g2_zero_raw == 0.0
    assert g2.g2_zero_corrected == 0.0
    assert g2.side_peak_areas.sum() > 0


def test_g2_poisson_flat(rng):
    s = poisson_stream(rng, rate_hz=50_000, duration_s=2.0)
    g2 = g2_pulsed(s, intra_window_ps=PERIOD // 2 - PERIOD // 100)
    # uncorrelated: center comparable to sides, raw g2 ~ 1
    assert abs(g2.g2_zero_raw - 1.0) < 0.1
    mean_side = g2.side_peak_areas.mean()
    assert abs(g2.center_peak_area - mean_side) < 5 * np.sqrt(mean_side)


def test_g2_bruteforce_equivalence(rng):
    s = poisson_stream(rng, rate_hz=8_000, duration_s=0.2)
    fast = g2_pulsed(s, intra_window_ps=50_000)
    brute = g2_pulsed_bruteforce(s, intra_window_ps=50_000)
    assert np.array_equal(fast.peak_areas, brute.peak_areas)
    assert np.array_equal(fast.counts, brute.counts)
    assert fast.g2_zero_raw == brute.g2_zero_raw


def test_g2_channel_swap_symmetric(rng):
    s = poisson_stream(rng, rate_hz=8_000, duration_s=0.2)
    swapped = make_stream(s.header, (1 - s.channel).astype(np.uint8),
                          s.nsync, s.microtime)
    a = g2_pulsed(s, intra_window_ps=50_000)
    b = g2_pulsed(swapped, intra_window_ps=50_000)
    # lag sign flips; peak areas mirror
    assert np.array_equal(a.peak_areas, b.peak_areas[::-1])
    assert a.center_peak_area == b.center_peak_area


def test_g2_known_small_case():
    # ch0 at pulse 0, ch1 at pulses {0, 3, 3, 5}: areas {0:1, 3:2, 5:1}
    nsync = np.array([0, 0, 3, 3, 5], np.uint64)
    channel = np.array([0, 1, 1, 1, 1], np.uint8)
    s = _stream(nsync, channel=channel)
    g2 = g2_pulsed(s, intra_window_ps=1000, n_side_peaks=20,
                   signal_fraction=1.0)
    areas = dict(zip(g2.peak_ks, g2.peak_areas))
    assert areas[0] == 1 and areas[3] == 2 and areas[5] == 1
    assert sum(areas.values()) == 4


def test_g2_window_and_errors(rng):
    s = poisson_stream(rng, rate_hz=5_000, duration_s=0.1)
    with pytest.raises(errors.WindowTooWide):
        g2_pulsed(s, intra_window_ps=PERIOD)
    with pytest.raises(errors.WindowTooWide):
        g2_pulsed(s, intra_window_ps=1000, n_side_peaks=5,
                  side_peak_range=(10, 20))
    with pytest.raises(errors.EmptyStream):
        g2_pulsed(_stream([]))
    one_ch = _stream(np.arange(100, dtype=np.uint64))
    with pytest.raises(errors.SingleChannelStream):
        g2_pulsed(one_ch, intra_window_ps=1000)


def test_g2_simulated_antibunching():
    em = EmitterParams(mean_excitons_per_pulse=0.3, qy_exciton=0.9,
                       qy_trion=0.0, qy_biexciton=0.0)
    det = DetectorParams(efficiency_total=0.1)
    s = simulate_stream(em, det, SimConfig(duration_s=5.0, seed=17))
    g2 = g2_pulsed(s)
    # no biexciton, no background: only wrapped tail photons can land in
    # the center peak
    assert g2.g2_zero_raw < 0.02
    assert g2.g2_zero_corrected <= g2.g2_zero_raw + 1e-12


# -------------------------------------------------------- background

def test_subtract_background_identities():
    assert subtract_background_rho(1.0, 1.0) == 1.0
    assert subtract_background_rho(0.5, 1.0) == 0.5
    # rho=0.96, raw 0.12 -> (0.12 - (1-0.9216))/0.9216
    expect = (0.12 - (1 - 0.96 ** 2)) / 0.96 ** 2
    assert subtract_background_rho(0.12, 0.96) == pytest.approx(expect)
    assert expect == pytest.approx(0.0451388888, abs=1e-6)
    # clamping at zero
    assert subtract_background_rho(0.05, 0.9) == 0.0
    assert subtract_background(0.12, 96.0, 4.0) == \
        pytest.approx(subtract_background_rho(0.12, 0.96))


def test_subtract_background_errors():
    with pytest.raises(errors.ZeroTotalRate):
        subtract_background(0.5, 0.0, 0.0)
    with pytest.raises(errors.InvalidParams):
        subtract_background(0.5, -1.0, 1.0)
    with pytest.raises(errors.ZeroTotalRate):
        subtract_background_rho(0.5, 0.0)


# ---------------------------------------------------------------- envelope

def test_envelope_poisson_flat(rng):
    s = poisson_stream(rng, rate_hz=40_000, duration_s=2.0)
    taus = default_tau_grid(max_tau_s=0.1, min_tau_s=1e-6)
    env = g2_envelope(s, taus)
    assert np.all(np.isfinite(env.values))
    assert np.all(np.abs(env.values - 1.0) < 4 * env.one_sigma + 0.02)


def test_envelope_telegraph_bunching():
    k_on = k_off = 5000.0
    em = EmitterParams(mean_excitons_per_pulse=0.3, qy_exciton=0.9,
                       qy_trion=0.9 * 0.2, qy_biexciton=0.0,
                       blinking=TelegraphBlinking(k_on, k_off))
    det = DetectorParams(efficiency_total=0.05)
    s = simulate_stream(em, det, SimConfig(duration_s=10.0, seed=31))
    taus = default_tau_grid(max_tau_s=0.01, min_tau_s=1e-6)
    env = g2_envelope(s, taus)
    ref = telegraph_envelope(taus, 0.5, 1.0, 0.2, k_on + k_off)
    # bunched at short tau, decays to 1
    assert env.values[0] > 1.05
    assert abs(env.values[-1] - 1.0) < 0.05
    assert np.all(np.abs(env.values - ref) < 5 * env.one_sigma + 0.03)


def test_envelope_errors(rng):
    s = poisson_stream(rng, rate_hz=10_000, duration_s=0.5)
    with pytest.raises(errors.TraceTooShort):
        g2_envelope(s, default_tau_grid(max_tau_s=1.0))
    with pytest.raises(errors.InvalidParams):
        g2_envelope(s, np.array([1e-9, 1e-6]))
    with pytest.raises(errors.EmptyStream):
        g2_envelope(_stream([], meta={"sim": {"duration_s": 1.0}}))


def test_telegraph_envelope_closed_form():
    # p=0.5, I ratio 0 -> amplitude p(1-p)/p^2 = 1 at tau=0
    v0 = telegraph_envelope(0.0, 0.5, 1.0, 0.0, 100.0)
    assert v0 == pytest.approx(2.0)
    v = telegraph_envelope(np.log(2) / 100.0, 0.5, 1.0, 0.0, 100.0)
    assert v == pytest.approx(1.5)


# ---------------------------------------------------------------- threshold

def test_threshold_states_bimodal(rng):
    # synthetic two-state trace: Poisson(40) bright, Poisson(5) grey
    n = 4000
    bright = rng.random(n) < 0.7
    counts = np.where(bright, rng.poisson(40, n), rng.poisson(5, n))
    tr = IntensityTrace(bin_width_s=0.01, counts=counts)
    lab = threshold_states(tr)
    assert 5 < lab.threshold < 40
    assert abs(lab.on_fraction - 0.7) < 0.03
    assert (lab.labels == bright).mean() > 0.99


def test_threshold_states_not_bimodal(rng):
    counts = rng.poisson(20, 2000)
    tr = IntensityTrace(bin_width_s=0.01, counts=counts)
    with pytest.raises(errors.NotBimodal):
        threshold_states(tr)
