"""Microtime decay histograms, multi-exponential decay fits, per-bin lifetime
estimation and the lifetime-intensity distribution (FLID)."""

import math
from dataclasses import dataclass

import numpy as np

from . import errors
from .correlation import bin_intensity
from .fitting import FitProblem, fit_nonlinear

PHOTON_FLOOR = 5
MIN_FIT_COUNTS = 1000
MERGE_RATIO = 1.05
N_RESTARTS = 5


@dataclass
class DecayHistogram:
    bin_width_ps: float
    counts: np.ndarray
    total_counts: int
    t0_ps: float               # prompt position (mode of the histogram)
    sync_period_ps: int


@dataclass
class MultiExpFit:
    components: list            # [(amplitude_fraction, lifetime_ns)], tau ascending
    amplitudes: np.ndarray      # raw per-bin amplitudes (counts)
    background_level: float     # flat background per bin
    fit_quality: float          # reduced Poisson deviance
    covariance: np.ndarray
    converged: bool


@dataclass
class FlidGrid:
    lifetime_edges_ns: np.ndarray
    intensity_edges: np.ndarray
    occurrence: np.ndarray      # (n_lifetime_bins + 1, n_intensity_bins); row 0
    flagged_row: int = 0        # accumulates bins below the photon floor


def decay_histogram(stream, bin_width_ps=None):
    """Pooled-channel microtime histogram over [0, sync_period)."""
    if len(stream) == 0:
        raise errors.EmptyStream("empty stream")
    res = stream.header.resolution_ps
    period = stream.header.sync_period_ps
    if bin_width_ps is None:
        bin_width_ps = max(res, period // 4096)
    if bin_width_ps < res:
        raise errors.InvalidParams("bin_width_ps must be >= resolution_ps")
    bw = int(bin_width_ps)
    n_bins = (period + bw - 1) // bw
    micro_ps = stream.microtime.astype(np.int64) * res
    counts = np.bincount(micro_ps // bw, minlength=n_bins)
    t0 = float(np.argmax(counts) * bw)
    return DecayHistogram(bin_width_ps=float(bw), counts=counts,
                          total_counts=int(counts.sum()), t0_ps=t0,
                          sync_period_ps=period)


def _multiexp_model(times_ns):
    def model(params, _x):
        n = (len(params) - 1) // 2
        amps = params[:n]
        taus = params[n:2 * n]
        c = params[-1]
        return amps @ np.exp(-times_ns[None, :] / taus[:, None]) + c
    return model


def fit_multiexp(hist: DecayHistogram, n_components, fit_start_offset_ps=0.0,
                 objective="poisson_mle", rng_seed=0) -> MultiExpFit:
    """Tail fit of sum_i a_i exp(-t/tau_i) + c by Poisson MLE (default).

    Fits bins after t0 + offset; multi-start from log-spaced lifetimes with
    jittered restarts, best objective wins. Amplitude fractions come from
    integrated component areas a_i*tau_i. A least-squares objective is
    available for cross-checking.
    """
    if not 1 <= n_components <= 4:
        raise errors.InvalidParams("n_components must be in [1, 4]")
    bw = hist.bin_width_ps
    centers = np.arange(len(hist.counts)) * bw + bw / 2
    start = hist.t0_ps + fit_start_offset_ps
    sel = centers >= start
    y = hist.counts[sel].astype(float)
    if y.sum() < MIN_FIT_COUNTS:
        raise errors.InsufficientCounts(
            f"{int(y.sum())} photons in fit range, need >= {MIN_FIT_COUNTS}")
    t_ns = (centers[sel] - centers[sel][0]) * 1e-3
    model = _multiexp_model(t_ns)

    n = n_components
    tau_lo = bw * 1e-3
    tau_hi = hist.sync_period_ps / 2 * 1e-3
    m = float((y * t_ns).sum() / y.sum())       # crude decay-scale seed
    if n == 1:
        tau_init = np.array([min(max(m, tau_lo * 2), tau_hi)])
    else:
        tau_init = np.geomspace(max(2 * tau_lo, m / 10),
                                min(tau_hi / 2, m * 10), n)
    c0 = max(float(np.mean(y[-max(len(y) // 20, 3):])), 1e-6)
    a0 = np.full(n, max((y[0] - c0), 1.0) / n)

    lo = np.concatenate([np.zeros(n), np.full(n, tau_lo * 0.1), [0.0]])
    hi = np.concatenate([np.full(n, np.inf), np.full(n, tau_hi * 20), [np.inf]])

    rng = np.random.default_rng(rng_seed)
    best = None
    sig = np.sqrt(np.maximum(y, 1.0))
    for trial in range(N_RESTARTS):
        taus = tau_init if trial == 0 else tau_init * rng.lognormal(0.0, 0.4, n)
        taus = np.clip(np.sort(taus), tau_lo * 0.2, tau_hi * 10)
        p0 = np.concatenate([a0, taus, [c0]])
        problem = FitProblem(model=model, x=t_ns, y=y, p0=p0, sigma=sig,
                             bounds=(lo, hi), objective=objective)
        try:
            res = fit_nonlinear(problem)
        except errors.SingularCurvature:
            continue
        if not np.all(np.isfinite(res.params)):
            continue
        if best is None or res.objective_value < best.objective_value:
            best = res
    if best is None or not np.isfinite(best.objective_value):
        raise errors.FitDiverged("all restarts failed")

    amps = np.array(best.params[:n])
    taus = np.array(best.params[n:2 * n])
    c = float(best.params[-1])
    amps, taus = _merge_close(amps, taus)

    areas = amps * taus
    total = areas.sum()
    fractions = areas / total if total > 0 else np.zeros_like(areas)
    components = [(float(f), float(tau)) for f, tau in zip(fractions, taus)]

    mu = np.maximum(model(best.params, None), 1e-12)
    with np.errstate(divide="ignore", invalid="ignore"):
        dev = 2.0 * np.sum(np.where(y > 0, y * np.log(y / mu), 0.0) - (y - mu))
    dof = max(len(y) - len(best.params), 1)
    return MultiExpFit(components=components, amplitudes=amps,
                       background_level=c, fit_quality=float(dev / dof),
                       covariance=best.covariance, converged=best.converged)


def _merge_close(amps, taus):
    """Merge components whose lifetimes agree within 5%."""
    order = np.argsort(taus)
    amps, taus = amps[order], taus[order]
    out_a, out_t = [amps[0]], [taus[0]]
    for a, t in zip(amps[1:], taus[1:]):
        if t <= out_t[-1] * MERGE_RATIO:
            w = out_a[-1] + a
            if w > 0:
                out_t[-1] = (out_a[-1] * out_t[-1] + a * t) / w
            out_a[-1] = w
        else:
            out_a.append(a)
            out_t.append(t)
    return np.array(out_a), np.array(out_t)


def truncated_exp_mean(tau, T):
    """Mean of Exp(tau) truncated to [0, T]."""
    if tau <= 0:
        return 0.0
    r = T / tau
    if r > 700:
        return tau
    return tau - T * math.exp(-r) / -math.expm1(-r)


def bin_lifetime_estimate(microtimes_ps, t0_ps, sync_period_ps,
                          photon_floor=PHOTON_FLOOR):
    """Truncated-exponential MLE for the lifetime (ns) of one time bin.

    Solves mean(delay) = tau - T*exp(-T/tau)/(1 - exp(-T/tau)) for tau by
    bisection to 0.1% relative, with T the truncation span after t0.
    """
    d = np.asarray(microtimes_ps, dtype=float) - t0_ps
    if len(d) < photon_floor:
        raise errors.TooFewPhotons(f"{len(d)} photons, need >= {photon_floor}")
    m = float(d.mean())
    if m < 0:
        raise errors.NonPositiveDelays("mean delay < 0; t0 misestimated?")
    if m == 0:
        return 0.0      # all photons at the prompt; below any bin-width floor
    T = float(sync_period_ps - t0_ps)
    if m >= T / 2:
        # estimator unbounded in the flat limit; report the bracket top
        return 1e3 * T * 1e-3
    lo, hi = 1e-6 * T, 1e3 * T
    while hi / lo > 1.001:
        mid = math.sqrt(lo * hi)
        if truncated_exp_mean(mid, T) < m:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi) * 1e-3   # ps -> ns


def _per_bin_estimates(stream, bin_width_s, t0_ps, photon_floor):
    """(counts, lifetimes_ns) per time bin; lifetime is NaN below the floor
    or when delays are non-positive."""
    trace = bin_intensity(stream, bin_width_s)
    width_ps = bin_width_s * 1e12
    t = stream.abs_time_ps()
    idx = (t / width_ps).astype(np.int64)
    micro_ps = stream.microtime.astype(np.int64) * stream.header.resolution_ps
    n_bins = len(trace.counts)
    ok = idx < n_bins
    idx, micro_ps = idx[ok], micro_ps[ok]
    order = np.argsort(idx, kind="stable")
    idx, micro_ps = idx[order], micro_ps[order]
    starts = np.searchsorted(idx, np.arange(n_bins + 1))
    lifetimes = np.full(n_bins, np.nan)
    period = stream.header.sync_period_ps
    for b in range(n_bins):
        chunk = micro_ps[starts[b]:starts[b + 1]]
        if len(chunk) < photon_floor:
            continue
        try:
            lifetimes[b] = bin_lifetime_estimate(chunk, t0_ps, period,
                                                 photon_floor)
        except errors.NonPositiveDelays:
            pass
    return trace.counts, lifetimes


def build_flid(stream, bin_width_s=0.005, lifetime_bins=40, intensity_bins=40,
               t0_ps=None, photon_floor=PHOTON_FLOOR,
               lifetime_range_ns=None) -> FlidGrid:
    """2D occurrence over (per-bin lifetime, per-bin intensity).

    Bins below the photon floor accumulate in the flagged first row (the
    low-intensity background region).
    """
    if len(stream) == 0:
        raise errors.EmptyStream("empty stream")
    if lifetime_bins < 2 or intensity_bins < 2:
        raise errors.InvalidParams("need >= 2 bins on each axis")
    if t0_ps is None:
        t0_ps = decay_histogram(stream).t0_ps
    counts, lifetimes = _per_bin_estimates(stream, bin_width_s, t0_ps,
                                           photon_floor)
    usable = np.isfinite(lifetimes)
    if lifetime_range_ns is None:
        if usable.any():
            lt_max = float(np.quantile(lifetimes[usable], 0.995)) * 1.2
        else:
            lt_max = stream.header.sync_period_ps * 1e-3
        lifetime_range_ns = (0.0, max(lt_max, 1e-3))
    lt_edges = np.linspace(*lifetime_range_ns, lifetime_bins + 1)
    i_edges = np.linspace(0, counts.max() + 1, intensity_bins + 1)

    occ = np.zeros((lifetime_bins + 1, intensity_bins), dtype=np.int64)
    i_idx = np.clip(np.digitize(counts, i_edges) - 1, 0, intensity_bins - 1)
    # flagged row 0: no usable lifetime estimate
    np.add.at(occ[0], i_idx[~usable], 1)
    lt_idx = np.clip(np.digitize(lifetimes[usable], lt_edges) - 1,
                     0, lifetime_bins - 1)
    np.add.at(occ, (lt_idx + 1, i_idx[usable]), 1)
    return FlidGrid(lifetime_edges_ns=lt_edges, intensity_edges=i_edges,
                    occurrence=occ)


def intensity_lifetime_correlation(stream, bin_width_s=0.005, t0_ps=None,
                                   photon_floor=PHOTON_FLOOR,
                                   min_bins=100):
    """Pearson correlation of per-bin intensity vs per-bin lifetime."""
    if len(stream) == 0:
        raise errors.EmptyStream("empty stream")
    if t0_ps is None:
        t0_ps = decay_histogram(stream).t0_ps
    counts, lifetimes = _per_bin_estimates(stream, bin_width_s, t0_ps,
                                           photon_floor)
    usable = np.isfinite(lifetimes)
    if usable.sum() < min_bins:
        raise errors.InsufficientBins(
            f"{int(usable.sum())} usable bins, need >= {min_bins}")
    return float(np.corrcoef(counts[usable], lifetimes[usable])[0, 1])
