"""Monte Carlo photon-stream generator for a blinking pulsed emitter.

Physical model, per excitation pulse: n ~ Poisson(mean_excitons_per_pulse)
absorbed excitons. In the neutral state the multi-exciton ladder collapses
to the biexciton (states with n > 2 relax non-radiatively and instantly),
which emits with probability qy_biexciton at delay ~ Exp(tau_biexciton),
followed by the exciton step (qy_exciton, additional Exp(tau_exciton)).
In the charged (trion) state a single recombination step runs with
(qy_trion, tau_trion). The bright/grey state follows a continuous-time
blinking process. Detection: efficiency thinning, beamsplitter routing,
Gaussian timing jitter, microtime quantization, per-channel dead time,
plus homogeneous dark counts on each channel.
"""

import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from . import errors, kernels
from .photon_stream import StreamHeader, make_stream

_CHUNK_PULSES = 1 << 23


@dataclass(frozen=True)
class TelegraphBlinking:
    """Two-state Markov switching; k_on is the grey->bright rate."""
    k_on_per_s: float
    k_off_per_s: float

    def validate(self):
        if self.k_on_per_s <= 0 or self.k_off_per_s <= 0:
            raise errors.InvalidParams("telegraph rates must be > 0")

    @property
    def p_neutral(self):
        return self.k_on_per_s / (self.k_on_per_s + self.k_off_per_s)


@dataclass(frozen=True)
class PowerLawBlinking:
    """Alternating on/off durations from truncated Pareto distributions."""
    alpha_on: float
    alpha_off: float
    t_min_s: float
    t_max_s: float

    def validate(self):
        if not (1.0 < self.alpha_on < 3.0 and 1.0 < self.alpha_off < 3.0):
            raise errors.InvalidParams("power-law exponents must lie in (1, 3)")
        if not (0 < self.t_min_s < self.t_max_s):
            raise errors.InvalidParams("need 0 < t_min_s < t_max_s")


@dataclass(frozen=True)
class EmitterParams:
    mean_excitons_per_pulse: float
    tau_exciton_ns: float = 15.3
    qy_exciton: float = 0.9
    tau_trion_ns: float = 2.8
    qy_trion: float = 0.09
    qy_biexciton: float = 0.0
    blinking: Optional[object] = None  # None, TelegraphBlinking or PowerLawBlinking
    tau_biexciton_ns: Optional[float] = None  # default tau_exciton / 4

    def validate(self):
        if self.mean_excitons_per_pulse < 0:
            raise errors.InvalidParams("mean_excitons_per_pulse must be >= 0")
        for name in ("tau_exciton_ns", "tau_trion_ns"):
            if getattr(self, name) <= 0:
                raise errors.InvalidParams(f"{name} must be > 0")
        for name in ("qy_exciton", "qy_trion", "qy_biexciton"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise errors.InvalidParams(f"{name} must lie in [0, 1]")
        if self.tau_biexciton_ns is not None and self.tau_biexciton_ns <= 0:
            raise errors.InvalidParams("tau_biexciton_ns must be > 0")
        if self.blinking is not None:
            self.blinking.validate()

    @property
    def tau_bx_ns(self):
        return self.tau_biexciton_ns if self.tau_biexciton_ns is not None \
            else self.tau_exciton_ns / 4.0


@dataclass(frozen=True)
class DetectorParams:
    efficiency_total: float = 1.0
    split_ratio: float = 0.5
    jitter_sigma_ps: float = 0.0
    dead_time_ns: float = 0.0
    dark_rate_hz: float = 0.0

    def validate(self):
        if not 0.0 <= self.efficiency_total <= 1.0:
            raise errors.InvalidParams("efficiency_total must lie in [0, 1]")
        if not 0.0 <= self.split_ratio <= 1.0:
            raise errors.InvalidParams("split_ratio must lie in [0, 1]")
        if self.jitter_sigma_ps < 0 or self.dead_time_ns < 0 or self.dark_rate_hz < 0:
            raise errors.InvalidParams("jitter, dead time and dark rate must be >= 0")


@dataclass(frozen=True)
class SimConfig:
    duration_s: float
    sync_period_ps: int = 400_000   # 2.5 MHz repetition
    resolution_ps: int = 16
    seed: int = 0

    def validate(self):
        if self.duration_s <= 0:
            raise errors.InvalidParams("duration_s must be > 0")
        if self.sync_period_ps <= 0 or self.resolution_ps <= 0 \
                or self.sync_period_ps < self.resolution_ps:
            raise errors.InvalidParams("bad sync_period_ps / resolution_ps")


def _blinking_segments(blinking, duration_s, rng):
    """Switching times and states over [0, duration].

    Returns (boundaries_s, states) where states[i] holds on
    [boundaries[i], boundaries[i+1]); boundaries[0] = 0. State 1 = neutral.
    """
    if blinking is None:
        return np.array([0.0]), np.array([1], dtype=np.int8)
    bounds = [0.0]
    states = []
    if isinstance(blinking, TelegraphBlinking):
        state = 1 if rng.random() < blinking.p_neutral else 0
        t = 0.0
        while t < duration_s:
            states.append(state)
            rate = blinking.k_off_per_s if state == 1 else blinking.k_on_per_s
            t += rng.exponential(1.0 / rate)
            bounds.append(t)
            state = 1 - state
        return np.array(bounds[:-1]), np.array(states, dtype=np.int8)
    if isinstance(blinking, PowerLawBlinking):
        state = int(rng.random() < 0.5)
        t = 0.0
        while t < duration_s:
            states.append(state)
            alpha = blinking.alpha_on if state == 1 else blinking.alpha_off
            t += _truncated_pareto(rng, alpha, blinking.t_min_s, blinking.t_max_s)
            bounds.append(t)
            state = 1 - state
        return np.array(bounds[:-1]), np.array(states, dtype=np.int8)
    raise errors.InvalidParams(f"unknown blinking model {type(blinking).__name__}")


def _truncated_pareto(rng, alpha, t_min, t_max):
    # inverse-CDF sampling of p(t) ~ t^-alpha on [t_min, t_max]
    u = rng.random()
    a1 = 1.0 - alpha
    lo, hi = t_min ** a1, t_max ** a1
    return (lo + u * (hi - lo)) ** (1.0 / a1)


def simulate_stream(emitter: EmitterParams, detector: DetectorParams,
                    cfg: SimConfig):
    """Generate a two-channel photon stream; deterministic for a fixed seed."""
    emitter.validate()
    detector.validate()
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)

    period = cfg.sync_period_ps
    res = cfg.resolution_ps
    n_pulses = int(cfg.duration_s * 1e12 // period)
    if n_pulses < 1:
        raise errors.InvalidParams("duration shorter than one sync period")
    duration_ps = n_pulses * period

    seg_bounds_s, seg_states = _blinking_segments(emitter.blinking,
                                                  cfg.duration_s, rng)
    seg_bounds_pulse = seg_bounds_s * 1e12 / period

    mean_n = emitter.mean_excitons_per_pulse
    p_occ = -math.expm1(-mean_n)                       # P(n >= 1)
    p_multi = 0.0
    if p_occ > 0:
        p_multi = (p_occ - mean_n * math.exp(-mean_n)) / p_occ  # P(n>=2 | n>=1)

    tau_x = emitter.tau_exciton_ns * 1e3    # ps
    tau_t = emitter.tau_trion_ns * 1e3
    tau_bx = emitter.tau_bx_ns * 1e3

    all_ch, all_ns, all_mt = [], [], []

    for chunk_start in range(0, n_pulses, _CHUNK_PULSES):
        chunk_len = min(_CHUNK_PULSES, n_pulses - chunk_start)

        pulse_idx = _occupied_pulses(rng, chunk_len, p_occ)
        if len(pulse_idx):
            pulse_idx = pulse_idx + chunk_start
            multi = rng.random(len(pulse_idx)) < p_multi
            seg = np.searchsorted(seg_bounds_pulse, pulse_idx + 0.5,
                                  side="right") - 1
            neutral = seg_states[seg] == 1

            src_pulse, delays = [], []

            nm = neutral & multi
            if nm.any():
                t_bx = rng.exponential(tau_bx, int(nm.sum()))
                emit_bx = rng.random(len(t_bx)) < emitter.qy_biexciton
                emit_x = rng.random(len(t_bx)) < emitter.qy_exciton
                t_x = t_bx + rng.exponential(tau_x, len(t_bx))
                p = pulse_idx[nm]
                src_pulse += [p[emit_bx], p[emit_x]]
                delays += [t_bx[emit_bx], t_x[emit_x]]

            ns = neutral & ~multi
            if ns.any():
                k = int(ns.sum())
                emit = rng.random(k) < emitter.qy_exciton
                t = rng.exponential(tau_x, k)
                src_pulse.append(pulse_idx[ns][emit])
                delays.append(t[emit])

            ch = ~neutral
            if ch.any():
                k = int(ch.sum())
                emit = rng.random(k) < emitter.qy_trion
                t = rng.exponential(tau_t, k)
                src_pulse.append(pulse_idx[ch][emit])
                delays.append(t[emit])

            src_pulse = np.concatenate(src_pulse) if src_pulse else np.empty(0, np.int64)
            delays = np.concatenate(delays) if delays else np.empty(0)

            # detection thinning + routing
            keep = rng.random(len(delays)) < detector.efficiency_total
            src_pulse, delays = src_pulse[keep], delays[keep]
            channel = (rng.random(len(delays)) >= detector.split_ratio).astype(np.uint8)
            if detector.jitter_sigma_ps > 0 and len(delays):
                delays = delays + rng.normal(0.0, detector.jitter_sigma_ps,
                                             len(delays))
                delays = np.maximum(delays, 0.0)
            # delays past the sync period wrap into later pulses
            extra, micro_ps = np.divmod(delays, float(period))
            nsync = src_pulse.astype(np.int64) + extra.astype(np.int64)
            micro = (micro_ps / res).astype(np.uint32)
            ok = nsync < n_pulses
            all_ch.append(channel[ok])
            all_ns.append(nsync[ok])
            all_mt.append(micro[ok])

        # dark counts, uniform over the chunk span, per channel
        if detector.dark_rate_hz > 0:
            span_ps = chunk_len * period
            for c in (0, 1):
                nd = rng.poisson(detector.dark_rate_hz * span_ps * 1e-12)
                if nd == 0:
                    continue
                t = rng.integers(0, span_ps, nd) + chunk_start * period
                all_ch.append(np.full(nd, c, dtype=np.uint8))
                all_ns.append(t // period)
                all_mt.append(((t % period) // res).astype(np.uint32))

    channel = np.concatenate(all_ch) if all_ch else np.empty(0, np.uint8)
    nsync = np.concatenate(all_ns) if all_ns else np.empty(0, np.int64)
    micro = np.concatenate(all_mt) if all_mt else np.empty(0, np.uint32)

    order = np.lexsort((channel, micro, nsync))
    channel, nsync, micro = channel[order], nsync[order], micro[order]

    if detector.dead_time_ns > 0 and len(nsync):
        t_abs = nsync * period + micro.astype(np.int64) * res
        keep = kernels.dead_time_filter(t_abs, channel,
                                        int(detector.dead_time_ns * 1e3))
        channel, nsync, micro = channel[keep], nsync[keep], micro[keep]

    header = StreamHeader(
        sync_period_ps=period, resolution_ps=res, channel_count=2,
        meta={
            "emitter_params": _emitter_meta(emitter),
            "detector_params": asdict(detector),
            "sim": {"duration_s": cfg.duration_s, "n_pulses": n_pulses},
            "seed": cfg.seed,
        },
    )
    return make_stream(header, channel, nsync.astype(np.uint64), micro)


def _occupied_pulses(rng, chunk_len, p_occ):
    """Indices of pulses with n >= 1 excitons, via geometric gap sampling."""
    if p_occ <= 0:
        return np.empty(0, dtype=np.int64)
    if p_occ >= 1.0:
        return np.arange(chunk_len, dtype=np.int64)
    out = []
    pos = -1
    est = int(chunk_len * p_occ * 1.05) + 16
    while True:
        gaps = rng.geometric(p_occ, est)
        idx = pos + np.cumsum(gaps)
        inside = idx < chunk_len
        out.append(idx[inside])
        if not inside.all():
            break
        pos = int(idx[-1])
        est = max(16, int((chunk_len - pos) * p_occ * 1.05) + 16)
    return np.concatenate(out).astype(np.int64)


def _emitter_meta(emitter):
    d = asdict(emitter)
    b = emitter.blinking
    if b is None:
        d["blinking"] = None
    elif isinstance(b, TelegraphBlinking):
        d["blinking"] = {"model": "telegraph", **asdict(b)}
    else:
        d["blinking"] = {"model": "power_law", **asdict(b)}
    return d


def expected_rate(emitter: EmitterParams, detector: DetectorParams,
                  cfg: SimConfig):
    """Closed-form mean detected rate (counts/s, both channels), ignoring
    dead-time losses. Analytic oracle for the simulator."""
    emitter.validate()
    detector.validate()
    cfg.validate()
    if emitter.blinking is None:
        p_neutral = 1.0
    elif isinstance(emitter.blinking, TelegraphBlinking):
        p_neutral = emitter.blinking.p_neutral
    else:
        raise errors.UnsupportedBlinkingModel(
            "power-law blinking has no stationary closed form")
    mean_n = emitter.mean_excitons_per_pulse
    p_occ = -math.expm1(-mean_n)
    p_multi_abs = p_occ - mean_n * math.exp(-mean_n)   # P(n >= 2)
    rep_rate = 1e12 / cfg.sync_period_ps
    per_pulse = (p_neutral * (p_occ * emitter.qy_exciton
                              + p_multi_abs * emitter.qy_biexciton)
                 + (1.0 - p_neutral) * p_occ * emitter.qy_trion)
    return rep_rate * per_pulse * detector.efficiency_total \
        + 2.0 * detector.dark_rate_hz
