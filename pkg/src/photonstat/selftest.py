"""Built-in oracle-equivalence and analytic-limit checks (CLI `selftest`)."""

import sys

import numpy as np

from . import correlation, emitter, photon_stream
from .photon_stream import StreamHeader, make_stream


def _random_stream(rng, n_records=5000, period=400_000, res=16):
    nsync = np.sort(rng.integers(0, 200_000, n_records).astype(np.uint64))
    micro = rng.integers(0, period // res, n_records).astype(np.uint32)
    order = np.lexsort((micro, nsync))
    channel = (rng.random(n_records) < 0.5).astype(np.uint8)
    header = StreamHeader(sync_period_ps=period, resolution_ps=res)
    return make_stream(header, channel, nsync[order], micro[order])


def run(quiet=False):
    checks = []

    def check(name, fn):
        try:
            fn()
            checks.append((name, True, ""))
        except Exception as exc:  # report, don't abort the suite
            checks.append((name, False, f"{type(exc).__name__}: {exc}"))

    def codec_roundtrip():
        rng = np.random.default_rng(7)
        s = _random_stream(rng, 20_000)
        out = photon_stream.decode_stream(
            photon_stream.encode_stream(s.header, s))
        assert np.array_equal(out.nsync, s.nsync)
        assert np.array_equal(out.microtime, s.microtime)
        assert np.array_equal(out.channel, s.channel)

    def g2_oracle_equivalence():
        rng = np.random.default_rng(11)
        for _ in range(10):
            s = _random_stream(rng, 4000)
            fast = correlation.g2_pulsed(s, intra_window_ps=50_000)
            ref = correlation.g2_pulsed_bruteforce(s, intra_window_ps=50_000)
            assert np.array_equal(fast.counts, ref.counts)
            assert np.array_equal(fast.peak_areas, ref.peak_areas)

    def rate_oracle():
        em = emitter.EmitterParams(mean_excitons_per_pulse=1.0, qy_exciton=0.8,
                                   qy_biexciton=0.0)
        det = emitter.DetectorParams(efficiency_total=0.05)
        cfg = emitter.SimConfig(duration_s=2.0, seed=5)
        s = emitter.simulate_stream(em, det, cfg)
        mu = emitter.expected_rate(em, det, cfg) * cfg.duration_s
        assert abs(len(s) - mu) < 4 * np.sqrt(mu), (len(s), mu)

    def background_subtraction_identities():
        assert correlation.subtract_background(0.5, 1.0, 0.0) == 0.5
        assert abs(correlation.subtract_background(1.0, 3.0, 1.0) - 1.0) < 1e-12

    def antibunching_limit():
        em = emitter.EmitterParams(mean_excitons_per_pulse=0.4, qy_biexciton=0.0)
        det = emitter.DetectorParams(efficiency_total=0.2)
        s = emitter.simulate_stream(em, det, emitter.SimConfig(duration_s=1.0, seed=3))
        g2 = correlation.g2_pulsed(s)
        assert g2.center_peak_area == 0

    check("codec round-trip bit-exact", codec_roundtrip)
    check("sliding-window g2 equals brute force", g2_oracle_equivalence)
    check("simulated rate matches analytic oracle", rate_oracle)
    check("background subtraction identities", background_subtraction_identities)
    check("antibunching zero center peak", antibunching_limit)

    failures = 0
    for name, ok, msg in checks:
        if not ok:
            failures += 1
        if not quiet:
            status = "PASS" if ok else f"FAIL ({msg})"
            sys.stdout.write(f"[selftest] {name}: {status}\n")
    return failures
