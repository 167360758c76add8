import numpy as np
import pytest

from photonstat.photon_stream import StreamHeader, make_stream

PERIOD = 400_000
RES = 16


def random_stream(rng, n_records=5000, max_nsync=200_000, period=PERIOD,
                  res=RES, meta=None):
    """Two-channel stream with random sorted records."""
    nsync = np.sort(rng.integers(0, max_nsync, n_records).astype(np.uint64))
    micro = rng.integers(0, period // res, n_records).astype(np.uint32)
    order = np.lexsort((micro, nsync))
    channel = (rng.random(n_records) < 0.5).astype(np.uint8)
    header = StreamHeader(sync_period_ps=period, resolution_ps=res,
                          meta=meta or {})
    return make_stream(header, channel, nsync[order], micro[order])


def poisson_stream(rng, rate_hz, duration_s, period=PERIOD, res=RES):
    """Two independent Poisson channels at rate_hz each; dark-count analogue."""
    parts = []
    for c in (0, 1):
        n = rng.poisson(rate_hz * duration_s)
        t = np.sort(rng.integers(0, int(duration_s * 1e12), n))
        parts.append((np.full(n, c, np.uint8), t // period,
                      (t % period) // res))
    channel = np.concatenate([p[0] for p in parts])
    nsync = np.concatenate([p[1] for p in parts])
    micro = np.concatenate([p[2] for p in parts]).astype(np.uint32)
    order = np.lexsort((micro, nsync))
    header = StreamHeader(sync_period_ps=period, resolution_ps=res,
                          meta={"sim": {"duration_s": duration_s}})
    return make_stream(header, channel[order], nsync[order], micro[order])


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(2024)
