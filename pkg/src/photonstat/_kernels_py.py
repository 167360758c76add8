"""Pure numpy/Python fallback kernels.

Same contracts as the compiled extension in ``_fastext.pyx``; selected at
import time by :mod:`photonstat.kernels` when the extension is missing or
``PHOTONSTAT_PURE=1``.
"""

import numpy as np

SPECIAL_BIT = np.uint64(1 << 63)
OVERFLOW_PERIOD = 1 << 30


def decode_words(words):
    """Decode raw 64-bit words into (channel, nsync, microtime) arrays.

    Special (overflow) words advance the nsync base by increment * 2**30
    and produce no photon record.
    """
    words = np.asarray(words, dtype=np.uint64)
    special = (words & SPECIAL_BIT) != 0
    inc = np.where(special, words & np.uint64((1 << 63) - 1), np.uint64(0))
    # photon rows have inc == 0, so the inclusive cumsum is their base
    base = np.cumsum(inc, dtype=np.uint64) * np.uint64(OVERFLOW_PERIOD)
    photon = ~special
    w = words[photon]
    channel = ((w >> np.uint64(58)) & np.uint64(0x1F)).astype(np.uint8)
    offset = (w >> np.uint64(28)) & np.uint64((1 << 30) - 1)
    nsync = base[photon] + offset
    microtime = (w & np.uint64((1 << 28) - 1)).astype(np.uint32)
    return channel, nsync, microtime


def pair_lags(t0, t1, window):
    """All signed delays t1[j] - t0[i] with |delay| <= window.

    Both input arrays must be sorted ascending. Output order is by t0 index,
    then t1 index (callers only histogram it).
    """
    t0 = np.asarray(t0, dtype=np.int64)
    t1 = np.asarray(t1, dtype=np.int64)
    lo = np.searchsorted(t1, t0 - window, side="left")
    hi = np.searchsorted(t1, t0 + window, side="right")
    m = hi - lo
    total = int(m.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    # flat indices into t1 for every (i, j) pair in the window
    starts = np.repeat(lo, m)
    within = np.arange(total) - np.repeat(np.cumsum(m) - m, m)
    lags = t1[starts + within] - np.repeat(t0, m)
    return lags


def dead_time_filter(times, channels, dead_ps, last_seen=None):
    """Keep mask for a per-channel dead-time filter over a time-sorted stream.

    ``last_seen`` optionally carries the last accepted absolute time per
    channel from a previous block (int64 array, updated in place).
    """
    times = np.asarray(times, dtype=np.int64)
    channels = np.asarray(channels, dtype=np.uint8)
    n_ch = int(channels.max()) + 1 if len(channels) else 1
    if last_seen is None:
        last_seen = np.full(n_ch, np.iinfo(np.int64).min // 2, dtype=np.int64)
    keep = np.ones(len(times), dtype=bool)
    dead = int(dead_ps)
    for i in range(len(times)):
        c = channels[i]
        if times[i] - last_seen[c] < dead:
            keep[i] = False
        else:
            last_seen[c] = times[i]
    return keep
