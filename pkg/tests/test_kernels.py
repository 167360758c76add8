"""The compiled backend and the pure-numpy fallback must agree bit-for-bit."""

import numpy as np
import pytest

from photonstat import _kernels_py, kernels
from photonstat.photon_stream import SPECIAL_BIT, encode_stream

from conftest import random_stream

try:
    from photonstat import _fastext
except ImportError:
    _fastext = None

BACKENDS = [_kernels_py] + ([_fastext] if _fastext is not None else [])


def _raw_words(stream):
    data = encode_stream(stream.header, stream)
    n_head = len(data) - 8 * _count_words(data)
    return np.frombuffer(data[n_head:], dtype="<u8")


def _count_words(data):
    # header is 31 bytes + meta; records are the trailing 8-byte-aligned block
    import struct
    meta_len = struct.unpack_from("<I", data, 27)[0]
    return (len(data) - 31 - meta_len) // 8


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.skipif(_fastext is None, reason="compiled extension unavailable")
def test_decode_words_equivalence(rng):
    for n, span in [(0, 1), (1, 10), (5000, 1 << 28), (200_000, 1 << 34)]:
        s = random_stream(rng, n, max_nsync=span) if n else random_stream(rng, 0)
        words = _raw_words(s)
        got_c = _fastext.decode_words(words)
        got_p = _kernels_py.decode_words(words)
        for a, b in zip(got_c, got_p):
            assert a.dtype == b.dtype or a.dtype.kind == b.dtype.kind
            assert np.array_equal(a, b)


@pytest.mark.skipif(_fastext is None, reason="compiled extension unavailable")
def test_decode_words_specials_only():
    words = np.array([SPECIAL_BIT | 7, SPECIAL_BIT | 1], dtype=np.uint64)
    for mod in BACKENDS:
        ch, ns, mt = mod.decode_words(words)
        assert len(ch) == 0


@pytest.mark.skipif(_fastext is None, reason="compiled extension unavailable")
def test_pair_lags_equivalence(rng):
    for n0, n1, window in [(0, 100, 1000), (100, 0, 1000), (3000, 2500, 50_000),
                           (5000, 5000, 5)]:
        t0 = np.sort(rng.integers(0, 10_000_000, n0)).astype(np.int64)
        t1 = np.sort(rng.integers(0, 10_000_000, n1)).astype(np.int64)
        lags_c = _fastext.pair_lags(t0, t1, window)
        lags_p = _kernels_py.pair_lags(t0, t1, window)
        assert np.array_equal(np.sort(lags_c), np.sort(lags_p))


def test_pair_lags_bruteforce(rng):
    t0 = np.sort(rng.integers(0, 100_000, 300)).astype(np.int64)
    t1 = np.sort(rng.integers(0, 100_000, 280)).astype(np.int64)
    window = 2000
    brute = (t1[None, :] - t0[:, None]).ravel()
    brute = np.sort(brute[np.abs(brute) <= window])
    for mod in BACKENDS:
        got = np.sort(mod.pair_lags(t0, t1, window))
        assert np.array_equal(got, brute)


@pytest.mark.skipif(_fastext is None, reason="compiled extension unavailable")
def test_dead_time_filter_equivalence(rng):
    for n in (0, 1, 10_000):
        t = np.sort(rng.integers(0, 5_000_000, n)).astype(np.int64)
        ch = (rng.random(n) < 0.5).astype(np.uint8)
        for dead in (0, 37, 5000):
            keep_c = _fastext.dead_time_filter(t, ch, dead)
            keep_p = _kernels_py.dead_time_filter(t, ch, dead)
            assert np.array_equal(keep_c, keep_p)


def test_dead_time_filter_semantics():
    # per-channel paralyzable-free dead time: drop events closer than dead
    # to the previously *kept* event on the same channel
    t = np.array([0, 10, 25, 60, 70, 200], dtype=np.int64)
    ch = np.array([0, 0, 0, 1, 0, 0], dtype=np.uint8)
    for mod in BACKENDS:
        keep = mod.dead_time_filter(t, ch, 50)
        assert np.array_equal(np.flatnonzero(keep), [0, 3, 4, 5])


def test_env_forced_pure(rng):
    import subprocess
    import sys
    code = ("import os; os.environ['PHOTONSTAT_PURE']='1'; "
            "from photonstat import kernels; print(kernels.BACKEND)")
    out = subprocess.run([sys.executable, "-c", code], capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip() == "python"
