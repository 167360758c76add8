# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: raw record decode, windowed pair delays, dead-time
filter. Contracts identical to the fallbacks in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF OVF_SHIFT = 30
DEF MICRO_MASK = (1 << 28) - 1
DEF OFFSET_MASK = (1 << 30) - 1


def decode_words(object words_in):
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] words = np.ascontiguousarray(words_in, dtype=np.uint64)
    cdef Py_ssize_t n = words.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] channel = np.empty(n, dtype=np.uint8)
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] nsync = np.empty(n, dtype=np.uint64)
    cdef cnp.ndarray[cnp.uint32_t, ndim=1] microtime = np.empty(n, dtype=np.uint32)
    cdef unsigned long long base = 0, w
    cdef Py_ssize_t i, k = 0
    for i in range(n):
        w = words[i]
        if w & (<unsigned long long>1 << 63):
            base += (w & ~(<unsigned long long>1 << 63)) << OVF_SHIFT
        else:
            channel[k] = <unsigned char>((w >> 58) & 0x1F)
            nsync[k] = base + ((w >> 28) & OFFSET_MASK)
            microtime[k] = <unsigned int>(w & MICRO_MASK)
            k += 1
    return channel[:k].copy(), nsync[:k].copy(), microtime[:k].copy()


def pair_lags(object t0_in, object t1_in, long long window):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] t0 = np.ascontiguousarray(t0_in, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] t1 = np.ascontiguousarray(t1_in, dtype=np.int64)
    cdef Py_ssize_t n0 = t0.shape[0], n1 = t1.shape[0]
    cdef Py_ssize_t i, j, lo = 0, hi = 0
    cdef long long ti
    # first pass: count pairs
    cdef Py_ssize_t total = 0
    for i in range(n0):
        ti = t0[i]
        while lo < n1 and t1[lo] < ti - window:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < n1 and t1[hi] <= ti + window:
            hi += 1
        total += hi - lo
    cdef cnp.ndarray[cnp.int64_t, ndim=1] lags = np.empty(total, dtype=np.int64)
    cdef Py_ssize_t k = 0
    lo = 0
    hi = 0
    for i in range(n0):
        ti = t0[i]
        while lo < n1 and t1[lo] < ti - window:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < n1 and t1[hi] <= ti + window:
            hi += 1
        for j in range(lo, hi):
            lags[k] = t1[j] - ti
            k += 1
    return lags


def dead_time_filter(object times_in, object channels_in, long long dead_ps,
                     object last_seen=None):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] times = np.ascontiguousarray(times_in, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] channels = np.ascontiguousarray(channels_in, dtype=np.uint8)
    cdef Py_ssize_t n = times.shape[0]
    cdef Py_ssize_t n_ch = 1
    cdef Py_ssize_t i
    for i in range(n):
        if channels[i] + 1 > n_ch:
            n_ch = channels[i] + 1
    cdef cnp.ndarray[cnp.int64_t, ndim=1] last
    if last_seen is None:
        last = np.full(n_ch, np.iinfo(np.int64).min // 2, dtype=np.int64)
    else:
        last = np.ascontiguousarray(last_seen, dtype=np.int64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] keep = np.ones(n, dtype=np.uint8)
    cdef unsigned char c
    for i in range(n):
        c = channels[i]
        if times[i] - last[c] < dead_ps:
            keep[i] = 0
        else:
            last[c] = times[i]
    if last_seen is not None:
        np.asarray(last_seen)[:] = last[: len(np.asarray(last_seen))]
    return keep.view(np.bool_)
