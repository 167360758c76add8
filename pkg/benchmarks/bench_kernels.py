"""Benchmark the compiled kernels against the pure-numpy fallbacks.

Usage: python benchmarks/bench_kernels.py [n_records]
"""

import sys
import time

import numpy as np

from photonstat import _kernels_py, kernels
from photonstat.photon_stream import StreamHeader, encode_stream, make_stream

try:
    from photonstat import _fastext
except ImportError:
    _fastext = None


def timeit(fn, *args, repeats=5):
    fn(*args)   # warm-up
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def build_inputs(n, rng):
    nsync = rng.integers(0, n * 20, n).astype(np.uint64)
    micro = rng.integers(0, 25_000, n).astype(np.uint32)
    order = np.lexsort((micro, nsync))
    nsync, micro = nsync[order], micro[order]
    channel = (rng.random(n) < 0.5).astype(np.uint8)
    header = StreamHeader(sync_period_ps=400_000, resolution_ps=16)
    stream = make_stream(header, channel, nsync, micro)
    data = encode_stream(header, stream)
    # recover exactly the record block (encode may insert overflow words)
    import struct
    meta_len = struct.unpack_from("<I", data, 27)[0]
    words = np.frombuffer(data[31 + meta_len:], dtype="<u8")

    t_abs = stream.abs_time_ps()
    t0 = np.sort(t_abs[channel == 0])
    t1 = np.sort(t_abs[channel == 1])
    return words, t_abs, channel, t0, t1


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 2_000_000
    rng = np.random.default_rng(12)
    words, t_abs, channel, t0, t1 = build_inputs(n, rng)
    window = int(20.5 * 400_000)

    backends = [("python", _kernels_py)]
    if _fastext is not None:
        backends.append(("cython", _fastext))
    print(f"records: {n}; active backend: {kernels.BACKEND}\n")
    print(f"{'kernel':<18}{'backend':<10}{'time':>10}{'throughput':>16}")
    for name, args, unit in (
            ("decode_words", (words,), "records"),
            ("pair_lags", (t0, t1, window), "ch0 events"),
            ("dead_time_filter", (t_abs, channel, 50_000), "records")):
        for bname, mod in backends:
            dt = timeit(getattr(mod, name), *args)
            count = len(args[0])
            print(f"{name:<18}{bname:<10}{dt * 1e3:>8.1f} ms"
                  f"{count / dt / 1e6:>10.1f} M {unit}/s")
        print()


if __name__ == "__main__":
    main()
