"""Binary photon-stream format (.phst) and the in-memory stream model.

On-disk layout, all little-endian:

    magic "PHST" | version u16 | sync_period_ps u64 | resolution_ps u32 |
    channel_count u8 | record_count u64 | meta_len u32 | meta (UTF-8 JSON) |
    record_count + overflow 64-bit raw words

Raw word: bit 63 = special flag. Special words carry a 63-bit overflow
increment (the nsync base advances by increment * 2**30). Photon words pack
channel (bits 62..58), nsync offset from the current base (bits 57..28) and
microtime (bits 27..0).
"""

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import errors, kernels

MAGIC = b"PHST"
VERSION = 1
HEADER_STRUCT = struct.Struct("<4sHQIBQI")
OVERFLOW_PERIOD = 1 << 30
MICROTIME_LIMIT = 1 << 28
CHANNEL_LIMIT = 1 << 5
SPECIAL_BIT = 1 << 63


@dataclass
class StreamHeader:
    sync_period_ps: int
    resolution_ps: int
    channel_count: int = 2
    record_count: int = 0
    version: int = VERSION
    meta: dict = field(default_factory=dict)

    def validate(self):
        if self.sync_period_ps <= 0 or self.resolution_ps <= 0:
            raise errors.InvalidParams("sync_period_ps and resolution_ps must be > 0")
        if self.sync_period_ps < self.resolution_ps:
            raise errors.InvalidParams("sync_period_ps must be >= resolution_ps")
        if self.channel_count not in (1, 2):
            raise errors.InvalidParams("channel_count must be 1 or 2")


@dataclass
class PhotonStream:
    """Decoded stream: parallel record arrays sorted by (nsync, microtime)."""

    header: StreamHeader
    channel: np.ndarray   # uint8
    nsync: np.ndarray     # uint64
    microtime: np.ndarray  # uint32

    def __len__(self):
        return len(self.nsync)

    def abs_time_ps(self):
        """Absolute arrival times, t = nsync*sync_period + microtime*resolution."""
        return (self.nsync.astype(np.int64) * self.header.sync_period_ps
                + self.microtime.astype(np.int64) * self.header.resolution_ps)

    def duration_s(self):
        """Acquisition span: metadata duration if present, else last record."""
        d = self.header.meta.get("sim", {}).get("duration_s")
        if d is not None:
            return float(d)
        if len(self) == 0:
            return 0.0
        return float(self.abs_time_ps()[-1]) * 1e-12


def make_stream(header, channel, nsync, microtime):
    stream = PhotonStream(
        header=header,
        channel=np.asarray(channel, dtype=np.uint8),
        nsync=np.asarray(nsync, dtype=np.uint64),
        microtime=np.asarray(microtime, dtype=np.uint32),
    )
    stream.header.record_count = len(stream)
    return stream


def _check_records(header, channel, nsync, microtime):
    if len(nsync) == 0:
        return
    if np.any(microtime >= MICROTIME_LIMIT):
        raise errors.MicrotimeOverflow("microtime >= 2**28")
    if np.any(channel >= header.channel_count):
        raise errors.ChannelOutOfRange(
            f"channel >= channel_count ({header.channel_count})")
    dn = np.diff(nsync.astype(np.int64))
    dm = np.diff(microtime.astype(np.int64))
    if np.any(dn < 0) or np.any((dn == 0) & (dm < 0)):
        raise errors.UnsortedRecords("records must be sorted by (nsync, microtime)")


def encode_stream(header, stream_or_records=None, *, channel=None, nsync=None,
                  microtime=None):
    """Serialize header + records to bytes, inserting overflow words only
    where the 30-bit nsync offset requires them."""
    if isinstance(stream_or_records, PhotonStream):
        channel = stream_or_records.channel
        nsync = stream_or_records.nsync
        microtime = stream_or_records.microtime
    elif stream_or_records is not None:
        recs = list(stream_or_records)
        channel = np.array([r[0] for r in recs], dtype=np.uint8)
        nsync = np.array([r[1] for r in recs], dtype=np.uint64)
        microtime = np.array([r[2] for r in recs], dtype=np.uint32)
    channel = np.asarray(channel, dtype=np.uint8)
    nsync = np.asarray(nsync, dtype=np.uint64)
    microtime = np.asarray(microtime, dtype=np.uint32)
    header.validate()
    _check_records(header, channel, nsync, microtime)

    meta_bytes = json.dumps(header.meta, sort_keys=True).encode("utf-8")
    head = HEADER_STRUCT.pack(MAGIC, header.version, header.sync_period_ps,
                              header.resolution_ps, header.channel_count,
                              len(nsync), len(meta_bytes))

    if len(nsync) == 0:
        return head + meta_bytes

    epoch = nsync >> np.uint64(30)
    # overflow words precede the photon word that first needs the new base
    prev = np.concatenate(([0], epoch[:-1].astype(np.int64)))
    inc = epoch.astype(np.int64) - prev
    need = inc > 0
    photon_words = ((channel.astype(np.uint64) << np.uint64(58))
                    | ((nsync & np.uint64(OVERFLOW_PERIOD - 1)) << np.uint64(28))
                    | microtime.astype(np.uint64))
    n_special = int(need.sum())
    out = np.empty(len(nsync) + n_special, dtype=np.uint64)
    # positions of photon words after interleaving the overflow words
    pos = np.arange(len(nsync)) + np.cumsum(need)
    out[pos] = photon_words
    special_pos = pos[need] - 1
    out[special_pos] = np.uint64(SPECIAL_BIT) | inc[need].astype(np.uint64)
    return head + meta_bytes + out.tobytes()


def decode_stream(data):
    """Inverse of encode_stream. Returns a PhotonStream."""
    if len(data) < 4 or data[:4] != MAGIC:
        raise errors.BadMagic("stream does not start with 'PHST'")
    if len(data) < HEADER_STRUCT.size:
        raise errors.TruncatedStream("incomplete header")
    magic, version, sync_period, resolution, channel_count, record_count, meta_len = \
        HEADER_STRUCT.unpack_from(data, 0)
    if version != VERSION:
        raise errors.VersionUnsupported(f"version {version} not supported")
    off = HEADER_STRUCT.size
    if len(data) < off + meta_len:
        raise errors.TruncatedStream("metadata extends past end of stream")
    try:
        meta = json.loads(data[off:off + meta_len].decode("utf-8")) if meta_len else {}
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise errors.TruncatedStream(f"bad metadata: {exc}")
    off += meta_len
    body = data[off:]
    if len(body) % 8 != 0:
        raise errors.TruncatedStream("record section not a multiple of 8 bytes")
    words = np.frombuffer(body, dtype="<u8")
    channel, nsync, microtime = kernels.decode_words(words)
    if len(nsync) != record_count:
        raise errors.TruncatedStream(
            f"header claims {record_count} records, found {len(nsync)}")
    header = StreamHeader(sync_period_ps=sync_period, resolution_ps=resolution,
                          channel_count=channel_count, record_count=record_count,
                          version=version, meta=meta)
    return PhotonStream(header, channel, nsync.astype(np.uint64), microtime)


def merge_channels(stream):
    """(absolute_time_ps, channel) arrays, time-nondecreasing, length-preserving."""
    t = stream.abs_time_ps()
    order = np.argsort(t, kind="stable")
    return t[order], stream.channel[order]


def write_stream(path, stream):
    with open(path, "wb") as fh:
        fh.write(encode_stream(stream.header, stream))


def read_stream(path):
    with open(path, "rb") as fh:
        return decode_stream(fh.read())
