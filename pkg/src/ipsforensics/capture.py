"""Classic pcap reading, writing and replay.

Only microsecond-resolution files with linktype 1 (Ethernet) are accepted.
"""
from __future__ import annotations

import struct
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, List, NamedTuple

from .errors import (BadMagic, IoFailure, SinkError, TruncatedCapture,
                     UnsupportedLinktype)

MAGIC = 0xA1B2C3D4
MAGIC_NANO = 0xA1B23C4D
LINKTYPE_ETHERNET = 1
SNAPLEN = 65535

_NATIVE = "<" if sys.byteorder == "little" else ">"
_SWAPPED = ">" if _NATIVE == "<" else "<"


@dataclass(frozen=True)
class CaptureRecord:
    ts_sec: int
    ts_usec: int
    orig_len: int
    data: bytes

    @property
    def incl_len(self) -> int:
        return len(self.data)

    @property
    def time_us(self) -> int:
        return self.ts_sec * 1_000_000 + self.ts_usec


@dataclass
class CaptureFile:
    records: List[CaptureRecord] = field(default_factory=list)
    linktype: int = LINKTYPE_ETHERNET
    # "native" = magic reads as 0xa1b2c3d4 in host order, "swapped" otherwise
    byte_order: str = "native"

    def __len__(self):
        return len(self.records)


def _endian(byte_order: str) -> str:
    return _NATIVE if byte_order == "native" else _SWAPPED


def parse_capture(blob: bytes) -> CaptureFile:
    if len(blob) < 4:
        raise BadMagic("file too short for a capture magic number")
    (magic,) = struct.unpack_from(_NATIVE + "I", blob)
    if magic == MAGIC:
        order = "native"
    elif magic == struct.unpack(_SWAPPED + "I", struct.pack(_NATIVE + "I", MAGIC))[0]:
        order = "swapped"
    elif magic in (MAGIC_NANO, struct.unpack(">I", struct.pack("<I", MAGIC_NANO))[0]):
        raise BadMagic("nanosecond-resolution captures are not supported")
    else:
        raise BadMagic(f"unrecognised capture magic 0x{magic:08x}")
    e = _endian(order)
    if len(blob) < 24:
        raise TruncatedCapture(-1, "capture global header is cut short")
    _, _major, _minor, _zone, _sigfigs, _snaplen, linktype = struct.unpack_from(
        e + "IHHiIII", blob)
    if linktype != LINKTYPE_ETHERNET:
        raise UnsupportedLinktype(f"linktype {linktype} (only Ethernet, 1, is supported)")
    records = []
    offset = 24
    head = struct.Struct(e + "IIII")
    while offset < len(blob):
        index = len(records)
        if offset + 16 > len(blob):
            raise TruncatedCapture(index)
        ts_sec, ts_usec, incl, orig = head.unpack_from(blob, offset)
        offset += 16
        if offset + incl > len(blob):
            raise TruncatedCapture(index)
        records.append(CaptureRecord(ts_sec, ts_usec, orig, bytes(blob[offset:offset + incl])))
        offset += incl
    return CaptureFile(records, linktype, order)


def read_capture(path) -> CaptureFile:
    with open(path, "rb") as fh:
        return parse_capture(fh.read())


def serialize_capture(capture: CaptureFile) -> bytes:
    if capture.linktype != LINKTYPE_ETHERNET:
        raise UnsupportedLinktype(f"cannot write linktype {capture.linktype}")
    e = _endian(capture.byte_order)
    out = [struct.pack(e + "IHHiIII", MAGIC, 2, 4, 0, 0, SNAPLEN, LINKTYPE_ETHERNET)]
    head = struct.Struct(e + "IIII")
    for rec in capture.records:
        out.append(head.pack(rec.ts_sec, rec.ts_usec, len(rec.data), rec.orig_len))
        out.append(rec.data)
    return b"".join(out)


def write_capture(capture: CaptureFile, path) -> None:
    blob = serialize_capture(capture)
    try:
        with open(path, "wb") as fh:
            fh.write(blob)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


@dataclass(frozen=True)
class ReplayClock:
    mode: str = "fast"  # fast | realtime | scaled
    factor: float = 1.0

    def __post_init__(self):
        if self.mode not in ("fast", "realtime", "scaled"):
            raise ValueError(f"unknown clock mode {self.mode!r}")
        if self.factor <= 0:
            raise ValueError("scale factor must be positive")

    @classmethod
    def parse(cls, text: str) -> "ReplayClock":
        """Accept ``fast``, ``realtime`` or ``scale=N``."""
        if text in ("fast", "realtime"):
            return cls(text)
        if text.startswith("scale="):
            return cls("scaled", float(text[len("scale="):]))
        raise ValueError(f"bad clock spec {text!r}")

    @property
    def speed(self) -> float:
        return self.factor if self.mode == "scaled" else 1.0


class ReplaySummary(NamedTuple):
    count: int
    duration: float


def replay(capture: CaptureFile, clock: ReplayClock,
           sink: Callable[[CaptureRecord], object],
           sleep=time.sleep, monotonic=time.monotonic) -> ReplaySummary:
    """Feed every record to ``sink`` in file order.

    In paced modes the wall-clock offset of each record tracks the
    cumulative recorded inter-packet gap divided by the speed; backwards
    steps in capture time count as zero.
    """
    if capture.linktype != LINKTYPE_ETHERNET:
        raise UnsupportedLinktype(f"cannot replay linktype {capture.linktype}")
    paced = clock.mode != "fast"
    start = monotonic()
    virtual_us = 0
    prev_us = None
    for index, rec in enumerate(capture.records):
        if paced:
            if prev_us is not None:
                virtual_us += max(0, rec.time_us - prev_us)
            prev_us = rec.time_us
            wait = start + virtual_us / 1e6 / clock.speed - monotonic()
            if wait > 0:
                sleep(wait)
        try:
            sink(rec)
        except Exception as exc:
            raise SinkError(index, exc) from exc
    return ReplaySummary(len(capture.records), monotonic() - start)
