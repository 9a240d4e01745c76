import struct
import time

import pytest
from hypothesis import given, settings, strategies as st

from ipsforensics import forge
from ipsforensics.capture import (MAGIC, MAGIC_NANO, CaptureFile, CaptureRecord, ReplayClock,
                                  parse_capture, read_capture, replay, serialize_capture,
                                  write_capture)
from ipsforensics.errors import (BadMagic, IoFailure, SinkError, TruncatedCapture,
                                 UnsupportedLinktype)

records = st.builds(
    lambda sec, usec, data, extra: CaptureRecord(sec, usec, len(data) + extra, data),
    st.integers(0, 2**32 - 1), st.integers(0, 999_999), st.binary(max_size=80), st.integers(0, 40))
captures = st.builds(CaptureFile, st.lists(records, max_size=12),
                     st.just(1), st.sampled_from(["native", "swapped"]))


def test_empty_capture_is_24_bytes(tmp_path):
    path = tmp_path / "empty.pcap"
    write_capture(CaptureFile(), path)
    blob = path.read_bytes()
    assert len(blob) == 24
    assert read_capture(path).records == []


def test_global_header_fields(tmp_path):
    blob = serialize_capture(CaptureFile())
    for order in ("<", ">"):
        fields = struct.unpack(order + "IHHiIII", blob)
        if fields[0] == MAGIC:
            assert fields[1:] == (2, 4, 0, 0, 65535, 1)
            break
    else:
        pytest.fail("magic not found in either byte order")


def test_round_trip_file(tmp_path, forged_corpus):
    capture, _ = forged_corpus[0]
    path = tmp_path / "c.pcap"
    write_capture(capture, path)
    assert read_capture(path) == capture


@settings(max_examples=150, deadline=None)
@given(captures)
def test_round_trip_random(capture):
    assert parse_capture(serialize_capture(capture)) == capture


def test_swapped_order_detected():
    cap = CaptureFile([CaptureRecord(1, 2, 3, b"abc")], byte_order="swapped")
    parsed = parse_capture(serialize_capture(cap))
    assert parsed.byte_order == "swapped"
    assert parsed.records == cap.records


def test_bad_magic():
    with pytest.raises(BadMagic):
        parse_capture(b"\x00" * 24)


def test_nanosecond_magic_rejected():
    blob = struct.pack("<IHHiIII", MAGIC_NANO, 2, 4, 0, 0, 65535, 1)
    with pytest.raises(BadMagic, match="nanosecond"):
        parse_capture(blob)


def test_linktype_rejected():
    blob = struct.pack("<IHHiIII", MAGIC, 2, 4, 0, 0, 65535, 101)
    with pytest.raises(UnsupportedLinktype):
        parse_capture(blob)


def test_truncated_record_names_index():
    cap = CaptureFile([CaptureRecord(0, 0, 4, b"abcd")] * 3)
    blob = serialize_capture(cap)
    with pytest.raises(TruncatedCapture) as info:
        parse_capture(blob[:-2])
    assert info.value.index == 2
    with pytest.raises(TruncatedCapture) as info:
        parse_capture(blob[:24 + 20 + 8])
    assert info.value.index == 1


def test_write_failure(tmp_path):
    with pytest.raises(IoFailure):
        write_capture(CaptureFile(), tmp_path / "missing" / "x.pcap")


def test_replay_order_fast():
    cap = CaptureFile([CaptureRecord(i, 0, 1, bytes([i])) for i in range(100)])
    seen = []
    summary = replay(cap, ReplayClock(), seen.append)
    assert summary.count == 100
    assert [r.data[0] for r in seen] == list(range(100))


def test_replay_empty():
    assert replay(CaptureFile(), ReplayClock(), lambda r: None).count == 0


def test_replay_clamps_backwards_time():
    cap = CaptureFile([CaptureRecord(10, 0, 1, b"a"), CaptureRecord(5, 0, 1, b"b"),
                       CaptureRecord(6, 0, 1, b"c")])
    now = [0.0]
    waits = []

    def sleep(dt):
        waits.append(dt)
        now[0] += dt

    replay(cap, ReplayClock("realtime"), lambda r: None, sleep=sleep, monotonic=lambda: now[0])
    assert sum(waits) == pytest.approx(1.0)


def test_replay_wraps_sink_errors():
    cap = CaptureFile([CaptureRecord(0, 0, 1, b"a")] * 3)
    calls = []

    def sink(rec):
        calls.append(rec)
        if len(calls) == 2:
            raise RuntimeError("boom")

    with pytest.raises(SinkError) as info:
        replay(cap, ReplayClock(), sink)
    assert info.value.index == 1


def test_clock_parse():
    assert ReplayClock.parse("fast").mode == "fast"
    assert ReplayClock.parse("realtime").speed == 1.0
    assert ReplayClock.parse("scale=10").speed == 10.0
    for bad in ("scale=0", "scale=-1", "warp"):
        with pytest.raises(ValueError):
            ReplayClock.parse(bad)


def test_scaled_replay_duration():
    capture, _ = forge.forge_icmp_flood(packets_per_second=100, duration=10)
    start = time.monotonic()
    summary = replay(capture, ReplayClock.parse("scale=10"), lambda r: None)
    elapsed = time.monotonic() - start
    assert summary.count == 1000
    # last record sits at 9.99 s of capture time
    assert abs(elapsed - 1.0) <= 0.2
