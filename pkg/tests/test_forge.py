import json

import pytest

from ipsforensics import decode as dec
from ipsforensics import forge
from ipsforensics.capture import serialize_capture
from ipsforensics.errors import InvalidParams
from ipsforensics.forge import ForgeManifest

from support import counts, run_forged


def test_same_seed_identical(forged_corpus):
    again = forge.forge_corpus(0)
    for (c1, m1), (c2, m2) in zip(forged_corpus, again):
        assert serialize_capture(c1) == serialize_capture(c2)
        assert m1.to_json() == m2.to_json()


def test_seed_changes_bytes():
    a, _ = forge.forge_tcp_portscan(seed=1)
    b, _ = forge.forge_tcp_portscan(seed=2)
    assert serialize_capture(a) != serialize_capture(b)


def test_manifest_json_round_trip(forged_corpus):
    for _, manifest in forged_corpus:
        text = manifest.to_json()
        assert ForgeManifest.from_json(text) == manifest
        data = json.loads(text)
        assert {"scenario", "seed", "expected_events", "actors", "timing", "total_bits"} <= set(data)


def test_master_property(forged_corpus):
    """Every scenario, run with the default config, satisfies its own manifest."""
    for capture, manifest in forged_corpus:
        engine = run_forged(capture, manifest)
        assert manifest.check(counts(engine.alerts)) == [], manifest.scenario


def test_corpus_decodes_cleanly(forged_corpus):
    for capture, manifest in forged_corpus:
        for rec in capture.records:
            dec.decode_record(rec)
        assert manifest.packets == len(capture.records)
        assert manifest.total_bits == sum(r.orig_len * 8 for r in capture.records)


def test_actors_appear_as_declared(forged_corpus):
    for capture, manifest in forged_corpus:
        by_ip = {a["ip"]: dec.mac_from_str(a["mac"]) for a in manifest.actors.values()}
        seen = set()
        for rec in capture.records:
            p = dec.decode_record(rec)
            if p.ip is not None:
                for ip, mac in ((str(p.ip.src_ip), p.frame.src_mac), (str(p.ip.dst_ip), p.frame.dst_mac)):
                    if ip in by_ip:
                        assert by_ip[ip] == mac, (manifest.scenario, ip)
                        seen.add(ip)
            elif p.arp is not None:
                seen.update({str(p.arp.sender_ip), str(p.arp.target_ip)})
                assert p.frame.src_mac in by_ip.values()
                # a spoofer may only show up by its hardware address
                seen.update(ip for ip, mac in by_ip.items() if mac == p.frame.src_mac)
        assert seen == set(by_ip), manifest.scenario


def test_forensic_cast():
    capture, manifest = forge.forge_http_unknown_method()
    assert manifest.expected(119, 31).min == manifest.expected(119, 31).max == 6
    ips = {(str(p.ip.src_ip), str(p.ip.dst_ip)) for p in map(dec.decode_record, capture.records)}
    assert ("148.229.33.150", "10.0.5.188") in ips and ("63.17.125.15", "10.0.5.188") in ips


def test_http_handshake_shape():
    capture, _ = forge.forge_http_unknown_method(attackers=["198.51.100.9"], requests_per_attacker=1)
    flags = [dec.decode_record(r).transport.tcp_flags for r in capture.records]
    assert flags[:3] == [dec.TCP_SYN, dec.TCP_SYN | dec.TCP_ACK, dec.TCP_ACK]
    requests = [p.http for p in map(dec.decode_record, capture.records) if p.http]
    assert [r.method for r in requests] == ["XDEBUG"]


def test_sweep_expectations():
    assert forge.forge_udp_portsweep()[1].expected(122, 23) is not None
    _, below = forge.forge_udp_portsweep(hosts=["ff02::1", "ff02::2", "ff02::3"])
    assert below.expected_events == []
    _, half = forge.forge_udp_portsweep(replies=0.5)
    assert half.expected(122, 23) is None and half.expected(122, 19) is not None


def test_portscan_expectations():
    assert forge.forge_tcp_portscan()[1].expected(122, 1) is not None
    assert forge.forge_tcp_portscan(ports=[22, 80])[1].expected_events == []


def test_arp_variants():
    for variant, sid in (("mismatch-src", 2), ("cache-overwrite", 4), ("unicast-request", 1)):
        capture, manifest = forge.forge_arp_spoof(variant=variant, count=1 if sid == 1 else 5)
        (e,) = manifest.expected_events
        assert (e.gid, e.sid, e.min) == (112, sid, 1 if sid == 1 else 5)
    _, m = forge.forge_arp_spoof(variant="cache-overwrite")
    assert "arp_static" in m.requires


def test_cache_overwrite_needs_static_map():
    capture, manifest = forge.forge_arp_spoof(variant="cache-overwrite")
    engine = run_forged(capture, manifest, arp_static={})
    assert counts(engine.alerts)[(112, 4)] == 0


def test_icmp_flood_counts():
    capture, manifest = forge.forge_icmp_flood(packets_per_second=100, duration=10)
    assert len(capture.records) == 1000
    assert manifest.expected(1, 1000001).min == 1000
    pairs = {(str(p.ip.src_ip), str(p.ip.dst_ip)) for p in map(dec.decode_record, capture.records)}
    assert pairs == {("192.168.88.46", "192.168.88.57")}


def test_flood_outweighs_baseline():
    _, flood = forge.forge_tcp_flood(duration=10)
    _, base = forge.forge_baseline(duration=10)
    assert flood.total_bits > base.total_bits
    assert forge.forge_tcp_flood(seed=4)[1].total_bits == forge.forge_tcp_flood(seed=4)[1].total_bits


def test_baseline_expects_nothing():
    assert forge.forge_baseline()[1].expected_events == []


@pytest.mark.parametrize("call", [
    lambda: forge.forge_http_unknown_method(method="GET"),
    lambda: forge.forge_http_unknown_method(requests_per_attacker=0),
    lambda: forge.forge_http_unknown_method(method="BAD METHOD"),
    lambda: forge.forge_udp_portsweep(hosts=[]),
    lambda: forge.forge_udp_portsweep(replies=1.5),
    lambda: forge.forge_tcp_portscan(ports=[]),
    lambda: forge.forge_arp_spoof(count=0),
    lambda: forge.forge_arp_spoof(variant="nope"),
    lambda: forge.forge_icmp_flood(packets_per_second=0),
    lambda: forge.forge_tcp_flood(connections=0),
    lambda: forge.forge_baseline(requests=0),
    lambda: forge.forge_tcp_portscan(source="not-an-ip"),
])
def test_invalid_params(call):
    with pytest.raises(InvalidParams):
        call()
