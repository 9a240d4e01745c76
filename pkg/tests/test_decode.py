import ipaddress
import struct

import pytest
from hypothesis import given, settings, strategies as st

from ipsforensics import decode as dec
from ipsforensics import forge
from ipsforensics.errors import BadHeaderLength, DecodeError, TruncatedFrame, UnsupportedArp

scapy_all = pytest.importorskip("scapy.all")
Ether, ARP, IP, IPv6, TCP, UDP, ICMP = (scapy_all.Ether, scapy_all.ARP, scapy_all.IP,
                                        scapy_all.IPv6, scapy_all.TCP, scapy_all.UDP,
                                        scapy_all.ICMP)

MAC_A = bytes.fromhex("00005e005301")
MAC_B = bytes.fromhex("00005e005302")


def tcp_frame(sport=5792, dport=80, payload=b"", src="140.213.44.183", dst="192.168.88.48"):
    seg = forge.tcp_segment(src, dst, sport, dport, 1, 0, dec.TCP_SYN, payload)
    return forge.ethernet(MAC_B, MAC_A, dec.ETHERTYPE_IPV4, forge.ipv4(src, dst, dec.PROTO_TCP, seg))


def test_zero_frame():
    frame = dec.decode_ethernet(bytes(14))
    assert frame.dst_mac == bytes(6) and frame.src_mac == bytes(6)
    assert frame.ethertype == 0 and frame.payload == b""


def test_ethertype_big_endian():
    assert dec.decode_ethernet(bytes(12) + b"\x08\x06").ethertype == 2054


def test_short_frame():
    with pytest.raises(TruncatedFrame):
        dec.decode_ethernet(bytes(13))


def test_vlan_tag_skipped():
    inner = tcp_frame()
    tagged = inner[:12] + b"\x81\x00\x00\x64" + inner[12:]
    packet = dec.decode_packet(tagged)
    assert packet.frame.vlan_tci == 0x64
    assert packet.frame.ethertype == dec.ETHERTYPE_IPV4
    assert packet.transport.dst_port == 80
    assert packet.frame.to_bytes() == tagged


def test_tcp_ports_from_alert_row():
    packet = dec.decode_packet(tcp_frame())
    assert (packet.transport.src_port, packet.transport.dst_port) == (5792, 80)
    assert packet.transport.kind == "tcp"
    assert str(packet.ip.src_ip) == "140.213.44.183"
    assert str(packet.ip.dst_ip) == "192.168.88.48"
    assert packet.transport.tcp_flags == dec.TCP_SYN


def test_unknown_protocol_is_other():
    body = forge.ipv4("10.0.0.1", "10.0.0.2", 200, b"\x01\x02\x03")
    packet = dec.decode_packet(forge.ethernet(MAC_B, MAC_A, dec.ETHERTYPE_IPV4, body))
    assert packet.transport.kind == "other"
    assert packet.transport.src_port is None and packet.transport.dst_port is None


def test_minimal_ipv4_icmp():
    icmp = forge.icmp_message("10.0.0.1", "10.0.0.2", 8, 0, b"\x00\x01\x00\x01", b"")
    packet = dec.decode_packet(forge.ethernet(MAC_B, MAC_A, dec.ETHERTYPE_IPV4,
                                              forge.ipv4("10.0.0.1", "10.0.0.2", 1, icmp)))
    assert packet.ip.version == 4 and packet.ip.protocol == 1
    assert packet.transport.kind == "icmp" and packet.transport.icmp_type == 8


def test_ihl_below_five():
    raw = bytearray(forge.ipv4("10.0.0.1", "10.0.0.2", 1, bytes(8)))
    raw[0] = 0x44
    with pytest.raises(BadHeaderLength):
        dec.decode_packet(forge.ethernet(MAC_B, MAC_A, dec.ETHERTYPE_IPV4, bytes(raw)))


def test_ipv6_multicast_destination():
    capture, _ = forge.forge_multicast_sweep()
    dsts = {str(dec.decode_record(r).ip.dst_ip) for r in capture.records}
    assert "ff02::1:3" in dsts


def test_ipv6_hop_by_hop_skipped():
    capture, _ = forge.forge_multicast_sweep()
    mld = dec.decode_record(capture.records[0])
    assert mld.ip.version == 6
    assert mld.ip.protocol == dec.PROTO_ICMPV6
    assert mld.transport.kind == "icmpv6" and mld.transport.icmp_type == 143


def test_arp_consistent_request():
    body = forge.arp_body(dec.ARP_REQUEST, MAC_A, "10.0.0.1", bytes(6), "10.0.0.2")
    packet = dec.decode_packet(forge.ethernet(dec.BROADCAST_MAC, MAC_A, dec.ETHERTYPE_ARP, body))
    assert packet.arp.is_request
    assert packet.arp.sender_mac == packet.frame.src_mac
    assert packet.ip is None


def test_arp_27_bytes_truncated():
    body = forge.arp_body(dec.ARP_REQUEST, MAC_A, "10.0.0.1", bytes(6), "10.0.0.2")
    with pytest.raises(TruncatedFrame):
        dec.decode_packet(forge.ethernet(dec.BROADCAST_MAC, MAC_A, dec.ETHERTYPE_ARP, body[:27]))


def test_arp_bad_sizes():
    body = bytearray(forge.arp_body(dec.ARP_REQUEST, MAC_A, "10.0.0.1", bytes(6), "10.0.0.2"))
    body[4] = 8
    with pytest.raises(UnsupportedArp):
        dec.decode_packet(forge.ethernet(dec.BROADCAST_MAC, MAC_A, dec.ETHERTYPE_ARP, bytes(body)))


class TestHttpRequestLine:
    def parse(self, payload, dport=80, ports=dec.DEFAULT_HTTP_PORTS):
        return dec.decode_packet(tcp_frame(dport=dport, payload=payload), monitored_ports=ports).http

    def test_get(self):
        line = self.parse(b"GET / HTTP/1.1\r\nHost: x\r\n\r\n")
        assert (line.method, line.uri, line.version) == ("GET", "/", "HTTP/1.1")

    def test_port_filter(self):
        assert self.parse(b"GET / HTTP/1.1\r\n", dport=443) is None
        assert self.parse(b"GET / HTTP/1.1\r\n", dport=443, ports={443}) is not None

    def test_unknown_method_token(self):
        payload = b"XDEBUG /probe HTTP/1.0\r\n"
        assert self.parse(payload).method == payload.split(b" ")[0].decode()

    def test_empty_payload(self):
        assert self.parse(b"") is None

    def test_crlf_beyond_limit(self):
        uri = b"/" + b"a" * dec.HTTP_LINE_LIMIT
        assert self.parse(b"GET " + uri + b" HTTP/1.1\r\n") is None

    def test_crlf_at_limit_edge(self):
        head = b"GET /"
        tail = b" HTTP/1.1\r\n"
        uri_pad = b"a" * (dec.HTTP_LINE_LIMIT - len(head) - len(tail))
        assert self.parse(head + uri_pad + tail) is not None

    def test_separator_in_method(self):
        assert self.parse(b"GE(T / HTTP/1.1\r\n") is None


def test_raw_length_bits():
    frame = tcp_frame()
    packet = dec.decode_packet(frame, orig_len=len(frame) + 10)
    assert packet.raw_length_bits == (len(frame) + 10) * 8


def test_decode_is_pure(forged_corpus):
    for capture, _ in forged_corpus[:3]:
        for rec in capture.records[:50]:
            assert dec.decode_record(rec) == dec.decode_record(rec)


def test_layer_round_trip(forged_corpus):
    for capture, _ in forged_corpus:
        for rec in capture.records:
            p = dec.decode_record(rec)
            assert p.frame.to_bytes() == rec.data
            if p.arp is not None:
                assert p.arp.to_bytes() == p.frame.payload[:28]
            if p.ip is not None:
                assert p.ip.to_bytes() == p.frame.payload[:len(p.ip.to_bytes())]
                assert p.transport.to_bytes() == p.ip.payload


def test_prefix_truncation_safety(forged_corpus):
    seen = 0
    for capture, _ in forged_corpus:
        for rec in capture.records[:20]:
            for n in range(len(rec.data)):
                try:
                    dec.decode_packet(rec.data[:n])
                except TruncatedFrame:
                    pass
                seen += 1
    assert seen > 1000


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_random_bytes_never_crash(data):
    try:
        dec.decode_packet(data)
    except DecodeError:
        pass


@settings(max_examples=200, deadline=None)
@given(st.sampled_from([dec.ETHERTYPE_IPV4, dec.ETHERTYPE_IPV6, dec.ETHERTYPE_ARP]),
       st.binary(max_size=120))
def test_random_payloads_never_crash(ethertype, body):
    try:
        dec.decode_packet(forge.ethernet(MAC_B, MAC_A, ethertype, body))
    except DecodeError:
        pass


# -- differential against scapy -------------------------------------------

def _scapy_fields(data):
    """Addresses, ports, protocol kind and ARP fields as scapy sees them."""
    pkt = Ether(data)
    out = {"src_mac": pkt.src, "dst_mac": pkt.dst}
    if ARP in pkt:
        a = pkt[ARP]
        out["arp"] = (a.op, a.hwsrc, a.psrc, a.hwdst, a.pdst)
        return out
    if IP in pkt:
        ip = pkt[IP]
        out["ip"] = (4, ip.src, ip.dst, ip.proto)
        layer = ip.payload
    elif IPv6 in pkt:
        ip = pkt[IPv6]
        out["ip"] = (6, ipaddress.ip_address(ip.src).compressed,
                     ipaddress.ip_address(ip.dst).compressed)
        layer = ip.payload
        # walk the extension chain the way the decoder does
        while layer.name.startswith("IPv6 Extension") or layer.__class__.__name__ in (
                "IPv6ExtHdrHopByHop", "IPv6ExtHdrRouting", "IPv6ExtHdrDestOpt"):
            layer = layer.payload
    else:
        return out
    if TCP in pkt:
        out["l4"] = ("tcp", pkt[TCP].sport, pkt[TCP].dport, int(pkt[TCP].flags))
    elif UDP in pkt:
        out["l4"] = ("udp", pkt[UDP].sport, pkt[UDP].dport)
    elif ICMP in pkt:
        out["l4"] = ("icmp", pkt[ICMP].type, pkt[ICMP].code)
    else:
        # scapy spreads ICMPv6 over many classes; read type/code from the wire
        head = bytes(layer)
        out["l4"] = ("icmpv6", head[0], head[1])
    return out


def _our_fields(data):
    p = dec.decode_packet(data)
    out = {"src_mac": dec.mac_to_str(p.frame.src_mac), "dst_mac": dec.mac_to_str(p.frame.dst_mac)}
    if p.arp is not None:
        a = p.arp
        out["arp"] = (a.operation, dec.mac_to_str(a.sender_mac), str(a.sender_ip),
                      dec.mac_to_str(a.target_mac), str(a.target_ip))
        return out
    if p.ip is None:
        return out
    if p.ip.version == 4:
        out["ip"] = (4, str(p.ip.src_ip), str(p.ip.dst_ip), p.ip.protocol)
    else:
        out["ip"] = (6, p.ip.src_ip.compressed, p.ip.dst_ip.compressed)
    t = p.transport
    if t.kind == "tcp":
        out["l4"] = ("tcp", t.src_port, t.dst_port, t.tcp_flags)
    elif t.kind == "udp":
        out["l4"] = ("udp", t.src_port, t.dst_port)
    else:
        out["l4"] = (t.kind, t.icmp_type, t.icmp_code)
    return out


def test_differential_against_scapy(forged_corpus):
    mismatches = []
    total = 0
    for capture, manifest in forged_corpus:
        for i, rec in enumerate(capture.records):
            total += 1
            ours, ref = _our_fields(rec.data), _scapy_fields(rec.data)
            if ours != ref:
                mismatches.append((manifest.scenario, i, ours, ref))
    assert total > 3000
    assert mismatches == []


def test_capture_readable_by_scapy(tmp_path, forged_corpus):
    from ipsforensics.capture import write_capture
    capture, _ = forged_corpus[0]
    path = tmp_path / "c.pcap"
    write_capture(capture, path)
    packets = scapy_all.rdpcap(str(path))
    assert len(packets) == len(capture.records)
    for pkt, rec in zip(packets, capture.records):
        assert int(pkt.time * 1_000_000) == rec.time_us
        assert bytes(pkt) == rec.data
