"""Deterministic attack and baseline traffic generators.

Each ``forge_*`` function returns a :class:`CaptureFile` and a
:class:`ForgeManifest`. Expected detections in the manifest are worked out
while the packets are laid down, from the scenario's own construction, so
they can serve as ground truth for the detection pipeline.
"""
from __future__ import annotations

import calendar
import ipaddress
import json
import random
import struct
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import decode as dec
from .alerts import format_time, utc_from_epoch
from .capture import CaptureFile, CaptureRecord
from .errors import InvalidParams
from .preprocessors import DEFAULT_KNOWN_METHODS, ScanConfig

ICMP_RULE = (1, 1000001)
DOC_MAC_PREFIX = bytes.fromhex("00005e0053")  # RFC 7042 documentation block


def _epoch(y, mo, d, h, mi, s) -> int:
    return calendar.timegm((y, mo, d, h, mi, s, 0, 0, 0))


# Fixed scenario epochs keep golden files stable.
EPOCHS = {
    "http-unknown-method": _epoch(2019, 8, 8, 10, 21, 0),
    "udp-portsweep": _epoch(2019, 8, 13, 13, 22, 0),
    "multicast-sweep": _epoch(2019, 8, 13, 13, 21, 58),
    "tcp-portscan": _epoch(2019, 8, 13, 14, 0, 0),
    "arp-spoof": _epoch(2019, 8, 14, 15, 45, 0),
    "icmp-flood": _epoch(2019, 8, 14, 15, 47, 37),
    "tcp-flood": _epoch(2019, 8, 14, 16, 0, 0),
    "baseline": _epoch(2019, 8, 14, 16, 0, 0),
}


# -- manifest --------------------------------------------------------------

@dataclass
class ExpectedEvent:
    gid: int
    sid: int
    min: int
    max: Optional[int]  # None = unbounded

    def accepts(self, count: int) -> bool:
        return count >= self.min and (self.max is None or count <= self.max)


@dataclass
class ForgeManifest:
    """Ground truth for one forged capture.

    ``exhaustive`` means any (gid, sid) not listed must not fire.
    ``requires`` names engine settings the expectations depend on, e.g. a
    loaded rule or a static ARP entry.
    """

    scenario: str
    seed: int
    expected_events: List[ExpectedEvent]
    actors: Dict[str, Dict[str, str]]
    timing: Dict[str, object]
    total_bits: int
    packets: int
    exhaustive: bool = True
    requires: Dict[str, object] = field(default_factory=dict)
    params: Dict[str, object] = field(default_factory=dict)

    def expected(self, gid: int, sid: int) -> Optional[ExpectedEvent]:
        for e in self.expected_events:
            if (e.gid, e.sid) == (gid, sid):
                return e
        return None

    def check(self, counts: Dict[Tuple[int, int], int]) -> List[str]:
        """Return a list of violations for observed per-signature counts."""
        problems = []
        for e in self.expected_events:
            got = counts.get((e.gid, e.sid), 0)
            if not e.accepts(got):
                problems.append(f"{e.gid}:{e.sid} count {got} outside [{e.min}, {e.max}]")
        if self.exhaustive:
            for (gid, sid), got in counts.items():
                if got and self.expected(gid, sid) is None:
                    problems.append(f"unexpected {gid}:{sid} x{got}")
        return problems

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ForgeManifest":
        data = json.loads(text)
        data["expected_events"] = [ExpectedEvent(**e) for e in data["expected_events"]]
        return cls(**data)


# -- packet builders -------------------------------------------------------

def checksum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\0"
    total = sum(struct.unpack(f"!{len(data) // 2}H", data))
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _addr(ip):
    if isinstance(ip, (ipaddress.IPv4Address, ipaddress.IPv6Address)):
        return ip
    return ipaddress.ip_address(ip)


def _pseudo(src, dst, proto: int, length: int) -> bytes:
    src, dst = _addr(src), _addr(dst)
    if src.version == 4:
        return src.packed + dst.packed + struct.pack("!BBH", 0, proto, length)
    return src.packed + dst.packed + struct.pack("!IxxxB", length, proto)


def ethernet(dst_mac: bytes, src_mac: bytes, ethertype: int, payload: bytes) -> bytes:
    return struct.pack("!6s6sH", dst_mac, src_mac, ethertype) + payload


def ipv4(src, dst, proto: int, payload: bytes, ttl: int = 64, ident: int = 0) -> bytes:
    src, dst = _addr(src), _addr(dst)
    head = struct.pack("!BBHHHBBH4s4s", 0x45, 0, 20 + len(payload), ident, 0x4000,
                       ttl, proto, 0, src.packed, dst.packed)
    head = head[:10] + struct.pack("!H", checksum(head)) + head[12:]
    return head + payload


def ipv6(src, dst, next_header: int, payload: bytes, hop_limit: int = 64,
         ext: bytes = b"") -> bytes:
    src, dst = _addr(src), _addr(dst)
    return struct.pack("!IHBB16s16s", 6 << 28, len(ext) + len(payload), next_header,
                       hop_limit, src.packed, dst.packed) + ext + payload


def tcp_segment(src, dst, sport, dport, seq, ack, flags, payload=b"", window=64240) -> bytes:
    head = struct.pack("!HHIIBBHHH", sport, dport, seq & 0xFFFFFFFF, ack & 0xFFFFFFFF,
                       5 << 4, flags, window, 0, 0)
    csum = checksum(_pseudo(src, dst, dec.PROTO_TCP, len(head) + len(payload)) + head + payload)
    return head[:16] + struct.pack("!H", csum) + head[18:] + payload


def udp_datagram(src, dst, sport, dport, payload=b"") -> bytes:
    length = 8 + len(payload)
    head = struct.pack("!HHHH", sport, dport, length, 0)
    csum = checksum(_pseudo(src, dst, dec.PROTO_UDP, length) + head + payload) or 0xFFFF
    return struct.pack("!HHHH", sport, dport, length, csum) + payload


def icmp_message(src, dst, itype, code, rest: bytes, payload: bytes) -> bytes:
    body = struct.pack("!BBH", itype, code, 0) + rest + payload
    if _addr(src).version == 4:
        csum = checksum(body)
    else:
        csum = checksum(_pseudo(src, dst, dec.PROTO_ICMPV6, len(body)) + body)
    return body[:2] + struct.pack("!H", csum) + body[4:]


def ip_packet(src, dst, proto: int, l4: bytes, ident: int = 0, ext: bytes = b"",
              first_header: Optional[int] = None, hop_limit: int = 64) -> Tuple[int, bytes]:
    if _addr(src).version == 4:
        return dec.ETHERTYPE_IPV4, ipv4(src, dst, proto, l4, ttl=hop_limit, ident=ident)
    return dec.ETHERTYPE_IPV6, ipv6(src, dst, proto if first_header is None else first_header,
                                    l4, hop_limit=hop_limit, ext=ext)


def arp_body(op, sender_mac, sender_ip, target_mac, target_ip) -> bytes:
    return struct.pack("!HHBBH6s4s6s4s", 1, dec.ETHERTYPE_IPV4, 6, 4, op, sender_mac,
                       _addr(sender_ip).packed, target_mac, _addr(target_ip).packed)


def multicast_mac(ip) -> Optional[bytes]:
    ip = _addr(ip)
    if ip.version == 6 and ip.is_multicast:
        return b"\x33\x33" + ip.packed[-4:]
    if ip.version == 4 and ip.is_multicast:
        return bytes([0x01, 0x00, 0x5E, ip.packed[1] & 0x7F]) + ip.packed[2:]
    return None


class _Forge:
    """Accumulates records and actor MACs for one scenario."""

    def __init__(self, scenario: str, seed: int, start: Optional[int] = None):
        self.scenario = scenario
        self.seed = seed
        self.rng = random.Random(f"{scenario}:{seed}")
        self.start_us = (EPOCHS[scenario] if start is None else start) * 1_000_000
        self.records: List[CaptureRecord] = []
        self.macs: Dict[object, bytes] = {}
        self.actors: Dict[str, Dict[str, str]] = {}

    def mac(self, ip) -> bytes:
        ip = _addr(ip)
        if ip not in self.macs:
            mcast = multicast_mac(ip)
            if mcast is not None:
                self.macs[ip] = mcast
            else:
                n = sum(1 for m in self.macs.values() if m[:5] == DOC_MAC_PREFIX or m[0] == 0x02)
                if n < 256:
                    self.macs[ip] = DOC_MAC_PREFIX + bytes([n])
                else:
                    self.macs[ip] = b"\x02" + n.to_bytes(5, "big")
        return self.macs[ip]

    def actor(self, role: str, ip, mac: Optional[bytes] = None):
        ip = _addr(ip)
        if mac is not None:
            self.macs[ip] = mac
        self.actors[role] = {"ip": str(ip), "mac": dec.mac_to_str(self.mac(ip))}

    def emit(self, offset_us: int, frame: bytes):
        t = self.start_us + offset_us
        self.records.append(CaptureRecord(t // 1_000_000, t % 1_000_000, len(frame), frame))

    def emit_ip(self, offset_us, src, dst, proto, l4, **kw):
        ethertype, packet = ip_packet(src, dst, proto, l4, **kw)
        self.emit(offset_us, ethernet(self.mac(dst), self.mac(src), ethertype, packet))

    def tcp(self, offset_us, src, dst, sport, dport, seq, ack, flags, payload=b""):
        self.emit_ip(offset_us, src, dst, dec.PROTO_TCP,
                     tcp_segment(src, dst, sport, dport, seq, ack, flags, payload),
                     ident=self.rng.randrange(65536))

    def udp(self, offset_us, src, dst, sport, dport, payload=b""):
        self.emit_ip(offset_us, src, dst, dec.PROTO_UDP,
                     udp_datagram(src, dst, sport, dport, payload),
                     ident=self.rng.randrange(65536), hop_limit=1 if dst.is_multicast else 64)

    def finish(self, expected, params, exhaustive=True, requires=None):
        capture = CaptureFile(self.records)
        if self.records:
            first = min(r.time_us for r in self.records)
            last = max(r.time_us for r in self.records)
        else:
            first = last = self.start_us
        manifest = ForgeManifest(
            scenario=self.scenario,
            seed=self.seed,
            expected_events=[ExpectedEvent(*e) for e in expected],
            actors=self.actors,
            timing={"start": format_time(utc_from_epoch(first // 1_000_000)),
                    "start_us": first, "duration": (last - first) / 1e6},
            total_bits=sum(r.orig_len * 8 for r in self.records),
            packets=len(self.records),
            exhaustive=exhaustive,
            requires=requires or {},
            params=params,
        )
        return capture, manifest


def _ips(values, what) -> List:
    try:
        return [_addr(v) for v in values]
    except ValueError as exc:
        raise InvalidParams(f"bad {what}: {exc}") from None


def _endpoint(value, what):
    ip, port = value
    if not 0 <= int(port) <= 65535:
        raise InvalidParams(f"bad {what} port {port}")
    return _ips([ip], what)[0], int(port)


def _ephemeral(rng, used: set) -> int:
    while True:
        port = rng.randrange(32768, 61000)
        if port not in used:
            used.add(port)
            return port


# -- scenarios -------------------------------------------------------------

def forge_http_unknown_method(server=("10.0.5.188", 80),
                              attackers=("148.229.33.150", "63.17.125.15"),
                              requests_per_attacker: int = 3, method: str = "XDEBUG",
                              seed: int = 0):
    """Attackers open TCP connections and send one request line each with ``method``."""
    if method in DEFAULT_KNOWN_METHODS:
        raise InvalidParams(f"{method} is a known method and would not alert")
    if not dec.is_http_token(method.encode("latin-1", "replace")):
        raise InvalidParams(f"{method!r} is not an HTTP token")
    if requests_per_attacker < 1 or not attackers:
        raise InvalidParams("need at least one attacker and one request each")
    srv, port = _endpoint(server, "server")
    attacker_ips = _ips(attackers, "attacker")
    f = _Forge("http-unknown-method", seed)
    f.actor("server", srv)
    for i, a in enumerate(attacker_ips, 1):
        f.actor(f"attacker{i}", a)
    used: set = set()
    t = 0
    for a in attacker_ips:
        for _ in range(requests_per_attacker):
            sport = _ephemeral(f.rng, used)
            cseq, sseq = f.rng.getrandbits(32), f.rng.getrandbits(32)
            request = (f"{method} /probe HTTP/1.1\r\nHost: {srv}\r\n"
                       f"User-Agent: forge\r\n\r\n").encode()
            response = b"HTTP/1.1 501 Not Implemented\r\nContent-Length: 0\r\n\r\n"
            f.tcp(t, a, srv, sport, port, cseq, 0, dec.TCP_SYN)
            f.tcp(t + 1000, srv, a, port, sport, sseq, cseq + 1, dec.TCP_SYN | dec.TCP_ACK)
            f.tcp(t + 2000, a, srv, sport, port, cseq + 1, sseq + 1, dec.TCP_ACK)
            f.tcp(t + 3000, a, srv, sport, port, cseq + 1, sseq + 1,
                  dec.TCP_PSH | dec.TCP_ACK, request)
            f.tcp(t + 4000, srv, a, port, sport, sseq + 1, cseq + 1 + len(request),
                  dec.TCP_PSH | dec.TCP_ACK, response)
            f.tcp(t + 5000, a, srv, sport, port, cseq + 1 + len(request),
                  sseq + 1 + len(response), dec.TCP_ACK)
            t += 2_000_000
    n = len(attacker_ips) * requests_per_attacker
    expected = [(119, 31, n, n)] if port in dec.DEFAULT_HTTP_PORTS else []
    params = {"server": [str(srv), port], "attackers": [str(a) for a in attacker_ips],
              "requests_per_attacker": requests_per_attacker, "method": method}
    return f.finish(expected, params, requires={"http_ports": [port]})


def _sweep_expectation(hosts, answered, scan: ScanConfig):
    """Sweep signature raised when the distinct-host threshold is first met."""
    seen, replied = set(), 0
    for i, host in enumerate(hosts):
        seen.add(host)
        if len(seen) >= scan.sweep_hosts:
            unanswered = (i + 1) - replied
            if unanswered >= scan.filtered_ratio * (i + 1):
                return 23
            return 19
        if answered[i]:
            replied += 1
    return None


def forge_udp_portsweep(source="fe80::519a:af2d:d0a5:e03b",
                        hosts=("ff02::fb", "ff02::c", "ff02::1", "ff02::2", "ff02::1:3", "ff02::1:2"),
                        port: int = 5355, replies: float = 0.0, seed: int = 0,
                        scan: Optional[ScanConfig] = None, scenario: str = "udp-portsweep"):
    """One UDP probe per host; the first ``round(replies * n)`` hosts answer."""
    scan = scan or ScanConfig()
    if not hosts:
        raise InvalidParams("need at least one target host")
    if not 0.0 <= replies <= 1.0:
        raise InvalidParams("replies must be within [0, 1]")
    if not 0 <= port <= 65535:
        raise InvalidParams(f"bad port {port}")
    src = _ips([source], "source")[0]
    targets = _ips(hosts, "host")
    if any(t.version != src.version for t in targets):
        raise InvalidParams("source and hosts must share an IP version")
    f = _Forge(scenario, seed)
    f.actor("scanner", src)
    for i, h in enumerate(targets, 1):
        f.actor(f"target{i}", h)
    k = round(replies * len(targets))
    answered = [i < k for i in range(len(targets))]
    # keep every probe inside one window and one cooldown period
    step = min(500_000, int(min(scan.window_seconds, scan.cooldown_seconds) * 1e6 * 0.9)
               // max(1, len(targets)))
    sport = _ephemeral(f.rng, set())
    t = 0
    for host, ans in zip(targets, answered):
        f.udp(t, src, host, sport, port, b"\x00" * 12)
        if ans:
            f.udp(t + 2000, host, src, port, sport, b"\x80" * 12)
        t += step
    sid = _sweep_expectation(targets, answered, scan)
    expected = [(122, sid, 1, 1)] if sid is not None else []
    params = {"source": str(src), "hosts": [str(h) for h in targets], "port": port,
              "replies": replies}
    return f.finish(expected, params)


def forge_multicast_sweep(seed: int = 0):
    """IPv6 link-local host: one MLD report to ff02::16, then a UDP multicast sweep.

    Reproduces a portsweep that ends on ff02::1:3 after an ICMP alert on
    ff02::16, leaving three hosts in the block table under mode ``both``.
    """
    src = ipaddress.ip_address("fe80::519a:af2d:d0a5:e03b")
    mld_dst = ipaddress.ip_address("ff02::16")
    capture, manifest = forge_udp_portsweep(
        src, ("ff02::fb", "ff02::c", "ff02::1", "ff02::2", "ff02::1:3", "ff02::1:2"),
        5355, 0.0, seed, scenario="multicast-sweep")
    f = _Forge("multicast-sweep", seed)
    # hop-by-hop header with router alert, then MLDv2 report (type 143)
    hbh = struct.pack("!BB", dec.PROTO_ICMPV6, 0) + bytes([5, 2, 0, 0, 1, 0])
    record = b"\x04\x00\x00\x00" + ipaddress.ip_address("ff02::1:3").packed
    body = icmp_message(src, mld_dst, 143, 0, b"\x00\x00\x00\x01", record)
    f.emit_ip(0, src, mld_dst, dec.PROTO_ICMPV6, body, ext=hbh, first_header=0, hop_limit=1)
    # probes start 2 s after the report so the fifth lands 4 s in
    shift = 2_000_000
    for r in capture.records:
        t = r.time_us - EPOCHS["multicast-sweep"] * 1_000_000 + shift
        f.emit(t, r.data)
    f.actors = dict(manifest.actors)
    f.actors["mld_group"] = {"ip": str(mld_dst), "mac": dec.mac_to_str(multicast_mac(mld_dst))}
    expected = [(ICMP_RULE[0], ICMP_RULE[1], 1, 1)] + [
        (e.gid, e.sid, e.min, e.max) for e in manifest.expected_events]
    return f.finish(expected, {"source": str(src)}, requires={"rule": "1:1000001"})


def forge_tcp_portscan(source="203.0.113.66", target="10.0.5.188",
                       ports=(21, 22, 23, 25, 53, 80, 110, 143, 443, 3306), seed: int = 0,
                       scan: Optional[ScanConfig] = None):
    """SYN probe per port; every probe is answered with RST/ACK."""
    scan = scan or ScanConfig()
    if not ports:
        raise InvalidParams("need at least one port")
    if any(not 0 <= int(p) <= 65535 for p in ports):
        raise InvalidParams("port out of range")
    src, dst = _ips([source, target], "address")
    if src.version != dst.version:
        raise InvalidParams("source and target must share an IP version")
    f = _Forge("tcp-portscan", seed)
    f.actor("scanner", src)
    f.actor("target", dst)
    step = min(100_000, int(min(scan.window_seconds, scan.cooldown_seconds) * 1e6 * 0.9)
               // max(1, len(ports)))
    sport = _ephemeral(f.rng, set())
    t = 0
    for p in ports:
        seq = f.rng.getrandbits(32)
        f.tcp(t, src, dst, sport, int(p), seq, 0, dec.TCP_SYN)
        f.tcp(t + 500, dst, src, int(p), sport, 0, seq + 1, dec.TCP_RST | dec.TCP_ACK)
        t += step
    distinct = len(set(int(p) for p in ports))
    expected = [(122, 1, 1, 1)] if distinct >= scan.scan_ports else []
    params = {"source": str(src), "target": str(dst), "ports": [int(p) for p in ports]}
    return f.finish(expected, params)


ARP_VARIANTS = {"mismatch-src": 2, "cache-overwrite": 4, "unicast-request": 1}


def forge_arp_spoof(attacker=("192.168.88.66", "00:00:5e:00:53:66"), victim="192.168.88.57",
                    impersonated=("192.168.88.1", "00:00:5e:00:53:01"), count: int = 5,
                    variant: str = "mismatch-src", seed: int = 0):
    if count < 1:
        raise InvalidParams("claim count must be at least 1")
    if variant not in ARP_VARIANTS:
        raise InvalidParams(f"variant must be one of {sorted(ARP_VARIANTS)}")
    try:
        a_ip, v_ip, i_ip = (ipaddress.IPv4Address(x) for x in (attacker[0], victim, impersonated[0]))
        a_mac, i_mac = dec.mac_from_str(attacker[1]), dec.mac_from_str(impersonated[1])
    except ValueError as exc:
        raise InvalidParams(str(exc)) from None
    f = _Forge("arp-spoof", seed)
    f.actor("attacker", a_ip, a_mac)
    f.actor("victim", v_ip)
    if variant != "unicast-request":
        f.actor("impersonated", i_ip, i_mac)
    v_mac = f.mac(v_ip)
    zero = b"\x00" * 6
    for n in range(count):
        t = n * 1_000_000
        if variant == "mismatch-src":
            body = arp_body(dec.ARP_REQUEST, i_mac, i_ip, zero, v_ip)
            frame = ethernet(dec.BROADCAST_MAC, a_mac, dec.ETHERTYPE_ARP, body)
        elif variant == "cache-overwrite":
            body = arp_body(dec.ARP_REPLY, a_mac, i_ip, v_mac, v_ip)
            frame = ethernet(v_mac, a_mac, dec.ETHERTYPE_ARP, body)
        else:
            body = arp_body(dec.ARP_REQUEST, a_mac, a_ip, zero, v_ip)
            frame = ethernet(v_mac, a_mac, dec.ETHERTYPE_ARP, body)
        f.emit(t, frame + b"\x00" * 18)  # pad to the 60-byte Ethernet minimum
    requires = {}
    if variant == "cache-overwrite":
        requires["arp_static"] = f"{i_ip}={dec.mac_to_str(i_mac)}"
    expected = [(112, ARP_VARIANTS[variant], count, count)]
    params = {"variant": variant, "count": count}
    return f.finish(expected, params, requires=requires)


def forge_icmp_flood(src="192.168.88.46", dst="192.168.88.57", packets_per_second: float = 100,
                     duration: float = 10.0, seed: int = 0, payload_size: int = 56):
    """Echo requests at uniform spacing, no replies."""
    if packets_per_second <= 0 or duration <= 0:
        raise InvalidParams("rate and duration must be positive")
    if payload_size < 0:
        raise InvalidParams("payload size must be non-negative")
    s, d = _ips([src, dst], "address")
    if s.version != d.version:
        raise InvalidParams("endpoints must share an IP version")
    f = _Forge("icmp-flood", seed)
    f.actor("attacker", s)
    f.actor("victim", d)
    n = round(packets_per_second * duration)
    ident = f.rng.randrange(65536)
    payload = bytes(f.rng.randrange(256) for _ in range(payload_size))
    proto, echo = (dec.PROTO_ICMP, 8) if s.version == 4 else (dec.PROTO_ICMPV6, 128)
    for i in range(n):
        body = icmp_message(s, d, echo, 0, struct.pack("!HH", ident, i & 0xFFFF), payload)
        f.emit_ip(round(i * 1e6 / packets_per_second), s, d, proto, body, ident=i & 0xFFFF)
    params = {"packets_per_second": packets_per_second, "duration": duration,
              "payload_size": payload_size}
    return f.finish([(ICMP_RULE[0], ICMP_RULE[1], n, n)], params,
                    requires={"rule": "1:1000001"})


def forge_tcp_flood(sources=("203.0.113.7", "203.0.113.8", "203.0.113.9"),
                    target=("10.0.5.188", 80), connections: int = 600, seed: int = 0,
                    duration: float = 10.0, burst: int = 3, segment: int = 1200):
    """SYN followed by a burst of data segments per connection, never answered."""
    if connections < 1:
        raise InvalidParams("connections must be at least 1")
    if duration <= 0 or burst < 0 or segment < 0 or not sources:
        raise InvalidParams("bad flood shape")
    srcs = _ips(sources, "source")
    dst, port = _endpoint(target, "target")
    f = _Forge("tcp-flood", seed)
    for i, s in enumerate(srcs, 1):
        f.actor(f"attacker{i}", s)
    f.actor("victim", dst)
    used: Dict[object, set] = {s: set() for s in srcs}
    data = b"A" * segment
    spacing = duration * 1e6 / connections
    for c in range(connections):
        s = srcs[c % len(srcs)]
        sport = _ephemeral(f.rng, used[s])
        seq = f.rng.getrandbits(32)
        t = round(c * spacing)
        f.tcp(t, s, dst, sport, port, seq, 0, dec.TCP_SYN)
        for b in range(burst):
            f.tcp(t + 100 * (b + 1), s, dst, sport, port, seq + 1 + b * segment, 0,
                  dec.TCP_PSH | dec.TCP_ACK, data)
    params = {"target": [str(dst), port], "connections": connections, "duration": duration,
              "burst": burst, "segment": segment}
    return f.finish([], params)


def forge_baseline(clients=("192.0.2.10", "192.0.2.11", "192.0.2.12"),
                   server=("198.51.100.80", 80), requests: int = 50, seed: int = 0,
                   duration: float = 10.0):
    """Ordinary GET exchanges, spread evenly over ``duration``."""
    if requests < 1 or not clients or duration <= 0:
        raise InvalidParams("need clients, a positive duration and at least one request")
    cl = _ips(clients, "client")
    srv, port = _endpoint(server, "server")
    f = _Forge("baseline", seed)
    f.actor("server", srv)
    for i, c in enumerate(cl, 1):
        f.actor(f"client{i}", c)
    used: Dict[object, set] = {c: set() for c in cl}
    paths = ("/", "/index.html", "/login", "/courses", "/static/app.css")
    spacing = duration * 1e6 / requests
    for r in range(requests):
        c = cl[r % len(cl)]
        sport = _ephemeral(f.rng, used[c])
        cseq, sseq = f.rng.getrandbits(32), f.rng.getrandbits(32)
        req = (f"GET {f.rng.choice(paths)} HTTP/1.1\r\nHost: {srv}\r\n"
               f"Accept: */*\r\n\r\n").encode()
        body = b"x" * f.rng.randrange(200, 1200)
        resp = (b"HTTP/1.1 200 OK\r\nContent-Length: " + str(len(body)).encode()
                + b"\r\n\r\n" + body)
        t = round(r * spacing)
        f.tcp(t, c, srv, sport, port, cseq, 0, dec.TCP_SYN)
        f.tcp(t + 300, srv, c, port, sport, sseq, cseq + 1, dec.TCP_SYN | dec.TCP_ACK)
        f.tcp(t + 600, c, srv, sport, port, cseq + 1, sseq + 1, dec.TCP_ACK)
        f.tcp(t + 900, c, srv, sport, port, cseq + 1, sseq + 1, dec.TCP_PSH | dec.TCP_ACK, req)
        f.tcp(t + 1500, srv, c, port, sport, sseq + 1, cseq + 1 + len(req),
              dec.TCP_PSH | dec.TCP_ACK, resp)
        f.tcp(t + 1800, c, srv, sport, port, cseq + 1 + len(req), sseq + 1 + len(resp),
              dec.TCP_ACK)
    params = {"requests": requests, "duration": duration}
    return f.finish([], params)


SCENARIOS = {
    "http-unknown-method": forge_http_unknown_method,
    "udp-portsweep": forge_udp_portsweep,
    "multicast-sweep": forge_multicast_sweep,
    "tcp-portscan": forge_tcp_portscan,
    "arp-spoof": forge_arp_spoof,
    "icmp-flood": forge_icmp_flood,
    "tcp-flood": forge_tcp_flood,
    "baseline": forge_baseline,
}


def forge_corpus(seed: int = 0):
    """Every scenario with its default parameters plus the notable variants."""
    corpus = [fn(seed=seed) for fn in SCENARIOS.values()]
    corpus.append(forge_udp_portsweep(replies=0.5, seed=seed))
    corpus.append(forge_udp_portsweep(hosts=("10.0.0.1", "10.0.0.2", "10.0.0.3"),
                                      source="10.0.0.99", seed=seed))
    corpus.append(forge_tcp_portscan(ports=(22, 80), seed=seed))
    for variant in ("cache-overwrite", "unicast-request"):
        corpus.append(forge_arp_spoof(variant=variant, seed=seed))
    corpus.append(forge_icmp_flood(src="2001:db8::46", dst="2001:db8::57",
                                   packets_per_second=20, duration=2, seed=seed))
    return corpus
