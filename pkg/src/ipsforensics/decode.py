"""Layer decoders for Ethernet captures.

Every decoder is a pure function of its input bytes. Short input raises
:class:`TruncatedFrame`; nothing reads past the buffer. Each layer record
has a ``to_bytes`` method that reproduces the bytes it was decoded from.
"""
from __future__ import annotations

import ipaddress
import struct
from dataclasses import dataclass
from typing import Optional, Union

from .errors import BadHeaderLength, TruncatedFrame, UnsupportedArp

IPAddress = Union[ipaddress.IPv4Address, ipaddress.IPv6Address]

ETH_HEADER_LEN = 14
ETHERTYPE_IPV4 = 0x0800
ETHERTYPE_ARP = 0x0806
ETHERTYPE_VLAN = 0x8100
ETHERTYPE_IPV6 = 0x86DD

PROTO_ICMP = 1
PROTO_TCP = 6
PROTO_UDP = 17
PROTO_ICMPV6 = 58

BROADCAST_MAC = b"\xff" * 6

ARP_REQUEST = 1
ARP_REPLY = 2

# IPv6 extension headers walked (not interpreted) on the way to transport.
_V6_EXT_HEADERS = {0, 43, 44, 51, 60, 135, 139, 140}
_V6_FRAGMENT = 44
_V6_AH = 51

TCP_FIN = 0x01
TCP_SYN = 0x02
TCP_RST = 0x04
TCP_PSH = 0x08
TCP_ACK = 0x10
TCP_URG = 0x20

HTTP_LINE_LIMIT = 8192
DEFAULT_HTTP_PORTS = frozenset({80})

# RFC 7230 separators; a method token is visible ASCII minus these.
_HTTP_SEPARATORS = set(b'()<>@,;:\\"/[]?={} \t')


def mac_to_str(mac: bytes) -> str:
    return ":".join(f"{b:02x}" for b in mac)


def mac_from_str(text: str) -> bytes:
    parts = text.replace("-", ":").split(":")
    if len(parts) != 6:
        raise ValueError(f"bad MAC address {text!r}")
    return bytes(int(p, 16) for p in parts)


@dataclass(frozen=True)
class EthernetFrame:
    dst_mac: bytes
    src_mac: bytes
    ethertype: int
    payload: bytes
    vlan_tci: Optional[int] = None

    def to_bytes(self) -> bytes:
        if self.vlan_tci is None:
            head = struct.pack("!6s6sH", self.dst_mac, self.src_mac, self.ethertype)
        else:
            head = struct.pack("!6s6sHHH", self.dst_mac, self.src_mac,
                               ETHERTYPE_VLAN, self.vlan_tci, self.ethertype)
        return head + self.payload


@dataclass(frozen=True)
class ArpPacket:
    operation: int
    sender_mac: bytes
    sender_ip: ipaddress.IPv4Address
    target_mac: bytes
    target_ip: ipaddress.IPv4Address
    hardware_type: int = 1
    protocol_type: int = ETHERTYPE_IPV4

    @property
    def is_request(self) -> bool:
        return self.operation == ARP_REQUEST

    @property
    def is_reply(self) -> bool:
        return self.operation == ARP_REPLY

    def to_bytes(self) -> bytes:
        return struct.pack(
            "!HHBBH6s4s6s4s", self.hardware_type, self.protocol_type, 6, 4,
            self.operation, self.sender_mac, self.sender_ip.packed,
            self.target_mac, self.target_ip.packed,
        )


@dataclass(frozen=True)
class IpDatagram:
    """IPv4 or IPv6 datagram.

    ``protocol`` is the transport protocol reached after skipping any
    IPv6 extension headers; ``next_header`` keeps the value in the fixed
    header so the layer can be re-serialized. ``options`` holds IPv4
    options or the raw IPv6 extension-header chain.
    """

    version: int
    src_ip: IPAddress
    dst_ip: IPAddress
    protocol: int
    payload: bytes
    hop_limit: int
    options: bytes = b""
    next_header: Optional[int] = None
    tos: int = 0
    total_length: int = 0
    ident: int = 0
    flags_fragment: int = 0
    checksum: int = 0
    flow_label: int = 0
    fragment_offset: int = 0

    def to_bytes(self) -> bytes:
        if self.version == 4:
            ihl = 5 + len(self.options) // 4
            head = struct.pack(
                "!BBHHHBBH4s4s", (4 << 4) | ihl, self.tos, self.total_length,
                self.ident, self.flags_fragment, self.hop_limit, self.protocol,
                self.checksum, self.src_ip.packed, self.dst_ip.packed,
            )
            return head + self.options + self.payload
        word = (6 << 28) | (self.tos << 20) | self.flow_label
        head = struct.pack(
            "!IHBB16s16s", word, self.total_length, self.next_header,
            self.hop_limit, self.src_ip.packed, self.dst_ip.packed,
        )
        return head + self.options + self.payload


@dataclass(frozen=True)
class TransportHeader:
    kind: str  # tcp | udp | icmp | icmpv6 | other
    payload: bytes
    src_port: Optional[int] = None
    dst_port: Optional[int] = None
    tcp_flags: Optional[int] = None
    icmp_type: Optional[int] = None
    icmp_code: Optional[int] = None
    seq: int = 0
    ack: int = 0
    window: int = 0
    urgent: int = 0
    checksum: int = 0
    length: int = 0
    options: bytes = b""
    rest: bytes = b""
    # tcp: the 4 reserved bits under the data-offset nibble
    reserved: int = 0

    def to_bytes(self) -> bytes:
        if self.kind == "tcp":
            offset = 5 + len(self.options) // 4
            head = struct.pack(
                "!HHIIBBHHH", self.src_port, self.dst_port, self.seq, self.ack,
                (offset << 4) | self.reserved, self.tcp_flags, self.window,
                self.checksum, self.urgent,
            )
            return head + self.options + self.payload
        if self.kind == "udp":
            return struct.pack("!HHHH", self.src_port, self.dst_port,
                               self.length, self.checksum) + self.payload
        if self.kind in ("icmp", "icmpv6"):
            return struct.pack("!BBH", self.icmp_type, self.icmp_code,
                               self.checksum) + self.rest + self.payload
        return self.payload


@dataclass(frozen=True)
class HttpRequestLine:
    method: str
    uri: str
    version: str


@dataclass(frozen=True)
class DecodedPacket:
    ts_sec: int
    ts_usec: int
    frame: EthernetFrame
    arp: Optional[ArpPacket] = None
    ip: Optional[IpDatagram] = None
    transport: Optional[TransportHeader] = None
    http: Optional[HttpRequestLine] = None
    raw_length_bits: int = 0

    @property
    def time(self) -> float:
        return self.ts_sec + self.ts_usec / 1_000_000

    @property
    def time_us(self) -> int:
        return self.ts_sec * 1_000_000 + self.ts_usec


def decode_ethernet(data: bytes) -> EthernetFrame:
    if len(data) < ETH_HEADER_LEN:
        raise TruncatedFrame(f"ethernet header needs 14 bytes, got {len(data)}")
    dst, src, ethertype = struct.unpack_from("!6s6sH", data)
    if ethertype == ETHERTYPE_VLAN:
        if len(data) < ETH_HEADER_LEN + 4:
            raise TruncatedFrame("802.1Q tag cut short")
        tci, inner = struct.unpack_from("!HH", data, ETH_HEADER_LEN)
        return EthernetFrame(dst, src, inner, bytes(data[18:]), vlan_tci=tci)
    return EthernetFrame(dst, src, ethertype, bytes(data[ETH_HEADER_LEN:]))


def decode_arp(frame: EthernetFrame) -> ArpPacket:
    data = frame.payload
    if len(data) < 28:
        raise TruncatedFrame(f"ARP body needs 28 bytes, got {len(data)}")
    htype, ptype, hlen, plen, op = struct.unpack_from("!HHBBH", data)
    if hlen != 6 or plen != 4:
        raise UnsupportedArp(f"hardware/protocol sizes {hlen}/{plen}, want 6/4")
    if op not in (ARP_REQUEST, ARP_REPLY):
        raise UnsupportedArp(f"ARP operation {op}")
    sha, spa, tha, tpa = struct.unpack_from("!6s4s6s4s", data, 8)
    return ArpPacket(
        operation=op,
        sender_mac=sha,
        sender_ip=ipaddress.IPv4Address(spa),
        target_mac=tha,
        target_ip=ipaddress.IPv4Address(tpa),
        hardware_type=htype,
        protocol_type=ptype,
    )


def decode_ip(frame: EthernetFrame) -> IpDatagram:
    if frame.ethertype == ETHERTYPE_IPV4:
        return _decode_ipv4(frame.payload)
    if frame.ethertype == ETHERTYPE_IPV6:
        return _decode_ipv6(frame.payload)
    raise ValueError(f"ethertype 0x{frame.ethertype:04x} is not IP")


def _decode_ipv4(data: bytes) -> IpDatagram:
    if len(data) < 20:
        raise TruncatedFrame(f"IPv4 header needs 20 bytes, got {len(data)}")
    (ver_ihl, tos, total, ident, flags_frag, ttl, proto, csum,
     src, dst) = struct.unpack_from("!BBHHHBBH4s4s", data)
    ihl = ver_ihl & 0x0F
    if ver_ihl >> 4 != 4:
        raise BadHeaderLength(f"IPv4 version nibble is {ver_ihl >> 4}")
    if ihl < 5:
        raise BadHeaderLength(f"IPv4 IHL {ihl} < 5")
    header_len = ihl * 4
    if total < header_len:
        raise BadHeaderLength(f"IPv4 total length {total} < header {header_len}")
    if total > len(data):
        raise TruncatedFrame(f"IPv4 total length {total} > captured {len(data)}")
    return IpDatagram(
        version=4,
        src_ip=ipaddress.IPv4Address(src),
        dst_ip=ipaddress.IPv4Address(dst),
        protocol=proto,
        payload=bytes(data[header_len:total]),
        hop_limit=ttl,
        options=bytes(data[20:header_len]),
        next_header=proto,
        tos=tos,
        total_length=total,
        ident=ident,
        flags_fragment=flags_frag,
        checksum=csum,
        fragment_offset=flags_frag & 0x1FFF,
    )


def _decode_ipv6(data: bytes) -> IpDatagram:
    if len(data) < 40:
        raise TruncatedFrame(f"IPv6 header needs 40 bytes, got {len(data)}")
    word, plen, nxt, hlim, src, dst = struct.unpack_from("!IHBB16s16s", data)
    if word >> 28 != 6:
        raise BadHeaderLength(f"IPv6 version nibble is {word >> 28}")
    end = 40 + plen
    if end > len(data):
        raise TruncatedFrame(f"IPv6 payload length {plen} exceeds capture")
    proto = nxt
    offset = 40
    frag_offset = 0
    while proto in _V6_EXT_HEADERS:
        if offset + 8 > end:
            raise TruncatedFrame("IPv6 extension header cut short")
        following = data[offset]
        if proto == _V6_FRAGMENT:
            size = 8
            frag_offset = struct.unpack_from("!H", data, offset + 2)[0] >> 3
        elif proto == _V6_AH:
            size = (data[offset + 1] + 2) * 4
        else:
            size = (data[offset + 1] + 1) * 8
        if offset + size > end:
            raise TruncatedFrame("IPv6 extension header cut short")
        offset += size
        proto = following
    return IpDatagram(
        version=6,
        src_ip=ipaddress.IPv6Address(src),
        dst_ip=ipaddress.IPv6Address(dst),
        protocol=proto,
        payload=bytes(data[offset:end]),
        hop_limit=hlim,
        options=bytes(data[40:offset]),
        next_header=nxt,
        tos=(word >> 20) & 0xFF,
        total_length=plen,
        flow_label=word & 0xFFFFF,
        fragment_offset=frag_offset,
    )


def decode_transport(ip: IpDatagram) -> TransportHeader:
    data = ip.payload
    proto = ip.protocol
    if ip.fragment_offset:
        # later fragments carry no transport header
        return TransportHeader(kind="other", payload=data)
    if proto == PROTO_TCP:
        if len(data) < 20:
            raise TruncatedFrame(f"TCP header needs 20 bytes, got {len(data)}")
        (sport, dport, seq, ack, off_byte, flags, window, csum,
         urg) = struct.unpack_from("!HHIIBBHHH", data)
        header_len = (off_byte >> 4) * 4
        if header_len < 20:
            raise BadHeaderLength(f"TCP data offset {off_byte >> 4} < 5")
        if header_len > len(data):
            raise TruncatedFrame("TCP options cut short")
        return TransportHeader(
            kind="tcp", payload=bytes(data[header_len:]), src_port=sport,
            dst_port=dport, tcp_flags=flags, seq=seq, ack=ack, window=window,
            urgent=urg, checksum=csum, options=bytes(data[20:header_len]),
            reserved=off_byte & 0x0F,
        )
    if proto == PROTO_UDP:
        if len(data) < 8:
            raise TruncatedFrame(f"UDP header needs 8 bytes, got {len(data)}")
        sport, dport, length, csum = struct.unpack_from("!HHHH", data)
        if length > len(data):
            raise TruncatedFrame(f"UDP length {length} exceeds datagram")
        end = length if length >= 8 else len(data)
        return TransportHeader(
            kind="udp", payload=bytes(data[8:end]), src_port=sport,
            dst_port=dport, checksum=csum, length=length,
        )
    if proto in (PROTO_ICMP, PROTO_ICMPV6):
        if len(data) < 8:
            raise TruncatedFrame(f"ICMP header needs 8 bytes, got {len(data)}")
        itype, code, csum = struct.unpack_from("!BBH", data)
        return TransportHeader(
            kind="icmp" if proto == PROTO_ICMP else "icmpv6",
            payload=bytes(data[8:]), icmp_type=itype, icmp_code=code,
            checksum=csum, rest=bytes(data[4:8]),
        )
    return TransportHeader(kind="other", payload=data)


def is_http_token(raw: bytes) -> bool:
    return bool(raw) and all(33 <= b <= 126 and b not in _HTTP_SEPARATORS for b in raw)


def parse_http_request_line(transport: TransportHeader,
                            monitored_ports=DEFAULT_HTTP_PORTS) -> Optional[HttpRequestLine]:
    if transport.kind != "tcp" or transport.dst_port not in monitored_ports:
        return None
    head = transport.payload[:HTTP_LINE_LIMIT]
    end = head.find(b"\r\n")
    if end < 0:
        return None
    parts = head[:end].split(b" ")
    if len(parts) != 3 or not is_http_token(parts[0]) or not parts[1] or not parts[2]:
        return None
    method, uri, version = (p.decode("latin-1") for p in parts)
    return HttpRequestLine(method, uri, version)


def decode_packet(data: bytes, ts_sec: int = 0, ts_usec: int = 0,
                  orig_len: Optional[int] = None,
                  monitored_ports=DEFAULT_HTTP_PORTS) -> DecodedPacket:
    """Decode one captured Ethernet frame down to the HTTP request line."""
    frame = decode_ethernet(data)
    arp = ip = transport = http = None
    if frame.ethertype == ETHERTYPE_ARP:
        arp = decode_arp(frame)
    elif frame.ethertype in (ETHERTYPE_IPV4, ETHERTYPE_IPV6):
        ip = decode_ip(frame)
        transport = decode_transport(ip)
        if transport.kind == "tcp":
            http = parse_http_request_line(transport, monitored_ports)
    length = len(data) if orig_len is None else orig_len
    return DecodedPacket(ts_sec, ts_usec, frame, arp, ip, transport, http,
                         raw_length_bits=length * 8)


def decode_record(record, monitored_ports=DEFAULT_HTTP_PORTS) -> DecodedPacket:
    """Decode a capture record (anything with ts_sec/ts_usec/orig_len/data)."""
    return decode_packet(record.data, record.ts_sec, record.ts_usec,
                         record.orig_len, monitored_ports)
