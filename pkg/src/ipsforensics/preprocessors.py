"""Stateful detectors for HTTP methods, port scans and ARP spoofing.

Every event carries its classification, priority and message from
:data:`EVENT_TABLE`; detectors never build free-form text.
"""
from __future__ import annotations

import heapq
import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

from .decode import BROADCAST_MAC, DecodedPacket


class EventInfo(NamedTuple):
    classification: str
    priority: int
    message: str


EVENT_TABLE: Dict[Tuple[int, int], EventInfo] = {
    (119, 31): EventInfo("Unknown Traffic", 3, "(http_inspect) UNKNOWN METHOD"),
    (122, 1): EventInfo("Attempted Information Leak", 2, "(portscan) TCP Portscan"),
    (122, 3): EventInfo("Attempted Information Leak", 2, "(portscan) TCP Portsweep"),
    (122, 17): EventInfo("Attempted Information Leak", 2, "(portscan) UDP Portscan"),
    (122, 19): EventInfo("Attempted Information Leak", 2, "(portscan) UDP Portsweep"),
    (122, 23): EventInfo("Attempted Information Leak", 2, "(portscan) UDP Filtered Portsweep"),
    (112, 1): EventInfo("protocol-command-decode", 3, "(arp spoof) Unicast ARP request"),
    (112, 2): EventInfo("Potentially Bad Traffic", 2,
                        "(arp spoof) Ethernet/ARP Mismatch request for Source"),
    (112, 3): EventInfo("Potentially Bad Traffic", 2,
                        "(arp spoof) Ethernet/ARP Mismatch request for Destination"),
    (112, 4): EventInfo("Potentially Bad Traffic", 2, "(arp spoof) ARP cache overwrite attack"),
}

GID_HTTP = 119
GID_PORTSCAN = 122
GID_ARPSPOOF = 112

SID_TCP_PORTSCAN = 1
SID_TCP_PORTSWEEP = 3
SID_UDP_PORTSCAN = 17
SID_UDP_PORTSWEEP = 19
SID_UDP_FILTERED_PORTSWEEP = 23

DEFAULT_KNOWN_METHODS = frozenset(
    {"GET", "HEAD", "POST", "PUT", "DELETE", "OPTIONS", "TRACE", "CONNECT", "PATCH"})


@dataclass(frozen=True)
class PreprocEvent:
    gid: int
    sid: int
    classification: str
    priority: int
    message: str
    packet: DecodedPacket = field(compare=False, repr=False)


def make_event(gid: int, sid: int, packet: DecodedPacket) -> PreprocEvent:
    info = EVENT_TABLE[(gid, sid)]
    return PreprocEvent(gid, sid, info.classification, info.priority, info.message, packet)


def http_inspect(packet: DecodedPacket,
                 known_methods=DEFAULT_KNOWN_METHODS) -> Optional[PreprocEvent]:
    if packet.http is None or packet.http.method in known_methods:
        return None
    return make_event(GID_HTTP, 31, packet)


# -- portscan --------------------------------------------------------------

@dataclass
class Observation:
    time_us: int
    seq: int
    dst_ip: object
    dst_port: int
    src_port: int
    protocol: str
    answered: bool = False


@dataclass
class ScanConfig:
    window_seconds: float = 60.0
    scan_ports: int = 5
    sweep_hosts: int = 5
    filtered_ratio: float = 0.8
    cooldown_seconds: float = 60.0


class _SourceWindow:
    """Observations of one source with counters kept in step with eviction."""

    def __init__(self):
        self.heap: List[Tuple[int, int, Observation]] = []
        self.ports: Dict[Tuple[str, object], Counter] = defaultdict(Counter)
        self.hosts: Dict[str, Counter] = defaultdict(Counter)
        self.total: Counter = Counter()
        self.unanswered: Counter = Counter()
        # (dst, dst_port, src_port, proto) -> live observations, oldest first
        self.flows: Dict[tuple, List[Observation]] = defaultdict(list)

    def add(self, obs: Observation):
        heapq.heappush(self.heap, (obs.time_us, obs.seq, obs))
        self.ports[(obs.protocol, obs.dst_ip)][obs.dst_port] += 1
        self.hosts[obs.protocol][obs.dst_ip] += 1
        self.total[obs.protocol] += 1
        self.unanswered[obs.protocol] += 1
        self.flows[(obs.dst_ip, obs.dst_port, obs.src_port, obs.protocol)].append(obs)

    def evict_before(self, cutoff_us: int):
        while self.heap and self.heap[0][0] < cutoff_us:
            _, _, obs = heapq.heappop(self.heap)
            key = (obs.protocol, obs.dst_ip)
            ports = self.ports[key]
            ports[obs.dst_port] -= 1
            if not ports[obs.dst_port]:
                del ports[obs.dst_port]
                if not ports:
                    del self.ports[key]
            hosts = self.hosts[obs.protocol]
            hosts[obs.dst_ip] -= 1
            if not hosts[obs.dst_ip]:
                del hosts[obs.dst_ip]
            self.total[obs.protocol] -= 1
            if not obs.answered:
                self.unanswered[obs.protocol] -= 1
            flow_key = (obs.dst_ip, obs.dst_port, obs.src_port, obs.protocol)
            flow = self.flows[flow_key]
            flow.remove(obs)
            if not flow:
                del self.flows[flow_key]

    def answer(self, flow_key) -> bool:
        flow = self.flows.get(flow_key)
        if not flow:
            return False
        newest = max(flow, key=lambda o: (o.time_us, o.seq))
        if not newest.answered:
            newest.answered = True
            self.unanswered[newest.protocol] -= 1
        return True


class ScanTracker:
    """Per-source sliding window of TCP/UDP probe observations.

    The window is anchored at the latest packet time seen so far, so an
    out-of-order packet can never resurrect an evicted observation.
    """

    def __init__(self, config: Optional[ScanConfig] = None):
        self.config = config or ScanConfig()
        self.sources: Dict[object, _SourceWindow] = {}
        self.last_alert: Dict[Tuple[object, int], int] = {}
        self.high_water_us: Optional[int] = None
        self._seq = itertools.count()

    def _advance(self, now_us: int) -> int:
        if self.high_water_us is None or now_us > self.high_water_us:
            self.high_water_us = now_us
        return self.high_water_us

    def _window(self, src, hw_us: int) -> Optional[_SourceWindow]:
        win = self.sources.get(src)
        if win is not None:
            win.evict_before(hw_us - round(self.config.window_seconds * 1e6))
        return win

    def snapshot(self) -> Dict[str, List[Observation]]:
        return {str(src): sorted((o for _, _, o in w.heap), key=lambda o: o.seq)
                for src, w in self.sources.items()}


def _probe_fields(packet: DecodedPacket):
    ip, t = packet.ip, packet.transport
    if ip is None or t is None or t.kind not in ("tcp", "udp"):
        return None
    return ip, t


def mark_response(tracker: ScanTracker, packet: DecodedPacket,
                  now_us: Optional[int] = None) -> bool:
    """Mark the newest probe answered by ``packet`` (dst->src, ports swapped).

    Returns True when ``packet`` answered a live observation.
    """
    fields = _probe_fields(packet)
    if fields is None:
        return False
    ip, t = fields
    hw = tracker._advance(packet.time_us if now_us is None else now_us)
    win = tracker._window(ip.dst_ip, hw)
    if win is None:
        return False
    return win.answer((ip.src_ip, t.src_port, t.dst_port, t.kind))


def portscan_observe(tracker: ScanTracker, packet: DecodedPacket,
                     now_us: Optional[int] = None) -> List[PreprocEvent]:
    """Record ``packet`` as a probe and return any scan events it completes.

    Thresholds are evaluated for the packet's own protocol: distinct ports
    on its destination host (portscan) and distinct destination hosts
    (portsweep). A UDP sweep whose unanswered share reaches the filtered
    ratio is reported as a filtered portsweep.
    """
    fields = _probe_fields(packet)
    if fields is None:
        return []
    ip, t = fields
    cfg = tracker.config
    hw = tracker._advance(packet.time_us if now_us is None else now_us)
    src = ip.src_ip
    win = tracker.sources.get(src)
    if win is None:
        win = tracker.sources[src] = _SourceWindow()
    obs = Observation(packet.time_us if now_us is None else now_us, next(tracker._seq),
                      ip.dst_ip, t.dst_port, t.src_port, t.kind)
    win.add(obs)
    win.evict_before(hw - round(cfg.window_seconds * 1e6))

    proto = t.kind
    sids = []
    if len(win.ports.get((proto, ip.dst_ip), ())) >= cfg.scan_ports:
        sids.append(SID_TCP_PORTSCAN if proto == "tcp" else SID_UDP_PORTSCAN)
    if len(win.hosts.get(proto, ())) >= cfg.sweep_hosts:
        if proto == "tcp":
            sids.append(SID_TCP_PORTSWEEP)
        elif win.unanswered[proto] >= cfg.filtered_ratio * win.total[proto]:
            sids.append(SID_UDP_FILTERED_PORTSWEEP)
        else:
            sids.append(SID_UDP_PORTSWEEP)

    events = []
    cooldown_us = round(cfg.cooldown_seconds * 1e6)
    for sid in sorted(sids):
        last = tracker.last_alert.get((src, sid))
        if last is not None and hw - last < cooldown_us:
            continue
        tracker.last_alert[(src, sid)] = hw
        events.append(make_event(GID_PORTSCAN, sid, packet))
    return events


# -- arp spoof -------------------------------------------------------------

@dataclass
class ArpState:
    static_map: Dict[object, bytes] = field(default_factory=dict)


def arpspoof_observe(state: ArpState, packet: DecodedPacket) -> List[PreprocEvent]:
    arp = packet.arp
    if arp is None:
        return []
    frame = packet.frame
    events = []
    if arp.is_request and frame.dst_mac != BROADCAST_MAC:
        events.append(make_event(GID_ARPSPOOF, 1, packet))
    if frame.src_mac != arp.sender_mac:
        events.append(make_event(GID_ARPSPOOF, 2, packet))
    if arp.is_reply and frame.dst_mac != arp.target_mac:
        events.append(make_event(GID_ARPSPOOF, 3, packet))
    expected = state.static_map.get(arp.sender_ip)
    if expected is not None and expected != arp.sender_mac:
        events.append(make_event(GID_ARPSPOOF, 4, packet))
    return events
