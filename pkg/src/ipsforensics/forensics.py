"""Collection, examination and analysis of IDS evidence.

``collect`` loads alert logs, block-state files and captures into an
:class:`EvidenceSet`; ``examine`` groups alerts into incidents; ``analyze``
answers the five forensic questions for each incident.
"""
from __future__ import annotations

import ipaddress
import json
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, List, Optional, Sequence, Tuple

from .alerts import AlertRecord, format_time, parse_alert_log, parse_time
from .blocks import BlockTable, parse_block_state
from .capture import MAGIC, MAGIC_NANO, CaptureFile, parse_capture
from .decode import decode_record
from .errors import DecodeError, EmptySeries, IpsError, UnreadableSource

QUESTIONS = (
    "What specific attack that occurred?",
    "When the attack occur?",
    "The IP Address of the attacker?",
    "The destination of the IP Address?",
    "The protocol is used?",
)
HEADER = ("Question for Forensic", "THE ANSWER")

FAMILY_LABELS = {
    119: "Hypertext transfer protocol (HTTP)",
    122: "Port scanning",
    112: "ARP spoofing",
}
PROTOCOL_NAMES = {
    "TCP": "Transmission control protocol (TCP)",
    "UDP": "User datagram protocol (UDP)",
    "ICMP": "Internet control message protocol (ICMP)",
    "ARP": "Address resolution protocol (ARP)",
    "IP": "Internet protocol (IP)",
    "OTHER": "unknown",
}
NOT_IDENTIFIED = "not identified"
UNKNOWN = "unknown"
DEFAULT_GAP_SECONDS = 300.0

REPORT_SCHEMA = {
    "type": "object",
    "required": ["incidents"],
    "additionalProperties": False,
    "properties": {
        "incidents": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["what", "when", "attacker", "destination", "protocol", "evidence"],
                "additionalProperties": False,
                "properties": {
                    "what": {"type": "string", "minLength": 1},
                    "when": {
                        "type": "object",
                        "required": ["start", "end"],
                        "additionalProperties": False,
                        "properties": {"start": {"type": "string"}, "end": {"type": "string"}},
                    },
                    "attacker": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "destination": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "protocol": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                    "evidence": {
                        "type": "object",
                        "required": ["alerts", "signatures", "blocked"],
                        "additionalProperties": False,
                        "properties": {
                            "alerts": {"type": "integer", "minimum": 1},
                            "signatures": {"type": "array", "items": {"type": "string"}},
                            "blocked": {"type": "array", "items": {"type": "string"}},
                        },
                    },
                },
            },
        },
    },
}


@dataclass(frozen=True)
class Provenance:
    path: str
    kind: str
    records: int
    malformed: int = 0
    loaded_at: datetime = field(default_factory=datetime.now, compare=False)


@dataclass
class EvidenceSet:
    alerts: List[AlertRecord] = field(default_factory=list)
    blocks: Optional[BlockTable] = None
    captures: List[Tuple[str, CaptureFile]] = field(default_factory=list)
    provenance: List[Provenance] = field(default_factory=list)

    @property
    def malformed(self) -> int:
        return sum(p.malformed for p in self.provenance)


_CAPTURE_MAGICS = {m.to_bytes(4, order) for m in (MAGIC, MAGIC_NANO) for order in ("little", "big")}


def _sniff_kind(blob: bytes) -> str:
    # nanosecond captures are routed to the capture parser so they fail loudly
    if blob[:4] in _CAPTURE_MAGICS:
        return "capture"
    text = blob.decode("utf-8", errors="replace")
    first = next((ln for ln in text.split("\n") if ln), "")
    if first.count("\t") == 2:
        return "blocks"
    return "alerts"


def collect(sources: Sequence) -> EvidenceSet:
    """Load every source; malformed lines are counted, unreadable files raise."""
    evidence = EvidenceSet()
    for source in sources:
        path = str(source)
        try:
            with open(path, "rb") as fh:
                blob = fh.read()
        except OSError as exc:
            raise UnreadableSource(path, exc) from None
        kind = _sniff_kind(blob)
        try:
            if kind == "capture":
                capture = parse_capture(blob)
                evidence.captures.append((path, capture))
                evidence.provenance.append(Provenance(path, kind, len(capture)))
                continue
            text = blob.decode("utf-8")
        except (IpsError, UnicodeDecodeError) as exc:
            raise UnreadableSource(path, exc) from None
        if kind == "blocks":
            table, bad = parse_block_state(text, strict=False)
            if evidence.blocks is None:
                evidence.blocks = table
            else:
                for ip, entry in table.entries.items():
                    if ip not in evidence.blocks.entries:
                        evidence.blocks.entries[ip] = entry
            evidence.provenance.append(Provenance(path, kind, len(table), bad))
        else:
            records, bad = parse_alert_log(text, strict=False)
            evidence.alerts.extend(records)
            evidence.provenance.append(Provenance(path, kind, len(records), bad))
    return evidence


# -- examination -----------------------------------------------------------

@dataclass(frozen=True)
class Incident:
    kind: str
    family: str
    alerts: Tuple[AlertRecord, ...]
    start: datetime
    end: datetime
    attacker_ips: frozenset
    victim_ips: frozenset
    protocols: frozenset


def family_of(alert: AlertRecord) -> Tuple[str, str]:
    """(grouping key, attack label) for an alert."""
    if alert.gid in FAMILY_LABELS:
        return f"{alert.gid}:*", FAMILY_LABELS[alert.gid]
    return alert.signature, alert.message or alert.signature


def _alert_sort_key(a: AlertRecord):
    return (a.timestamp, a.gid, a.sid, a.priority, a.protocol, a.classification,
            a.src_ip or "", -1 if a.src_port is None else a.src_port,
            a.dst_ip or "", -1 if a.dst_port is None else a.dst_port, a.message)


def examine(evidence: EvidenceSet, gap_threshold: float = DEFAULT_GAP_SECONDS) -> List[Incident]:
    groups: Dict[str, List[AlertRecord]] = {}
    labels: Dict[str, str] = {}
    for alert in evidence.alerts:
        key, label = family_of(alert)
        groups.setdefault(key, []).append(alert)
        labels.setdefault(key, label)
    incidents = []
    for key, members in groups.items():
        members.sort(key=_alert_sort_key)
        run = [members[0]]
        for alert in members[1:]:
            if (alert.timestamp - run[-1].timestamp).total_seconds() > gap_threshold:
                incidents.append(_make_incident(key, labels[key], run))
                run = []
            run.append(alert)
        incidents.append(_make_incident(key, labels[key], run))
    incidents.sort(key=lambda i: (i.start, i.family, i.end))
    return incidents


def _make_incident(family: str, label: str, members: List[AlertRecord]) -> Incident:
    return Incident(
        kind=label,
        family=family,
        alerts=tuple(members),
        start=members[0].timestamp,
        end=members[-1].timestamp,
        attacker_ips=frozenset(a.src_ip for a in members if a.src_ip),
        victim_ips=frozenset(a.dst_ip for a in members if a.dst_ip),
        protocols=frozenset(a.protocol for a in members),
    )


# -- analysis --------------------------------------------------------------

def _ip_order(ip: str):
    addr = ipaddress.ip_address(ip)
    return (addr.version, addr)


@dataclass(frozen=True)
class IncidentAnswer:
    what: str
    start: str
    end: str
    attacker: Tuple[str, ...]
    destination: Tuple[str, ...]
    protocol: Tuple[str, ...]
    alert_count: int
    signatures: Tuple[str, ...]
    blocked: Tuple[str, ...]

    @property
    def when(self) -> str:
        return self.start if self.start == self.end else f"{self.start} - {self.end}"

    def answers(self) -> Tuple[str, ...]:
        return (self.what, self.when, ", ".join(self.attacker),
                ", ".join(self.destination), ", ".join(self.protocol))


@dataclass(frozen=True)
class ForensicReport:
    incidents: Tuple[IncidentAnswer, ...] = ()


def analyze(incidents: Sequence[Incident], evidence: EvidenceSet) -> ForensicReport:
    blocked_ips = set(evidence.blocks.entries) if evidence.blocks is not None else set()
    answers = []
    for inc in incidents:
        if inc.family == "112:*":
            attacker = (NOT_IDENTIFIED,)
        else:
            attacker = tuple(sorted(inc.attacker_ips, key=_ip_order)) or (UNKNOWN,)
        destination = tuple(sorted(inc.victim_ips, key=_ip_order)) or (UNKNOWN,)
        protocol = tuple(PROTOCOL_NAMES.get(p, p) for p in sorted(inc.protocols)) or (UNKNOWN,)
        involved = (inc.attacker_ips | inc.victim_ips) & blocked_ips
        answers.append(IncidentAnswer(
            what=inc.kind,
            start=format_time(inc.start),
            end=format_time(inc.end),
            attacker=attacker,
            destination=destination,
            protocol=protocol,
            alert_count=len(inc.alerts),
            signatures=tuple(sorted({a.signature for a in inc.alerts})),
            blocked=tuple(sorted(involved, key=_ip_order)),
        ))
    return ForensicReport(tuple(answers))


def report_to_dict(report: ForensicReport) -> dict:
    return {"incidents": [
        {
            "what": a.what,
            "when": {"start": a.start, "end": a.end},
            "attacker": list(a.attacker),
            "destination": list(a.destination),
            "protocol": list(a.protocol),
            "evidence": {"alerts": a.alert_count, "signatures": list(a.signatures),
                         "blocked": list(a.blocked)},
        }
        for a in report.incidents
    ]}


def report_from_dict(data: dict) -> ForensicReport:
    return ForensicReport(tuple(
        IncidentAnswer(
            what=item["what"],
            start=item["when"]["start"],
            end=item["when"]["end"],
            attacker=tuple(item["attacker"]),
            destination=tuple(item["destination"]),
            protocol=tuple(item["protocol"]),
            alert_count=item["evidence"]["alerts"],
            signatures=tuple(item["evidence"]["signatures"]),
            blocked=tuple(item["evidence"]["blocked"]),
        )
        for item in data["incidents"]
    ))


def render_report(report: ForensicReport, fmt: str = "table") -> bytes:
    if fmt == "json":
        return (json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n").encode("utf-8")
    if fmt not in ("table", "text-table"):
        raise ValueError(f"unknown report format {fmt!r}")
    lines = ["\t".join(HEADER)]
    for ans in report.incidents:
        lines.append("")
        for question, answer in zip(QUESTIONS, ans.answers()):
            lines.append(f"{question}\t{answer}")
        blocked = ", ".join(ans.blocked) or "none"
        lines.append(f"Evidence\t{ans.alert_count} alerts ({', '.join(ans.signatures)}); "
                     f"blocked: {blocked}")
    return ("\n".join(lines) + "\n").encode("utf-8")


# -- traffic rate ----------------------------------------------------------

@dataclass(frozen=True)
class TrafficFilter:
    direction: str = "all"  # all | src | dst
    network: Optional[object] = None

    @classmethod
    def parse(cls, text: Optional[str]) -> "TrafficFilter":
        """``all``, ``src=CIDR`` or ``dst=CIDR``."""
        if not text or text == "all":
            return cls()
        direction, sep, cidr = text.partition("=")
        if not sep or direction not in ("src", "dst"):
            raise ValueError(f"bad filter {text!r}; use all, src=CIDR or dst=CIDR")
        return cls(direction, ipaddress.ip_network(cidr, strict=False))

    def matches(self, record) -> bool:
        if self.direction == "all":
            return True
        try:
            packet = decode_record(record)
        except DecodeError:
            return False
        if packet.ip is None:
            return False
        addr = packet.ip.src_ip if self.direction == "src" else packet.ip.dst_ip
        return addr.version == self.network.version and addr in self.network


@dataclass(frozen=True)
class RateSeries:
    bin_seconds: float
    bins: Tuple[Tuple[float, int], ...]  # (bin start, epoch seconds; bits)

    def rate(self, index: int) -> float:
        return self.bins[index][1] / self.bin_seconds

    @property
    def total_bits(self) -> int:
        return sum(bits for _, bits in self.bins)


def traffic_series(capture: CaptureFile, bin_seconds: float = 1.0,
                   flt: Optional[TrafficFilter] = None) -> RateSeries:
    if bin_seconds <= 0:
        raise ValueError("bin_seconds must be positive")
    flt = flt or TrafficFilter()
    bin_us = round(bin_seconds * 1_000_000)
    samples = [(r.time_us, r.orig_len * 8) for r in capture.records if flt.matches(r)]
    if not samples:
        return RateSeries(bin_seconds, ())
    origin = min(t for t, _ in samples)
    last = max(t for t, _ in samples)
    counts = [0] * ((last - origin) // bin_us + 1)
    for t, bits in samples:
        counts[(t - origin) // bin_us] += bits
    bins = tuple(((origin + i * bin_us) / 1e6, bits) for i, bits in enumerate(counts))
    return RateSeries(bin_seconds, bins)


def peak(series: RateSeries) -> Tuple[float, float]:
    """(bin start, bits per second) of the busiest bin; earliest wins ties."""
    if not series.bins:
        raise EmptySeries("no traffic in series")
    best = 0
    for i in range(1, len(series.bins)):
        if series.bins[i][1] > series.bins[best][1]:
            best = i
    return series.bins[best][0], series.rate(best)
