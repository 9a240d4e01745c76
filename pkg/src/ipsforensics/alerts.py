"""Alert records and the tab-separated alert log.

One line per alert, ten tab-separated columns::

    timestamp  priority  protocol  classification  src_ip  src_port
    dst_ip  dst_port  gid:sid  message

Absent values are empty columns. Backslash, tab, CR and LF inside text
columns are backslash-escaped so every line parses back unchanged.
"""
from __future__ import annotations

import ipaddress
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Iterable, List, Optional

from .errors import MalformedLine

TIME_FORMAT = "%Y-%m-%d %H:%M:%S"
PROTOCOLS = ("TCP", "UDP", "ICMP", "ARP", "IP", "OTHER")

_ESCAPES = {"\\": "\\\\", "\t": "\\t", "\n": "\\n", "\r": "\\r", "|": "\\|"}
_UNESCAPES = {"\\": "\\", "t": "\t", "n": "\n", "r": "\r", "|": "|"}


def escape(text: str, pipes: bool = False) -> str:
    out = []
    for ch in text:
        if ch in _ESCAPES and (pipes or ch != "|"):
            out.append(_ESCAPES[ch])
        else:
            out.append(ch)
    return "".join(out)


def unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            nxt = text[i + 1:i + 2]
            if nxt not in _UNESCAPES:
                raise ValueError(f"bad escape in {text!r}")
            out.append(_UNESCAPES[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def split_unescaped(text: str, sep: str = "|") -> List[str]:
    """Split on ``sep`` where it is not backslash-escaped; parts stay escaped."""
    parts, cur, i = [], [], 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            cur.append(text[i:i + 2])
            i += 2
            continue
        if ch == sep:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
        i += 1
    parts.append("".join(cur))
    return parts


def utc_from_epoch(seconds: int) -> datetime:
    """Naive UTC datetime at whole-second resolution."""
    return datetime.fromtimestamp(int(seconds), tz=timezone.utc).replace(tzinfo=None)


def format_time(ts: datetime) -> str:
    return ts.strftime(TIME_FORMAT)


def parse_time(text: str) -> datetime:
    return datetime.strptime(text, TIME_FORMAT)


@dataclass(frozen=True)
class AlertRecord:
    timestamp: datetime
    priority: int
    protocol: str
    classification: str
    src_ip: Optional[str]
    src_port: Optional[int]
    dst_ip: Optional[str]
    dst_port: Optional[int]
    gid: int
    sid: int
    message: str

    @property
    def signature(self) -> str:
        return f"{self.gid}:{self.sid}"

    @property
    def description(self) -> str:
        """Block-table reason text, ``<message> - <timestamp>``."""
        return f"{self.message} - {format_time(self.timestamp)}"


def _opt(value) -> str:
    return "" if value is None else str(value)


def format_alert(record: AlertRecord) -> str:
    return "\t".join((
        format_time(record.timestamp),
        str(record.priority),
        record.protocol,
        escape(record.classification),
        _opt(record.src_ip),
        _opt(record.src_port),
        _opt(record.dst_ip),
        _opt(record.dst_port),
        record.signature,
        escape(record.message),
    ))


def _opt_int(text: str) -> Optional[int]:
    if text == "":
        return None
    value = int(text)
    if not 0 <= value <= 65535:
        raise ValueError(f"port {value} out of range")
    return value


def _opt_ip(text: str) -> Optional[str]:
    if text == "":
        return None
    return str(ipaddress.ip_address(text))


def parse_alert(line: str) -> AlertRecord:
    cols = line.split("\t")
    if len(cols) != 10:
        raise ValueError(f"expected 10 columns, got {len(cols)}")
    ts, prio, proto, cls, sip, sport, dip, dport, sig, msg = cols
    if proto not in PROTOCOLS:
        raise ValueError(f"unknown protocol {proto!r}")
    gid, sep, sid = sig.partition(":")
    if not sep:
        raise ValueError(f"bad gid:sid {sig!r}")
    priority = int(prio)
    if priority < 0:
        raise ValueError("negative priority")
    return AlertRecord(
        timestamp=parse_time(ts),
        priority=priority,
        protocol=proto,
        classification=unescape(cls),
        src_ip=_opt_ip(sip),
        src_port=_opt_int(sport),
        dst_ip=_opt_ip(dip),
        dst_port=_opt_int(dport),
        gid=int(gid),
        sid=int(sid),
        message=unescape(msg),
    )


def render_alert_log(records: Iterable[AlertRecord]) -> str:
    return "".join(format_alert(r) + "\n" for r in records)


def write_alert_log(records: Iterable[AlertRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_alert_log(records))


def parse_alert_log(text: str, strict: bool = True):
    """Return ``(records, malformed_count)``; strict mode raises instead."""
    records, bad = [], 0
    for index, line in enumerate(text.split("\n")):
        if line == "" and index == text.count("\n"):
            break
        try:
            records.append(parse_alert(line))
        except (ValueError, TypeError):
            if strict:
                raise MalformedLine(index, line) from None
            bad += 1
    return records, bad


def read_alert_log(path) -> List[AlertRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_alert_log(fh.read())[0]
