"""Bounded block table and the policy that feeds it from alerts."""
from __future__ import annotations

import ipaddress
from collections import OrderedDict
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, List, Optional, Tuple

from .alerts import (AlertRecord, escape, format_time, parse_time,
                     split_unescaped, unescape)
from .errors import MalformedLine

DEFAULT_CAPACITY = 500
BLOCK_MODES = ("src", "dst", "both")


@dataclass
class BlockEntry:
    ip: str
    blocked_at: datetime
    reasons: List[Tuple[str, datetime]] = field(default_factory=list)

    @property
    def descriptions(self) -> List[str]:
        return [desc for desc, _ in self.reasons]


@dataclass(frozen=True)
class BlockPolicy:
    mode: str = "both"
    enabled: bool = True

    def __post_init__(self):
        if self.mode not in BLOCK_MODES:
            raise ValueError(f"block mode must be one of {BLOCK_MODES}, got {self.mode!r}")


class BlockTable:
    """Insertion-ordered map of blocked hosts, evicting the oldest past capacity."""

    def __init__(self, capacity: int = DEFAULT_CAPACITY, pass_list: Iterable = ()):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.pass_list = tuple(ipaddress.ip_network(str(n), strict=False) for n in pass_list)
        self.entries: "OrderedDict[str, BlockEntry]" = OrderedDict()

    def __len__(self):
        return len(self.entries)

    def __contains__(self, ip) -> bool:
        return _norm(ip) in self.entries

    def get(self, ip) -> Optional[BlockEntry]:
        return self.entries.get(_norm(ip))

    def is_passed(self, ip) -> bool:
        addr = ipaddress.ip_address(ip)
        return any(addr.version == n.version and addr in n for n in self.pass_list)

    def record(self, ip, description: str, when: datetime) -> Optional[BlockEntry]:
        """Block ``ip`` (or extend its reasons). Pass-listed hosts are ignored."""
        key = _norm(ip)
        if self.is_passed(key):
            return None
        entry = self.entries.get(key)
        if entry is None:
            entry = BlockEntry(key, when)
            self.entries[key] = entry
            while len(self.entries) > self.capacity:
                self.entries.popitem(last=False)
        entry.reasons.append((description, when))
        return entry

    def remove(self, ip) -> bool:
        return self.entries.pop(_norm(ip), None) is not None

    def copy(self) -> "BlockTable":
        clone = BlockTable(self.capacity, ())
        clone.pass_list = self.pass_list
        for ip, e in self.entries.items():
            clone.entries[ip] = BlockEntry(e.ip, e.blocked_at, list(e.reasons))
        return clone

    def __eq__(self, other):
        if not isinstance(other, BlockTable):
            return NotImplemented
        return list(self.entries.values()) == list(other.entries.values())


def _norm(ip) -> str:
    return str(ipaddress.ip_address(str(ip)))


def apply_block_policy(table: BlockTable, alert: AlertRecord,
                       policy: BlockPolicy) -> List[BlockEntry]:
    if not policy.enabled:
        return []
    candidates = []
    if policy.mode in ("src", "both") and alert.src_ip is not None:
        candidates.append(alert.src_ip)
    if policy.mode in ("dst", "both") and alert.dst_ip is not None:
        candidates.append(alert.dst_ip)
    touched = []
    for ip in dict.fromkeys(candidates):
        entry = table.record(ip, alert.description, alert.timestamp)
        if entry is not None:
            touched.append(entry)
    return touched


def remove_block(table: BlockTable, ip) -> bool:
    return table.remove(ip)


def footer(count: int) -> str:
    return f"{count} host IP addresses are currently being blocked by Snort."


def blocked_summary(table: BlockTable) -> Tuple[int, List[str]]:
    """Rows newest-first as ``index<TAB>ip<TAB>descriptions``."""
    rows = []
    for index, entry in enumerate(reversed(table.entries.values()), 1):
        rows.append(f"{index}\t{entry.ip}\t{' '.join(entry.descriptions)}")
    return len(table), rows


# -- persistence -----------------------------------------------------------

def render_block_state(table: BlockTable) -> str:
    lines = []
    for entry in table.entries.values():
        reasons = "|".join(escape(d, pipes=True) for d in entry.descriptions)
        lines.append(f"{entry.ip}\t{format_time(entry.blocked_at)}\t{reasons}\n")
    return "".join(lines)


def _reason_time(description: str) -> datetime:
    _, sep, stamp = description.rpartition(" - ")
    if not sep:
        raise ValueError(f"reason without a timestamp: {description!r}")
    return parse_time(stamp)


def parse_block_state(text: str, capacity: int = DEFAULT_CAPACITY,
                      pass_list: Iterable = (), strict: bool = True):
    """Return ``(table, malformed_count)``."""
    table = BlockTable(capacity, pass_list)
    bad = 0
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for index, line in enumerate(lines):
        try:
            ip, blocked_at, reasons = line.split("\t")
            descs = [unescape(r) for r in split_unescaped(reasons)]
            if not descs or not all(descs):
                raise ValueError("entry without reasons")
            key = _norm(ip)
            if key in table.entries:
                raise ValueError(f"duplicate entry for {key}")
            entry = BlockEntry(key, parse_time(blocked_at),
                               [(d, _reason_time(d)) for d in descs])
        except ValueError:
            if strict:
                raise MalformedLine(index, line) from None
            bad += 1
            continue
        table.entries[key] = entry
        while len(table.entries) > table.capacity:
            table.entries.popitem(last=False)
    return table, bad


def save_block_state(table: BlockTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(render_block_state(table))


def load_block_state(path, capacity: int = DEFAULT_CAPACITY, pass_list: Iterable = ()) -> BlockTable:
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_block_state(fh.read(), capacity, pass_list)[0]
