"""Per-packet orchestration: decode, preprocessors, rules, log, block table."""
from __future__ import annotations

import copy
import ipaddress
import logging
import os
import shlex
import subprocess
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

from . import decode as dec
from .alerts import AlertRecord, utc_from_epoch
from .blocks import BlockEntry, BlockPolicy, BlockTable, apply_block_policy
from .errors import ConfigError, DecodeError, IpsError
from .preprocessors import (DEFAULT_KNOWN_METHODS, ArpState, PreprocEvent,
                            ScanConfig, ScanTracker, arpspoof_observe,
                            http_inspect, mark_response, portscan_observe)
from .rules import (RuleSet, apply_rule_state, load_rule_state, load_ruleset,
                    make_variables, match_rule)

log = logging.getLogger(__name__)

_KIND_PROTOCOL = {"tcp": "TCP", "udp": "UDP", "icmp": "ICMP", "icmpv6": "ICMP"}


def packet_protocol(packet: dec.DecodedPacket) -> str:
    if packet.arp is not None:
        return "ARP"
    if packet.ip is None:
        return "OTHER"
    kind = packet.transport.kind if packet.transport else None
    return _KIND_PROTOCOL.get(kind, "IP")


def _endpoints(packet: dec.DecodedPacket):
    if packet.ip is None:
        return None, None, None, None
    t = packet.transport
    return (str(packet.ip.src_ip), t.src_port if t else None,
            str(packet.ip.dst_ip), t.dst_port if t else None)


def alert_from_event(event: PreprocEvent) -> AlertRecord:
    packet = event.packet
    if packet.arp is not None:
        # arpspoof rows carry no addresses
        sip = sport = dip = dport = None
    else:
        sip, sport, dip, dport = _endpoints(packet)
    return AlertRecord(utc_from_epoch(packet.ts_sec), event.priority, packet_protocol(packet),
                       event.classification, sip, sport, dip, dport,
                       event.gid, event.sid, event.message)


def alert_from_rule(rule, packet: dec.DecodedPacket) -> AlertRecord:
    opts = rule.options
    sip, sport, dip, dport = _endpoints(packet)
    return AlertRecord(
        utc_from_epoch(packet.ts_sec),
        opts.priority if opts.priority is not None else 0,
        packet_protocol(packet),
        opts.classtype or "unclassified",
        sip, sport, dip, dport, opts.gid, opts.sid, opts.msg,
    )


@dataclass
class EngineConfig:
    rules_path: Optional[Path] = None
    rule_state_path: Optional[Path] = None
    home_net: List[str] = field(default_factory=list)
    http_ports: frozenset = dec.DEFAULT_HTTP_PORTS
    known_methods: frozenset = DEFAULT_KNOWN_METHODS
    scan: ScanConfig = field(default_factory=ScanConfig)
    arp_static: Dict = field(default_factory=dict)
    policy: BlockPolicy = field(default_factory=BlockPolicy)
    pass_list: List[str] = field(default_factory=list)
    block_capacity: int = 500
    log_path: Optional[Path] = None
    block_state_path: Optional[Path] = None
    block_hook: Optional[str] = None


CONFIG_KEYS = {
    "rules", "rule_state", "home_net", "http_ports", "http_methods",
    "scan_window", "scan_ports", "sweep_hosts", "filtered_ratio", "scan_cooldown",
    "arp_static", "block_mode", "block_enabled", "pass_list", "block_capacity",
    "log", "block_state", "block_hook",
}


def _csv(value: str) -> List[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _bool(value: str) -> bool:
    low = value.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def parse_config(text: str, base_dir=".") -> EngineConfig:
    """Parse ``key = value`` lines; relative paths resolve against ``base_dir``."""
    base = Path(base_dir)
    cfg = EngineConfig()
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: {key} set twice")
        seen.add(key)
        try:
            _apply_key(cfg, key, value, base)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {lineno}: {key}: {exc}") from None
    if cfg.rules_path is not None and cfg.rule_state_path is None:
        cfg.rule_state_path = Path(str(cfg.rules_path) + ".state")
    return cfg


def _apply_key(cfg: EngineConfig, key: str, value: str, base: Path):
    path = (base / value) if value else None
    if key == "rules":
        cfg.rules_path = path
    elif key == "rule_state":
        cfg.rule_state_path = path
    elif key == "log":
        cfg.log_path = path
    elif key == "block_state":
        cfg.block_state_path = path
    elif key == "home_net":
        cfg.home_net = [str(ipaddress.ip_network(v, strict=False)) for v in _csv(value)]
    elif key == "pass_list":
        cfg.pass_list = [str(ipaddress.ip_network(v, strict=False)) for v in _csv(value)]
    elif key == "http_ports":
        ports = frozenset(int(p) for p in _csv(value))
        if any(not 0 <= p <= 65535 for p in ports):
            raise ValueError("port out of range")
        cfg.http_ports = ports
    elif key == "http_methods":
        cfg.known_methods = frozenset(_csv(value))
    elif key == "scan_window":
        cfg.scan.window_seconds = float(value)
    elif key == "scan_ports":
        cfg.scan.scan_ports = int(value)
    elif key == "sweep_hosts":
        cfg.scan.sweep_hosts = int(value)
    elif key == "filtered_ratio":
        cfg.scan.filtered_ratio = float(value)
    elif key == "scan_cooldown":
        cfg.scan.cooldown_seconds = float(value)
    elif key == "arp_static":
        for item in _csv(value):
            ip, sep, mac = item.partition("=")
            if not sep:
                raise ValueError(f"arp_static entry {item!r} is not ip=mac")
            cfg.arp_static[ipaddress.IPv4Address(ip.strip())] = dec.mac_from_str(mac.strip())
    elif key == "block_mode":
        cfg.policy = BlockPolicy(value, cfg.policy.enabled)
    elif key == "block_enabled":
        cfg.policy = BlockPolicy(cfg.policy.mode, _bool(value))
    elif key == "block_capacity":
        cfg.block_capacity = int(value)
    elif key == "block_hook":
        cfg.block_hook = value or None


def load_config(path) -> EngineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent)


def shell_hook(command: str) -> Callable[[BlockEntry], None]:
    """Run ``command <ip>`` whenever a host is newly blocked."""
    argv = shlex.split(command)

    def hook(entry: BlockEntry):
        subprocess.run(argv + [entry.ip], check=False)

    return hook


class Engine:
    """Single-writer detection engine.

    One ingest thread calls :meth:`process_packet`; any thread may take a
    :meth:`snapshot`.
    """

    def __init__(self, ruleset: Optional[RuleSet] = None, *,
                 scan_config: Optional[ScanConfig] = None,
                 arp_static: Optional[Dict] = None,
                 http_ports=dec.DEFAULT_HTTP_PORTS,
                 known_methods=DEFAULT_KNOWN_METHODS,
                 policy: Optional[BlockPolicy] = None,
                 table: Optional[BlockTable] = None,
                 on_block: Optional[Callable[[BlockEntry], None]] = None):
        self.ruleset = ruleset if ruleset is not None else RuleSet()
        self.tracker = ScanTracker(scan_config)
        self.arp_state = ArpState(dict(arp_static or {}))
        self.http_ports = frozenset(http_ports)
        self.known_methods = frozenset(known_methods)
        self.policy = policy or BlockPolicy()
        self.table = table if table is not None else BlockTable()
        self.on_block = on_block
        self.alerts: List[AlertRecord] = []
        self.packets = 0
        self.decode_errors = 0
        self._lock = threading.Lock()

    @classmethod
    def from_config(cls, cfg: EngineConfig) -> "Engine":
        variables = make_variables(cfg.home_net)
        try:
            ruleset = load_ruleset(cfg.rules_path, variables) if cfg.rules_path else RuleSet()
        except OSError as exc:
            raise ConfigError(f"cannot read rules {cfg.rules_path}: {exc}") from None
        except IpsError as exc:
            raise ConfigError(f"rules {cfg.rules_path}: {exc}") from None
        if cfg.rule_state_path is not None:
            apply_rule_state(ruleset, load_rule_state(cfg.rule_state_path))
        return cls(
            ruleset,
            scan_config=copy.deepcopy(cfg.scan),
            arp_static=cfg.arp_static,
            http_ports=cfg.http_ports,
            known_methods=cfg.known_methods,
            policy=cfg.policy,
            table=BlockTable(cfg.block_capacity, cfg.pass_list),
            on_block=shell_hook(cfg.block_hook) if cfg.block_hook else None,
        )

    def _event_enabled(self, gid: int, sid: int) -> bool:
        rule = self.ruleset.get(gid, sid)
        return rule is None or rule.enabled

    def _detect(self, packet: dec.DecodedPacket) -> List[AlertRecord]:
        events: List[PreprocEvent] = []
        if packet.ip is not None and packet.transport is not None:
            if not mark_response(self.tracker, packet):
                events.extend(portscan_observe(self.tracker, packet))
        events.extend(arpspoof_observe(self.arp_state, packet))
        http = http_inspect(packet, self.known_methods)
        if http is not None:
            events.append(http)
        records = [alert_from_event(e) for e in events if self._event_enabled(e.gid, e.sid)]
        for rule in self.ruleset.packet_rules():
            if match_rule(rule, packet):
                records.append(alert_from_rule(rule, packet))
        return records

    def process_packet(self, packet: dec.DecodedPacket) -> List[AlertRecord]:
        with self._lock:
            self.packets += 1
            records = self._detect(packet)
            for record in records:
                self.alerts.append(record)
                touched = apply_block_policy(self.table, record, self.policy)
                if self.on_block is not None:
                    for entry in touched:
                        if len(entry.reasons) == 1:  # newly blocked
                            self.on_block(entry)
            return records

    def process_record(self, record) -> List[AlertRecord]:
        """Decode a capture record and process it; decode failures only count."""
        try:
            packet = dec.decode_record(record, self.http_ports)
        except DecodeError as exc:
            with self._lock:
                self.packets += 1
                self.decode_errors += 1
            log.debug("decode error: %s", exc)
            return []
        return self.process_packet(packet)

    __call__ = process_record

    def snapshot(self):
        """Copies of the alert log and block table, safe to hand to readers."""
        with self._lock:
            return list(self.alerts), self.table.copy()


def run_capture(engine: Engine, capture, clock=None):
    from .capture import ReplayClock, replay

    return replay(capture, clock or ReplayClock(), engine.process_record)


def default_rules_path() -> Path:
    return Path(__file__).with_name("data") / "default.rules"


def env_config_path() -> Optional[str]:
    return os.environ.get("IPSFORENSICS_CONFIG")
