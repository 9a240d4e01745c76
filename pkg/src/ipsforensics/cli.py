"""Command-line entry point.

Exit codes: 0 success, 1 configuration or usage error, 2 capture error.
"""
from __future__ import annotations

import argparse
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import forge as forge_mod
from .blocks import (BlockPolicy, BlockTable, blocked_summary, footer,
                     load_block_state, remove_block, save_block_state)
from .capture import ReplayClock, read_capture, write_capture
from .errors import (CaptureError, ConfigError, EmptySeries, InvalidParams,
                     IpsError, MalformedLine, UnknownRule, UnreadableSource)
from .forensics import (DEFAULT_GAP_SECONDS, TrafficFilter, analyze, collect,
                        examine, peak, render_report, traffic_series)
from .alerts import write_alert_log
from .pipeline import Engine, env_config_path, load_config, run_capture
from .rules import (load_rule_state, load_ruleset, parse_rule_id,
                    save_rule_state)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CAPTURE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _err(message: str) -> None:
    print(message, file=sys.stderr)


# -- run -------------------------------------------------------------------

def cmd_run(args) -> int:
    config_path = args.config or env_config_path()
    if not config_path:
        _err("run: no config given (use --config or IPSFORENSICS_CONFIG)")
        return EXIT_CONFIG
    try:
        cfg = load_config(config_path)
        engine = Engine.from_config(cfg)
        clock = ReplayClock.parse(args.clock)
    except (ConfigError, ValueError) as exc:
        _err(f"config error: {exc}")
        return EXIT_CONFIG
    if args.ids_only:
        engine.policy = BlockPolicy(engine.policy.mode, enabled=False)
    try:
        capture = read_capture(args.capture)
        summary = run_capture(engine, capture, clock)
    except (OSError, CaptureError) as exc:
        _err(f"capture error: {exc}")
        return EXIT_CAPTURE
    alerts, table = engine.snapshot()
    try:
        if cfg.log_path is not None:
            write_alert_log(alerts, cfg.log_path)
        if cfg.block_state_path is not None:
            save_block_state(table, cfg.block_state_path)
    except OSError as exc:
        _err(f"config error: cannot write output: {exc}")
        return EXIT_CONFIG
    print(f"packets: {summary.count}")
    print(f"alerts: {len(alerts)}")
    print(f"blocked: {len(table)}")
    print(f"decode errors: {engine.decode_errors}")
    return EXIT_OK


# -- rules -----------------------------------------------------------------

def _rules_path(args):
    if args.rules:
        return Path(args.rules), Path(args.state) if args.state else None
    config_path = args.config or env_config_path()
    if not config_path:
        raise ConfigError("no rules file (use --rules or --config)")
    cfg = load_config(config_path)
    if cfg.rules_path is None:
        raise ConfigError("config has no rules entry")
    return cfg.rules_path, Path(args.state) if args.state else cfg.rule_state_path


def cmd_rules(args) -> int:
    try:
        rules_path, state_path = _rules_path(args)
        state_path = state_path or Path(str(rules_path) + ".state")
        ruleset = load_ruleset(rules_path)
        state = load_rule_state(state_path)
    except (ConfigError, OSError, IpsError) as exc:
        _err(f"rules: {exc}")
        return EXIT_CONFIG
    if args.action == "list":
        for rule in ruleset:
            enabled = state.get(rule.key, rule.enabled)
            o = rule.options
            print(f"{o.gid}:{o.sid}\t{'enabled' if enabled else 'disabled'}\t"
                  f"{o.classtype or 'none'}\t{o.msg}")
        return EXIT_OK
    if not args.id:
        _err(f"rules {args.action}: missing GID:SID")
        return EXIT_CONFIG
    try:
        key = parse_rule_id(args.id)
        if ruleset.get(*key) is None:
            raise UnknownRule(f"no rule {key[0]}:{key[1]}")
        state[key] = args.action == "enable"
        save_rule_state(state_path, state)
    except (UnknownRule, OSError) as exc:
        _err(f"rules: {exc}")
        return EXIT_CONFIG
    return EXIT_OK


# -- blocks ----------------------------------------------------------------

def _state_path(args) -> Path:
    if args.state:
        return Path(args.state)
    config_path = args.config or env_config_path()
    if not config_path:
        raise ConfigError("no block state file (use --state or --config)")
    cfg = load_config(config_path)
    if cfg.block_state_path is None:
        raise ConfigError("config has no block_state entry")
    return cfg.block_state_path


def cmd_blocks(args) -> int:
    try:
        path = _state_path(args)
        table = load_block_state(path) if path.exists() else BlockTable()
    except (ConfigError, OSError, MalformedLine) as exc:
        _err(f"blocks: {exc}")
        return EXIT_CONFIG
    if args.action == "list":
        count, rows = blocked_summary(table)
        for row in rows:
            print(row)
        print(footer(count))
        return EXIT_OK
    if not args.ip:
        _err("blocks remove: missing IP")
        return EXIT_CONFIG
    try:
        removed = remove_block(table, args.ip)
    except ValueError:
        removed = False
    if not removed:
        _err(f"blocks: {args.ip} is not blocked")
        return EXIT_CONFIG
    save_block_state(table, path)
    print(f"removed {args.ip}")
    return EXIT_OK


# -- report ----------------------------------------------------------------

def cmd_report(args) -> int:
    sources = [p for group in (args.alerts or []) for p in group]
    if args.blocks:
        sources.append(args.blocks)
    try:
        evidence = collect(sources)
    except UnreadableSource as exc:
        _err(f"report: {exc}")
        return EXIT_CONFIG
    report = analyze(examine(evidence, args.gap), evidence)
    sys.stdout.write(render_report(report, args.format).decode("utf-8"))
    return EXIT_OK


# -- forge -----------------------------------------------------------------

def _endpoint(text: str):
    host, sep, port = text.rpartition(":")
    if not sep:
        raise InvalidParams(f"expected IP:PORT, got {text!r}")
    return host.strip("[]"), int(port)


def _ip_mac(text: str):
    ip, sep, mac = text.partition("=")
    if not sep:
        raise InvalidParams(f"expected IP=MAC, got {text!r}")
    return ip, mac


def _forge_call(args):
    s = args.scenario
    kw = {"seed": args.seed}
    if s == "http-unknown-method":
        if args.server:
            kw["server"] = _endpoint(args.server)
        if args.attacker:
            kw["attackers"] = args.attacker
        kw.update(requests_per_attacker=args.requests, method=args.method)
    elif s == "udp-portsweep":
        if args.source:
            kw["source"] = args.source
        if args.host:
            kw["hosts"] = args.host
        kw.update(port=args.port, replies=args.replies)
    elif s == "tcp-portscan":
        if args.source:
            kw["source"] = args.source
        if args.target:
            kw["target"] = args.target
        if args.ports:
            kw["ports"] = [int(p) for p in args.ports.split(",") if p.strip()]
    elif s == "arp-spoof":
        if args.attacker:
            kw["attacker"] = _ip_mac(args.attacker)
        if args.victim:
            kw["victim"] = args.victim
        if args.impersonate:
            kw["impersonated"] = _ip_mac(args.impersonate)
        kw.update(count=args.count, variant=args.variant)
    elif s == "icmp-flood":
        if args.src:
            kw["src"] = args.src
        if args.dst:
            kw["dst"] = args.dst
        kw.update(packets_per_second=args.pps, duration=args.duration,
                  payload_size=args.payload_size)
    elif s == "tcp-flood":
        if args.source:
            kw["sources"] = args.source
        if args.target:
            kw["target"] = _endpoint(args.target)
        kw.update(connections=args.connections, duration=args.duration)
    elif s == "baseline":
        if args.client:
            kw["clients"] = args.client
        if args.server:
            kw["server"] = _endpoint(args.server)
        kw.update(requests=args.requests, duration=args.duration)
    return forge_mod.SCENARIOS[s](**kw)


def cmd_forge(args) -> int:
    try:
        capture, manifest = _forge_call(args)
    except (InvalidParams, ValueError) as exc:
        _err(f"forge: invalid parameters: {exc}")
        return EXIT_CONFIG
    out = Path(args.out)
    pcap_path = out.with_name(out.name + ".pcap")
    manifest_path = out.with_name(out.name + ".json")
    try:
        write_capture(capture, pcap_path)
        manifest_path.write_text(manifest.to_json(), encoding="utf-8")
    except (OSError, CaptureError) as exc:
        _err(f"forge: {exc}")
        return EXIT_CONFIG
    print(f"scenario: {manifest.scenario}")
    print(f"seed: {manifest.seed}")
    print(f"packets: {manifest.packets}")
    print(f"total_bits: {manifest.total_bits}")
    for e in manifest.expected_events:
        bound = str(e.min) if e.min == e.max else f"{e.min}..{'' if e.max is None else e.max}"
        print(f"expected: {e.gid}:{e.sid} x{bound}")
    print(f"wrote: {pcap_path} {manifest_path}")
    return EXIT_OK


# -- stats -----------------------------------------------------------------

def _fmt_epoch(seconds: float) -> str:
    stamp = datetime.fromtimestamp(seconds, tz=timezone.utc).replace(tzinfo=None)
    return stamp.isoformat(sep=" ", timespec="microseconds")


def cmd_stats(args) -> int:
    try:
        capture = read_capture(args.capture)
    except (OSError, CaptureError) as exc:
        _err(f"capture error: {exc}")
        return EXIT_CAPTURE
    try:
        flt = TrafficFilter.parse(args.filter)
        if args.bin <= 0:
            raise ValueError("--bin must be positive")
    except ValueError as exc:
        _err(f"stats: {exc}")
        return EXIT_CONFIG
    series = traffic_series(capture, args.bin, flt)
    try:
        start, rate = peak(series)
    except EmptySeries:
        _err("stats: no packets")
        return EXIT_CONFIG
    print("bin_start\tbits\tbps")
    for i, (bin_start, bits) in enumerate(series.bins):
        print(f"{_fmt_epoch(bin_start)}\t{bits}\t{series.rate(i):.1f}")
    print(f"peak: {rate:.1f} bps at {_fmt_epoch(start)}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ipsforensics", description="IDS/IPS engine and forensic analyzer")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="replay a capture through the engine")
    run.add_argument("--config")
    run.add_argument("--capture", required=True)
    run.add_argument("--clock", default="fast", help="fast, realtime or scale=N")
    run.add_argument("--ids-only", action="store_true", help="alert without blocking")
    run.set_defaults(func=cmd_run)

    rules = sub.add_parser("rules", help="list or toggle rules")
    rules.add_argument("action", choices=("list", "enable", "disable"))
    rules.add_argument("id", nargs="?", metavar="GID:SID")
    rules.add_argument("--rules")
    rules.add_argument("--state", help="sidecar state file (default RULES.state)")
    rules.add_argument("--config")
    rules.set_defaults(func=cmd_rules)

    blocks = sub.add_parser("blocks", help="list or remove blocked hosts")
    blocks.add_argument("action", choices=("list", "remove"))
    blocks.add_argument("ip", nargs="?")
    blocks.add_argument("--state")
    blocks.add_argument("--config")
    blocks.set_defaults(func=cmd_blocks)

    report = sub.add_parser("report", help="forensic report from logs")
    report.add_argument("--alerts", nargs="+", action="append")
    report.add_argument("--blocks")
    report.add_argument("--format", choices=("table", "json"), default="table")
    report.add_argument("--gap", type=float, default=DEFAULT_GAP_SECONDS)
    report.set_defaults(func=cmd_report)

    frg = sub.add_parser("forge", help="write a synthetic capture and manifest")
    scen = frg.add_subparsers(dest="scenario", required=True, parser_class=_Parser)

    def scenario(name):
        p = scen.add_parser(name)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True, help="output prefix (.pcap/.json appended)")
        return p

    p = scenario("http-unknown-method")
    p.add_argument("--server", help="IP:PORT")
    p.add_argument("--attacker", action="append")
    p.add_argument("--requests", type=int, default=3)
    p.add_argument("--method", default="XDEBUG")
    p = scenario("udp-portsweep")
    p.add_argument("--source")
    p.add_argument("--host", action="append")
    p.add_argument("--port", type=int, default=5355)
    p.add_argument("--replies", type=float, default=0.0)
    scenario("multicast-sweep")
    p = scenario("tcp-portscan")
    p.add_argument("--source")
    p.add_argument("--target")
    p.add_argument("--ports", help="comma-separated")
    p = scenario("arp-spoof")
    p.add_argument("--attacker", help="IP=MAC")
    p.add_argument("--victim")
    p.add_argument("--impersonate", help="IP=MAC")
    p.add_argument("--count", type=int, default=5)
    p.add_argument("--variant", default="mismatch-src",
                   choices=sorted(forge_mod.ARP_VARIANTS))
    p = scenario("icmp-flood")
    p.add_argument("--src")
    p.add_argument("--dst")
    p.add_argument("--pps", type=float, default=100.0)
    p.add_argument("--duration", type=float, default=10.0)
    p.add_argument("--payload-size", type=int, default=56)
    p = scenario("tcp-flood")
    p.add_argument("--source", action="append")
    p.add_argument("--target", help="IP:PORT")
    p.add_argument("--connections", type=int, default=600)
    p.add_argument("--duration", type=float, default=10.0)
    p = scenario("baseline")
    p.add_argument("--client", action="append")
    p.add_argument("--server", help="IP:PORT")
    p.add_argument("--requests", type=int, default=50)
    p.add_argument("--duration", type=float, default=10.0)
    frg.set_defaults(func=cmd_forge)

    stats = sub.add_parser("stats", help="traffic rate per bin and peak")
    stats.add_argument("--capture", required=True)
    stats.add_argument("--bin", type=float, default=1.0)
    stats.add_argument("--filter", default="all", help="all, src=CIDR or dst=CIDR")
    stats.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
