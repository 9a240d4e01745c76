"""Snort-style IDS/IPS engine with an offline forensic analyzer.

Captures are replayed through a decoder, preprocessors and a rule matcher;
alerts feed a bounded block table, and the resulting logs are examined to
answer the usual who/what/when questions of an incident.
"""
from .capture import CaptureFile, CaptureRecord, ReplayClock, read_capture, write_capture
from .decode import DecodedPacket, decode_packet, decode_record
from .forensics import analyze, collect, examine, peak, render_report, traffic_series
from .pipeline import Engine, EngineConfig, load_config, parse_config, run_capture
from .rules import Rule, RuleSet, load_ruleset, match_rule, parse_rule, parse_ruleset

__version__ = "0.1.0"

__all__ = [
    "CaptureFile", "CaptureRecord", "ReplayClock", "read_capture", "write_capture",
    "DecodedPacket", "decode_packet", "decode_record",
    "analyze", "collect", "examine", "peak", "render_report", "traffic_series",
    "Engine", "EngineConfig", "load_config", "parse_config", "run_capture",
    "Rule", "RuleSet", "load_ruleset", "match_rule", "parse_rule", "parse_ruleset",
]
