"""Shared helpers for the test suite."""
import collections
import ipaddress

from ipsforensics import forge
from ipsforensics.decode import mac_from_str
from ipsforensics.pipeline import Engine, EngineConfig, default_rules_path, run_capture


def engine_for(manifest=None, *, rules_path=None, **overrides):
    """Engine on the bundled rules, configured with whatever the manifest requires."""
    cfg = EngineConfig(rules_path=rules_path or default_rules_path())
    cfg.rule_state_path = None
    req = manifest.requires if manifest is not None else {}
    if "arp_static" in req:
        ip, mac = req["arp_static"].split("=")
        cfg.arp_static = {ipaddress.IPv4Address(ip): mac_from_str(mac)}
    if "http_ports" in req:
        cfg.http_ports = frozenset(req["http_ports"])
    for key, value in overrides.items():
        setattr(cfg, key, value)
    return Engine.from_config(cfg)


def run_forged(capture, manifest, **overrides):
    engine = engine_for(manifest, **overrides)
    run_capture(engine, capture)
    return engine


def counts(alerts):
    return collections.Counter((a.gid, a.sid) for a in alerts)


def corpus(seed=0):
    return forge.forge_corpus(seed)


def write_config(path, **entries):
    path.write_text("".join(f"{k} = {v}\n" for k, v in entries.items()), encoding="utf-8")
    return path
