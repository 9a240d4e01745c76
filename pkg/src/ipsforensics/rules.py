"""A small Snort-style rule language.

Grammar (one logical line)::

    alert PROTO SRC SPORT (-> | <>) DST DPORT ( option; option; ... )
    alert ( option; ... )

The second, header-less form declares a preprocessor event (for example
``gid:112; sid:2``) so it can be listed and toggled like any other rule;
it never matches packets directly.

Supported options are msg, sid, gid, rev, classtype, priority, content and
nocase. Anything else is a syntax error.
"""
from __future__ import annotations

import ipaddress
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Tuple

from .errors import DuplicateSid, RuleSyntaxError, UnknownRule, UnknownVariable

log = logging.getLogger(__name__)

PROTOCOLS = ("tcp", "udp", "icmp", "ip")
DIRECTIONS = ("->", "<>")
OPTION_KEYWORDS = ("msg", "sid", "gid", "rev", "classtype", "priority", "content", "nocase")

_VAR_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_VAR_LINE = re.compile(r"\s*([A-Za-z_][A-Za-z0-9_]*)\s*=(.*)\Z")
_CLASSTYPE = re.compile(r"[A-Za-z0-9_.-]+\Z")
_LITERAL_OK = set(range(0x20, 0x7F)) - set(b'"\\;|')


@dataclass(frozen=True)
class AddressSpec:
    text: str
    networks: Tuple = ()
    negated: bool = False
    any: bool = False

    def matches(self, ip) -> bool:
        if self.any:
            return True
        inside = any(ip.version == net.version and ip in net for net in self.networks)
        return inside != self.negated


@dataclass(frozen=True)
class PortSpec:
    text: str
    low: int = 0
    high: int = 65535
    any: bool = False

    def matches(self, port: Optional[int]) -> bool:
        if self.any:
            return True
        return port is not None and self.low <= port <= self.high


ANY_ADDRESS = AddressSpec("any", any=True)
ANY_PORT = PortSpec("any", any=True)


@dataclass(frozen=True)
class RuleHeader:
    action: str
    protocol: str
    src: AddressSpec
    src_port: PortSpec
    direction: str
    dst: AddressSpec
    dst_port: PortSpec


@dataclass(frozen=True)
class Content:
    pattern: bytes
    nocase: bool = False


@dataclass(frozen=True)
class RuleOptions:
    sid: int
    msg: str = ""
    gid: int = 1
    rev: int = 1
    classtype: Optional[str] = None
    priority: Optional[int] = None
    contents: Tuple[Content, ...] = ()


@dataclass
class Rule:
    header: Optional[RuleHeader]
    options: RuleOptions
    enabled: bool = True

    @property
    def key(self) -> Tuple[int, int]:
        return (self.options.gid, self.options.sid)

    @property
    def is_event_rule(self) -> bool:
        return self.header is None


@dataclass
class RuleSet:
    rules: List[Rule] = field(default_factory=list)
    variables: Dict[str, AddressSpec] = field(default_factory=dict)

    def __post_init__(self):
        self._index = {}
        for rule in self.rules:
            self._add_index(rule)

    def _add_index(self, rule):
        if rule.key in self._index:
            raise DuplicateSid(f"duplicate rule {rule.key[0]}:{rule.key[1]}")
        self._index[rule.key] = rule

    def add(self, rule: Rule) -> None:
        self._add_index(rule)
        self.rules.append(rule)

    def get(self, gid: int, sid: int) -> Optional[Rule]:
        return self._index.get((gid, sid))

    def __iter__(self):
        return iter(self.rules)

    def __len__(self):
        return len(self.rules)

    def packet_rules(self) -> List[Rule]:
        return [r for r in self.rules if r.header is not None]


# -- variables -------------------------------------------------------------

def _parse_network(text: str):
    try:
        return ipaddress.ip_network(text, strict=False)
    except ValueError:
        return None


def define_variable(name: str, value: str, variables: Dict[str, AddressSpec]) -> AddressSpec:
    """Build the AddressSpec for ``name = value`` given earlier definitions."""
    value = value.strip()
    negated = value.startswith("!")
    if negated:
        if name != "EXTERNAL_NET":
            raise RuleSyntaxError(f"negation is only allowed in EXTERNAL_NET, not {name}")
        value = value[1:].strip()
    if value == "any":
        spec = AddressSpec("any", any=True)
        if negated:
            return AddressSpec("!any", (), negated=False)
        return spec
    networks = []
    for item in value.split(","):
        item = item.strip()
        if item.startswith("$"):
            ref = variables.get(item[1:])
            if ref is None:
                raise UnknownVariable(item[1:])
            if ref.negated:
                raise RuleSyntaxError(f"{name} cannot reference negated {item}")
            if ref.any:
                if negated:
                    return AddressSpec(f"!{value}", (), negated=False)
                return AddressSpec(value, any=True)
            networks.extend(ref.networks)
            continue
        net = _parse_network(item)
        if net is None:
            raise RuleSyntaxError(f"bad network {item!r} in variable {name}")
        networks.append(net)
    text = ("!" if negated else "") + value
    return AddressSpec(text, tuple(networks), negated)


def make_variables(home_net: Iterable[str]) -> Dict[str, AddressSpec]:
    """HOME_NET from a CIDR list and EXTERNAL_NET as its complement."""
    home = [str(h).strip() for h in home_net if str(h).strip()]
    if not home:
        return {}
    variables: Dict[str, AddressSpec] = {}
    variables["HOME_NET"] = define_variable("HOME_NET", ",".join(home), variables)
    variables["EXTERNAL_NET"] = define_variable("EXTERNAL_NET", "!$HOME_NET", variables)
    return variables


def parse_variables(text: str, base: Optional[Dict[str, AddressSpec]] = None) -> Dict[str, AddressSpec]:
    """Parse ``NAME = cidr, cidr`` lines ('#' comments allowed)."""
    variables = dict(base or {})
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        m = _VAR_LINE.match(line)
        if not m:
            raise RuleSyntaxError("expected NAME = value", lineno, 1)
        variables[m.group(1)] = define_variable(m.group(1), m.group(2), variables)
    return variables


# -- rule parsing ----------------------------------------------------------

def _parse_address(text: str, col: int, line: int, variables) -> AddressSpec:
    if text == "any":
        return ANY_ADDRESS
    if text.startswith("!"):
        raise RuleSyntaxError("negated addresses are only supported via EXTERNAL_NET", line, col)
    if text.startswith("$"):
        name = text[1:]
        if not _VAR_NAME.match(name):
            raise RuleSyntaxError(f"bad variable reference {text!r}", line, col)
        spec = variables.get(name)
        if spec is None:
            raise UnknownVariable(f"${name} (line {line}, column {col})")
        return replace(spec, text=text)
    net = _parse_network(text)
    if net is None:
        raise RuleSyntaxError(f"bad address {text!r}", line, col)
    return AddressSpec(text, (net,))


def _parse_port(text: str, col: int, line: int) -> PortSpec:
    if text == "any":
        return ANY_PORT
    m = re.fullmatch(r"(\d*)(:?)(\d*)", text)
    if not m or not (m.group(1) or m.group(3)) or (not m.group(2) and m.group(3)):
        raise RuleSyntaxError(f"bad port {text!r}", line, col)
    low = int(m.group(1)) if m.group(1) else 0
    if m.group(2):
        high = int(m.group(3)) if m.group(3) else 65535
    else:
        high = low
    if high > 65535 or low > high:
        raise RuleSyntaxError(f"port range {text!r} out of bounds", line, col)
    return PortSpec(text, low, high)


def _split_options(body: str, base_col: int, line: int) -> List[Tuple[str, int]]:
    chunks = []
    i, n = 0, len(body)
    while i < n:
        while i < n and body[i].isspace():
            i += 1
        if i >= n:
            break
        start = i
        quoted = False
        while i < n:
            ch = body[i]
            if quoted and ch == "\\":
                i += 2
                continue
            if ch == '"':
                quoted = not quoted
            elif ch == ";" and not quoted:
                break
            i += 1
        if quoted:
            raise RuleSyntaxError("unterminated string", line, base_col + start)
        chunk = body[start:min(i, n)].strip()
        if not chunk:
            raise RuleSyntaxError("empty option", line, base_col + start)
        chunks.append((chunk, base_col + start))
        i += 1
    return chunks


def _unquote(value: str, col: int, line: int) -> str:
    if len(value) < 2 or value[0] != '"' or value[-1] != '"':
        raise RuleSyntaxError("expected a quoted string", line, col)
    out = []
    inner = value[1:-1]
    i = 0
    while i < len(inner):
        ch = inner[i]
        if ch == "\\":
            if i + 1 >= len(inner):
                raise RuleSyntaxError("dangling escape", line, col + i + 1)
            out.append(inner[i + 1])
            i += 2
            continue
        if ch == '"':
            raise RuleSyntaxError("unescaped quote in string", line, col + i + 1)
        out.append(ch)
        i += 1
    return "".join(out)


def _content_bytes(text: str, col: int, line: int) -> bytes:
    out = bytearray()
    parts = text.split("|")
    if len(parts) % 2 == 0:
        raise RuleSyntaxError("unbalanced '|' in content", line, col)
    for idx, part in enumerate(parts):
        if idx % 2:
            digits = part.replace(" ", "")
            if len(digits) % 2 or not re.fullmatch(r"[0-9A-Fa-f]*", digits):
                raise RuleSyntaxError(f"bad hex block |{part}|", line, col)
            out += bytes.fromhex(digits)
        else:
            out += part.encode("utf-8")
    return bytes(out)


def _parse_uint(value: str, key: str, col: int, line: int) -> int:
    if not re.fullmatch(r"\d+", value):
        raise RuleSyntaxError(f"{key} needs an unsigned integer, got {value!r}", line, col)
    return int(value)


def _parse_options(body: str, base_col: int, line: int) -> RuleOptions:
    fields = {}
    contents: List[Content] = []
    for chunk, col in _split_options(body, base_col, line):
        key, sep, value = chunk.partition(":")
        key, value = key.strip(), value.strip()
        if key not in OPTION_KEYWORDS:
            raise RuleSyntaxError(f"unknown option {key!r}", line, col)
        if key == "nocase":
            if sep:
                raise RuleSyntaxError("nocase takes no value", line, col)
            if not contents:
                raise RuleSyntaxError("nocase without a preceding content", line, col)
            contents[-1] = Content(contents[-1].pattern, True)
            continue
        if not sep:
            raise RuleSyntaxError(f"{key} needs a value", line, col)
        if key == "content":
            if value.startswith("!"):
                raise RuleSyntaxError("negated content is not supported", line, col)
            contents.append(Content(_content_bytes(_unquote(value, col, line), col, line)))
            continue
        if key in fields:
            raise RuleSyntaxError(f"{key} given twice", line, col)
        if key == "msg":
            fields[key] = _unquote(value, col, line)
        elif key == "classtype":
            if not _CLASSTYPE.match(value):
                raise RuleSyntaxError(f"bad classtype {value!r}", line, col)
            fields[key] = value
        else:
            fields[key] = _parse_uint(value, key, col, line)
    if "sid" not in fields:
        raise RuleSyntaxError("rule has no sid", line, base_col)
    return RuleOptions(contents=tuple(contents), **fields)


def parse_rule(text: str, variables: Optional[Dict[str, AddressSpec]] = None,
               line: int = 1) -> Rule:
    variables = variables or {}
    open_at = text.find("(")
    close_at = text.rfind(")")
    if open_at < 0:
        raise RuleSyntaxError("missing '(' option list", line, len(text) + 1)
    if close_at < open_at or text[close_at + 1:].strip():
        raise RuleSyntaxError("option list must end with ')'", line, len(text.rstrip()) + 1)
    tokens = [(m.group(), m.start() + 1) for m in re.finditer(r"\S+", text[:open_at])]
    if not tokens:
        raise RuleSyntaxError("missing rule action", line, 1)
    action, col = tokens[0]
    if action != "alert":
        raise RuleSyntaxError(f"unsupported action {action!r}", line, col)
    header = None
    if len(tokens) == 7:
        (_, (proto, pcol), (src, scol), (sport, spcol), (direction, dcol),
         (dst, dstcol), (dport, dpcol)) = tokens
        if proto not in PROTOCOLS:
            raise RuleSyntaxError(f"unsupported protocol {proto!r}", line, pcol)
        if direction not in DIRECTIONS:
            raise RuleSyntaxError(f"bad direction {direction!r}", line, dcol)
        header = RuleHeader(
            action, proto,
            _parse_address(src, scol, line, variables), _parse_port(sport, spcol, line),
            direction,
            _parse_address(dst, dstcol, line, variables), _parse_port(dport, dpcol, line),
        )
    elif len(tokens) != 1:
        bad = tokens[min(len(tokens), 7) - 1]
        raise RuleSyntaxError("rule header needs 7 fields", line, bad[1])
    options = _parse_options(text[open_at + 1:close_at], open_at + 2, line)
    return Rule(header, options)


def _logical_lines(text: str):
    pending, start = [], None
    for lineno, raw in enumerate(text.splitlines(), 1):
        if start is None:
            start = lineno
        if raw.endswith("\\"):
            pending.append(raw[:-1])
            continue
        pending.append(raw)
        yield start, "".join(pending)
        pending, start = [], None
    if pending:
        yield start, "".join(pending)


def parse_ruleset(text: str, variables: Optional[Dict[str, AddressSpec]] = None) -> RuleSet:
    """Parse a rules file: rules, ``NAME = cidr,...`` lines, '#' comments."""
    variables = dict(variables or {})
    rule_lines = []
    for lineno, line in _logical_lines(text):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _VAR_LINE.match(stripped)
        if m and not stripped.startswith("alert"):
            variables[m.group(1)] = define_variable(m.group(1), m.group(2), variables)
        else:
            rule_lines.append((lineno, line))
    ruleset = RuleSet(variables=variables)
    for lineno, line in rule_lines:
        rule = parse_rule(line, variables, lineno)
        try:
            ruleset.add(rule)
        except DuplicateSid as exc:
            raise DuplicateSid(f"{exc} (line {lineno})") from None
    return ruleset


def load_ruleset(path, variables=None) -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        return parse_ruleset(fh.read(), variables)


# -- printing --------------------------------------------------------------

def _quote(text: str) -> str:
    escaped = text.replace("\\", "\\\\").replace('"', '\\"').replace(";", "\\;")
    return f'"{escaped}"'


def _content_text(pattern: bytes) -> str:
    out, hexrun = [], []
    for b in pattern:
        if b in _LITERAL_OK:
            if hexrun:
                out.append("|" + " ".join(hexrun) + "|")
                hexrun = []
            out.append(chr(b))
        else:
            hexrun.append(f"{b:02X}")
    if hexrun:
        out.append("|" + " ".join(hexrun) + "|")
    return '"' + "".join(out) + '"'


def format_rule(rule: Rule) -> str:
    opts = rule.options
    parts = []
    if opts.msg:
        parts.append(f"msg:{_quote(opts.msg)}")
    for c in opts.contents:
        parts.append(f"content:{_content_text(c.pattern)}")
        if c.nocase:
            parts.append("nocase")
    if opts.classtype is not None:
        parts.append(f"classtype:{opts.classtype}")
    if opts.priority is not None:
        parts.append(f"priority:{opts.priority}")
    if opts.gid != 1:
        parts.append(f"gid:{opts.gid}")
    parts.append(f"sid:{opts.sid}")
    parts.append(f"rev:{opts.rev}")
    body = "; ".join(parts) + ";"
    h = rule.header
    if h is None:
        return f"alert ({body})"
    return (f"{h.action} {h.protocol} {h.src.text} {h.src_port.text} {h.direction} "
            f"{h.dst.text} {h.dst_port.text} ({body})")


# -- enable / disable ------------------------------------------------------

def set_rule_enabled(ruleset: RuleSet, gid: int, sid: int, enabled: bool) -> None:
    rule = ruleset.get(gid, sid)
    if rule is None:
        raise UnknownRule(f"no rule {gid}:{sid}")
    rule.enabled = bool(enabled)


def parse_rule_id(text: str) -> Tuple[int, int]:
    """``"1:1000001"`` -> (1, 1000001); a bare sid means gid 1."""
    gid, sep, sid = text.strip().partition(":")
    try:
        return (int(gid), int(sid)) if sep else (1, int(gid))
    except ValueError:
        raise UnknownRule(f"bad rule id {text!r}") from None


def load_rule_state(path) -> Dict[Tuple[int, int], bool]:
    """Read a sidecar of ``gid:sid<TAB>enabled|disabled`` lines."""
    state = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except FileNotFoundError:
        return state
    for line in lines:
        if not line.strip() or line.startswith("#"):
            continue
        ident, _, flag = line.partition("\t")
        state[parse_rule_id(ident)] = flag.strip() == "enabled"
    return state


def save_rule_state(path, state: Dict[Tuple[int, int], bool]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for (gid, sid), enabled in sorted(state.items()):
            fh.write(f"{gid}:{sid}\t{'enabled' if enabled else 'disabled'}\n")


def apply_rule_state(ruleset: RuleSet, state: Dict[Tuple[int, int], bool]) -> None:
    for (gid, sid), enabled in state.items():
        try:
            set_rule_enabled(ruleset, gid, sid, enabled)
        except UnknownRule:
            log.warning("rule state names unknown rule %d:%d; ignored", gid, sid)


# -- matching --------------------------------------------------------------

def _protocol_matches(protocol: str, kind: Optional[str]) -> bool:
    if protocol == "ip":
        return True
    if protocol == "icmp":
        return kind in ("icmp", "icmpv6")
    return kind == protocol


def match_rule(rule: Rule, packet) -> bool:
    """True when an enabled packet rule matches ``packet``.

    The enabled flag is checked here and nowhere else.
    """
    if not rule.enabled or rule.header is None:
        return False
    ip = packet.ip
    if ip is None:
        return False
    h = rule.header
    t = packet.transport
    if not _protocol_matches(h.protocol, t.kind if t else None):
        return False
    sport = t.src_port if t else None
    dport = t.dst_port if t else None
    forward = (h.src.matches(ip.src_ip) and h.src_port.matches(sport)
               and h.dst.matches(ip.dst_ip) and h.dst_port.matches(dport))
    if not forward:
        if h.direction != "<>":
            return False
        if not (h.src.matches(ip.dst_ip) and h.src_port.matches(dport)
                and h.dst.matches(ip.src_ip) and h.dst_port.matches(sport)):
            return False
    if rule.options.contents:
        payload = t.payload if t else b""
        lowered = None
        for c in rule.options.contents:
            if c.nocase:
                if lowered is None:
                    lowered = payload.lower()
                if c.pattern.lower() not in lowered:
                    return False
            elif c.pattern not in payload:
                return False
    return True
