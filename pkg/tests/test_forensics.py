import json
import random
from datetime import datetime

import jsonschema
import pytest
from hypothesis import given, settings, strategies as st

from ipsforensics import forge
from ipsforensics.alerts import AlertRecord, parse_alert_log, render_alert_log
from ipsforensics.blocks import render_block_state
from ipsforensics.capture import CaptureFile, CaptureRecord, write_capture
from ipsforensics.errors import EmptySeries, UnreadableSource
from ipsforensics.forensics import (HEADER, NOT_IDENTIFIED, QUESTIONS, REPORT_SCHEMA, EvidenceSet,
                                    ForensicReport, IncidentAnswer, RateSeries, TrafficFilter,
                                    analyze, collect, examine, peak, render_report,
                                    report_from_dict, report_to_dict, traffic_series)

from support import run_forged

HTTP_LOG = """\
2019-08-08 10:21:00\t3\tTCP\tUnknown Traffic\t140.213.44.183\t5792\t192.168.88.48\t80\t119:31\t(http_inspect) UNKNOWN METHOD
2019-08-07 23:48:00\t3\tTCP\tUnknown Traffic\t36.71.237.18\t17564\t192.168.88.48\t80\t119:31\t(http_inspect) UNKNOWN METHOD
2019-08-06 23:40:36\t3\tTCP\tUnknown Traffic\t36.72.144.215\t52806\t192.168.88.48\t80\t119:31\t(http_inspect) UNKNOWN METHOD
2019-08-06 23:40:57\t3\tTCP\tUnknown Traffic\t36.72.144.215\t52809\t192.168.88.48\t80\t119:31\t(http_inspect) UNKNOWN METHOD
2019-08-06 23:40:58\t3\tTCP\tUnknown Traffic\t36.72.144.215\t52807\t192.168.88.48\t80\t119:31\t(http_inspect) UNKNOWN METHOD
2019-08-06 23:41:04\t3\tTCP\tUnknown Traffic\t36.72.144.215\t52808\t192.168.88.48\t80\t119:31\t(http_inspect) UNKNOWN METHOD
"""

SWEEP_STATE = """\
ff02::16\t2019-08-13 13:21:58\tICMP ATTACK!! - 2019-08-13 13:21:58
fe80::519a:af2d:d0a5:e03b\t2019-08-13 13:21:58\tICMP ATTACK!! - 2019-08-13 13:21:58|(portscan) UDP Filtered Portsweep - 2019-08-13 13:22:02
ff02::1:3\t2019-08-13 13:22:02\t(portscan) UDP Filtered Portsweep - 2019-08-13 13:22:02
"""


@pytest.fixture
def sample_files(tmp_path):
    log = tmp_path / "alert.log"
    log.write_text(HTTP_LOG)
    state = tmp_path / "blocks.state"
    state.write_text(SWEEP_STATE)
    return log, state


@pytest.fixture(scope="module")
def http_run():
    capture, manifest = forge.forge_http_unknown_method()
    return manifest, run_forged(capture, manifest)


def evidence_of(alerts, table=None):
    return EvidenceSet(alerts=list(alerts), blocks=table)


# -- collection ------------------------------------------------------------

def test_collect_empty_log(tmp_path):
    path = tmp_path / "empty.log"
    path.write_text("")
    ev = collect([path])
    assert ev.alerts == []
    assert [(p.kind, p.records) for p in ev.provenance] == [("alerts", 0)]


def test_collect_sample_files(sample_files):
    ev = collect(sample_files)
    assert len(ev.alerts) == 6
    assert len(ev.blocks) == 3
    assert len(ev.provenance) == 2 and ev.malformed == 0


def test_collect_counts_malformed(tmp_path):
    path = tmp_path / "alert.log"
    path.write_text(HTTP_LOG + "garbage line\n")
    ev = collect([path])
    assert len(ev.alerts) == 6 and ev.malformed == 1


def test_collect_capture(tmp_path):
    capture, _ = forge.forge_baseline(requests=2)
    path = tmp_path / "c.pcap"
    write_capture(capture, path)
    ev = collect([path])
    assert ev.captures[0][1] == capture
    assert ev.provenance[0].kind == "capture"


def test_collect_unreadable(tmp_path):
    with pytest.raises(UnreadableSource):
        collect([tmp_path / "missing.log"])


def test_collect_resave_round_trip(sample_files, tmp_path):
    ev = collect(sample_files)
    log2, state2 = tmp_path / "a2.log", tmp_path / "b2.state"
    log2.write_text(render_alert_log(ev.alerts))
    state2.write_text(render_block_state(ev.blocks))
    again = collect([log2, state2])
    assert again.alerts == ev.alerts and again.blocks == ev.blocks
    assert [(p.kind, p.records) for p in again.provenance] == [(p.kind, p.records) for p in ev.provenance]


# -- examination -----------------------------------------------------------

def test_examine_empty():
    assert examine(EvidenceSet()) == []


def test_sample_log_three_incidents(sample_files):
    incidents = examine(collect(sample_files))
    assert len(incidents) == 3
    assert all(i.kind == "Hypertext transfer protocol (HTTP)" for i in incidents)
    assert [len(i.alerts) for i in incidents] == [4, 1, 1]
    first = incidents[0]
    assert (first.start, first.end) == (datetime(2019, 8, 6, 23, 40, 36), datetime(2019, 8, 6, 23, 41, 4))


def test_examine_order_invariant(sample_files):
    ev = collect(sample_files)
    baseline = examine(ev)
    rng = random.Random(5)
    for _ in range(20):
        shuffled = list(ev.alerts)
        rng.shuffle(shuffled)
        assert examine(evidence_of(shuffled, ev.blocks)) == baseline


def test_gap_threshold_configurable(sample_files):
    ev = collect(sample_files)
    assert len(examine(ev, gap_threshold=2 * 86400)) == 1
    assert len(examine(ev, gap_threshold=5)) == 5


def test_families_split(forged_corpus):
    alerts = []
    for capture, manifest in forged_corpus:
        alerts += run_forged(capture, manifest).alerts
    incidents = examine(evidence_of(alerts))
    # partition: every alert lands in exactly one incident
    assert sum(len(i.alerts) for i in incidents) == len(alerts)
    for inc in incidents:
        families = {a.gid if a.gid in (112, 119, 122) else a.signature for a in inc.alerts}
        assert len(families) == 1
        stamps = [a.timestamp for a in inc.alerts]
        assert stamps == sorted(stamps)
        assert all((b - a).total_seconds() <= 300 for a, b in zip(stamps, stamps[1:]))
        assert (inc.start, inc.end) == (min(stamps), max(stamps))
    kinds = {i.kind for i in incidents}
    assert {"Hypertext transfer protocol (HTTP)", "Port scanning", "ARP spoofing", "ICMP ATTACK!!"} <= kinds


# -- analysis --------------------------------------------------------------

def test_http_incident_answers(http_run):
    manifest, engine = http_run
    ev = evidence_of(engine.alerts, engine.table)
    (answer,) = analyze(examine(ev), ev).incidents
    assert answer.what == "Hypertext transfer protocol (HTTP)"
    assert answer.protocol == ("Transmission control protocol (TCP)",)
    assert set(answer.attacker) == set(manifest.params["attackers"])
    assert answer.destination == (manifest.params["server"][0],)
    assert all(answer.answers())
    assert set(answer.blocked) == {manifest.params["server"][0], *manifest.params["attackers"]}


def test_arp_attacker_not_identified():
    capture, manifest = forge.forge_arp_spoof()
    engine = run_forged(capture, manifest)
    ev = evidence_of(engine.alerts)
    (answer,) = analyze(examine(ev), ev).incidents
    assert answer.what == "ARP spoofing"
    assert answer.attacker == (NOT_IDENTIFIED,)
    assert answer.destination == ("unknown",)
    assert answer.protocol == ("Address resolution protocol (ARP)",)


def test_report_matches_flat_scan(forged_corpus):
    alerts = []
    for capture, manifest in forged_corpus:
        alerts += run_forged(capture, manifest).alerts
    ev = evidence_of(alerts)
    incidents = examine(ev)
    report = analyze(incidents, ev)
    for inc, ans in zip(incidents, report.incidents):
        srcs = set()
        dsts = set()
        for a in inc.alerts:
            if a.src_ip:
                srcs.add(a.src_ip)
            if a.dst_ip:
                dsts.add(a.dst_ip)
        if inc.family != "112:*":
            assert set(ans.attacker) == (srcs or {"unknown"})
        assert set(ans.destination) == (dsts or {"unknown"})
        assert ans.alert_count == len(inc.alerts)
        assert set(ans.signatures) == {a.signature for a in inc.alerts}


def test_analysis_deterministic(sample_files):
    ev = collect(sample_files)
    assert analyze(examine(ev), ev) == analyze(examine(ev), ev)


# -- rendering -------------------------------------------------------------

def test_empty_report_table():
    assert render_report(ForensicReport()).decode() == "\t".join(HEADER) + "\n"


def test_table_contains_questions(http_run):
    _, engine = http_run
    ev = evidence_of(engine.alerts, engine.table)
    text = render_report(analyze(examine(ev), ev)).decode()
    for q in QUESTIONS:
        assert q in text
    assert "What specific attack that occurred?\tHypertext transfer protocol (HTTP)" in text


def test_question_strings():
    assert QUESTIONS == ("What specific attack that occurred?", "When the attack occur?",
                         "The IP Address of the attacker?", "The destination of the IP Address?",
                         "The protocol is used?")


def test_json_schema_and_round_trip(forged_corpus):
    alerts = []
    for capture, manifest in forged_corpus:
        alerts += run_forged(capture, manifest).alerts
    ev = evidence_of(alerts)
    report = analyze(examine(ev), ev)
    data = json.loads(render_report(report, "json"))
    jsonschema.validate(data, REPORT_SCHEMA)
    assert report_from_dict(data) == report


word = st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=12)
answers = st.builds(IncidentAnswer, word, word, word, st.lists(word, min_size=1).map(tuple),
                    st.lists(word, min_size=1).map(tuple), st.lists(word, min_size=1).map(tuple),
                    st.integers(1, 10**6), st.lists(word).map(tuple), st.lists(word).map(tuple))


@settings(max_examples=100, deadline=None)
@given(st.lists(answers, max_size=5).map(tuple))
def test_report_json_round_trip_random(incidents):
    report = ForensicReport(incidents)
    data = json.loads(render_report(report, "json"))
    jsonschema.validate(data, REPORT_SCHEMA)
    assert report_from_dict(data) == report
    assert report_to_dict(report_from_dict(data)) == data


# -- traffic rate ----------------------------------------------------------

def test_empty_series():
    series = traffic_series(CaptureFile())
    assert series.bins == ()
    with pytest.raises(EmptySeries):
        peak(series)


def test_single_bin_peak():
    series = RateSeries(1.0, ((10.0, 800),))
    assert peak(series) == (10.0, 800.0)


def test_peak_tie_earliest():
    series = RateSeries(1.0, ((10.0, 800), (11.0, 100), (12.0, 800)))
    assert peak(series) == (10.0, 800.0)


def test_conservation(forged_corpus):
    for capture, _ in forged_corpus:
        series = traffic_series(capture, 0.5)
        assert series.total_bits == sum(r.orig_len * 8 for r in capture.records)


def test_bins_contiguous():
    cap = CaptureFile([CaptureRecord(100, 0, 10, bytes(10)), CaptureRecord(104, 500_000, 10, bytes(10))])
    series = traffic_series(cap, 1.0)
    assert [b[0] for b in series.bins] == [100.0, 101.0, 102.0, 103.0, 104.0]
    assert [b[1] for b in series.bins] == [80, 0, 0, 0, 80]


def test_flood_interior_bins_within_one_percent():
    capture, manifest = forge.forge_icmp_flood(packets_per_second=100, duration=10)
    # constructed rate: packets per second times bits per packet
    rate = manifest.params["packets_per_second"] * manifest.total_bits / manifest.packets
    series = traffic_series(capture, 1.0)
    interior = [series.rate(i) for i in range(1, len(series.bins) - 1)]
    assert interior
    assert all(abs(r - rate) <= 0.01 * rate for r in interior)


def test_flood_peak_above_baseline():
    flood, _ = forge.forge_tcp_flood(duration=10)
    base, _ = forge.forge_baseline(duration=10)
    assert peak(traffic_series(flood))[1] > peak(traffic_series(base))[1]


def test_filters():
    capture, manifest = forge.forge_icmp_flood(duration=1)
    total = traffic_series(capture).total_bits
    assert traffic_series(capture, flt=TrafficFilter.parse("src=192.168.88.46/32")).total_bits == total
    assert traffic_series(capture, flt=TrafficFilter.parse("dst=192.168.88.46/32")).total_bits == 0
    with pytest.raises(ValueError):
        TrafficFilter.parse("sideways=1.2.3.4")
