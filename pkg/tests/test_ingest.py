import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIXTURES, load_corpus
from cyrange import ingest
from cyrange.errors import IngestError
from cyrange.ingest import CweMap, Finding, FindingSet, map_cve_to_cwe
from cyrange.repro import aggregate_by_cwe

NMAP_FRAGMENT = """<?xml version="1.0"?>
<nmaprun>
  <host>
    <address addr="10.0.0.5" addrtype="ipv4"/>
    <hostnames><hostname name="metasploitable"/></hostnames>
    <ports>
      <port protocol="tcp" portid="21">
        <state state="open"/>
        <service name="ftp" product="vsftpd" version="2.3.4"/>
      </port>
      <port protocol="tcp" portid="23">
        <state state="closed"/>
        <service name="telnet"/>
      </port>
    </ports>
  </host>
</nmaprun>
"""


def report_text(name: str) -> str:
    return (FIXTURES / "reports" / name).read_text(encoding="utf-8")


# ---------------------------------------------------------------------------
# nmap

def test_nmap_fragment_port_21():
    fs = ingest.parse_nmap(NMAP_FRAGMENT, "vm")
    assert len(fs) == 1
    ((key, cwe, count),) = fs.entries()
    assert key.tool == "nmap"
    assert key.detector_id == "service:vsftpd/2.3.4"
    assert key.location == "21/tcp"
    assert cwe == "189"
    assert count == 1


def test_nmap_zero_open_ports():
    report = NMAP_FRAGMENT.replace('state="open"', 'state="filtered"')
    assert len(ingest.parse_nmap(report, "vm")) == 0


def test_nmap_fixture_19_services_and_duration():
    vm = ingest.parse_nmap(report_text("nmap_vm.xml"), "vm")
    ct = ingest.parse_nmap(report_text("nmap_container.xml"), "container")
    assert len(vm) == 19 and vm.total() == 19
    assert len(ct) == 19
    assert vm.meta["elapsed_s"] == 138.93
    assert ct.meta["elapsed_s"] == 113.75


def test_nmap_malformed_xml():
    with pytest.raises(IngestError):
        ingest.parse_nmap("<nmaprun><host>", "vm")


def test_nmap_missing_host():
    with pytest.raises(IngestError) as excinfo:
        ingest.parse_nmap("<nmaprun></nmaprun>", "vm")
    assert "host" in str(excinfo.value)


# ---------------------------------------------------------------------------
# openvas

OPENVAS_FRAGMENT = """<report><results>
  <result><name>x</name><host>metasploitable</host><port>80/tcp</port>
    <threat>High</threat><nvt oid="1.2.3"><cve>CVE-9999-0079</cve></nvt></result>
</results></report>
"""


def test_openvas_result_mapped_to_cwe():
    fs = ingest.parse_openvas(OPENVAS_FRAGMENT, "vm")
    ((key, cwe, count),) = fs.entries()
    assert key.tool == "openvas"
    assert key.detector_id == "CVE-9999-0079"
    assert cwe == "79"


def test_openvas_falls_back_to_oid():
    report = OPENVAS_FRAGMENT.replace("<cve>CVE-9999-0079</cve>", "<cve>NOCVE</cve>")
    ((key, cwe, _),) = ingest.parse_openvas(report, "vm").entries()
    assert key.detector_id == "1.2.3"
    assert cwe == "noinfo"


def test_openvas_empty_report():
    assert len(ingest.parse_openvas("<report><results></results></report>", "vm")) == 0


def test_openvas_fixture_matches_class_totals():
    raw = ingest.parse_openvas(report_text("openvas_vm.xml"), "vm")
    assert raw.total() == 705
    totals = aggregate_by_cwe(raw)
    assert totals["20"] == 82
    assert totals["79"] == 33
    assert totals["noinfo"] == 123
    # The class-level corpus transcription aggregates identically.
    assert totals == aggregate_by_cwe(load_corpus("openvas_vm"))


# ---------------------------------------------------------------------------
# zap

def test_zap_instances_fold_into_one_key():
    report = """{"site": [{"@name": "http://msf2", "alerts": [
        {"alert": "SQL Injection", "cweid": "89", "instances": [
            {"uri": "http://msf2/a"}, {"uri": "http://msf2/a"}, {"uri": "http://msf2/a"}]}
    ]}]}"""
    fs = ingest.parse_zap(report, "vm")
    ((key, cwe, count),) = fs.entries()
    assert count == 3
    assert cwe == "89"
    assert key.target == "msf2"
    assert key.location == "/a"


def test_zap_msf2_fixture_sqli_totals():
    vm = ingest.parse_zap(report_text("zap_msf2_vm.json"), "vm")
    ct = ingest.parse_zap(report_text("zap_msf2_container.json"), "container")
    vm_sqli = [count for key, _, count in vm.entries() if key.detector_id == "SQL Injection"]
    ct_sqli = [count for key, _, count in ct.entries() if key.detector_id == "SQL Injection"]
    assert sum(vm_sqli) == 358
    assert sum(ct_sqli) == 422


def test_zap_zero_alert_report():
    assert len(ingest.parse_zap('{"site": [{"@name": "http://x", "alerts": []}]}', "vm")) == 0


def test_zap_malformed_json():
    with pytest.raises(IngestError):
        ingest.parse_zap("{not json", "vm")


def test_zap_missing_alerts_array():
    with pytest.raises(IngestError) as excinfo:
        ingest.parse_zap('{"site": [{"@name": "http://x"}]}', "vm")
    assert "alerts" in str(excinfo.value)


# ---------------------------------------------------------------------------
# nikto

def test_nikto_repeated_rows_accumulate():
    report = '"metasploitable","80","3092","phpMyAdmin is browsable"\n' * 7
    ((key, cwe, count),) = ingest.parse_nikto(report, "vm").entries()
    assert key.detector_id == "OSVDB-3092"
    assert count == 7
    assert cwe == "other"


def test_nikto_osvdb_119_is_other():
    report = '"metasploitable","80","119","CVE-1999-0269 finger CGI"\n'
    ((key, cwe, _),) = ingest.parse_nikto(report, "vm").entries()
    assert key.detector_id == "OSVDB-119"
    assert cwe == "other"


def test_nikto_empty_file():
    assert len(ingest.parse_nikto("", "vm")) == 0


def test_nikto_malformed_row():
    with pytest.raises(IngestError) as excinfo:
        ingest.parse_nikto('"host","80","3092"\n', "vm")
    assert "4 columns" in str(excinfo.value)


def test_nikto_fixture_totals():
    fs = ingest.parse_nikto(report_text("nikto_vm.csv"), "vm")
    assert len(fs) == 9
    assert fs.total() == 26


# ---------------------------------------------------------------------------
# msf run logs

def test_msf_success_line():
    fs = ingest.parse_msf_log("exploit/unix/irc/unreal_ircd_3281_backdoor SUCCESS\n", "vm")
    ((key, cwe, count),) = fs.entries()
    assert key.detector_id == "exploit/unix/irc/unreal_ircd_3281_backdoor"
    assert cwe == "20"
    assert count == 1


def test_msf_all_fail_log():
    log = "exploit/unix/misc/distcc_exec FAIL\nexploit/multi/samba/usermap_script FAIL\n"
    assert len(ingest.parse_msf_log(log, "vm")) == 0


def test_msf_fixture_module_count():
    fs = ingest.parse_msf_log(report_text("msf_vm.log"), "vm", target="metasploitable")
    assert len(fs) == 21
    assert fs.total() == 21


def test_msf_unrecognized_line():
    with pytest.raises(IngestError):
        ingest.parse_msf_log("exploit/unix/misc/distcc_exec exploded\n", "vm")


# ---------------------------------------------------------------------------
# cwe mapping

def test_map_unmapped_id_is_noinfo():
    assert map_cve_to_cwe("CVE-0000-0000") == "noinfo"


def test_map_osvdb_exact():
    assert map_cve_to_cwe("OSVDB-576") == "284"


def test_map_service_prefix():
    assert map_cve_to_cwe("service:vsftpd/2.3.4") == "189"


def test_map_longest_prefix_wins():
    custom = CweMap(prefix={"service:Apache": "99", "service:Apache Tomcat": "20"})
    assert custom.lookup("service:Apache Tomcat/Coyote JSP engine/1.1") == "20"
    assert custom.lookup("service:Apache httpd/2.2.8") == "99"


def test_noinfo_only_when_unmapped():
    for fs_name in ("nmap_vm", "nikto_vm", "msf_vm", "openvas_vm"):
        for key, cwe, _ in load_corpus(fs_name).entries():
            if cwe == "noinfo":
                assert map_cve_to_cwe(key.detector_id) == "noinfo"


# ---------------------------------------------------------------------------
# FindingSet semantics and interchange

def test_parsers_emit_only_their_tool_tag():
    pairs = [
        (ingest.parse_nmap(report_text("nmap_vm.xml"), "vm"), "nmap"),
        (ingest.parse_openvas(report_text("openvas_vm.xml"), "vm"), "openvas"),
        (ingest.parse_zap(report_text("zap_msf2_vm.json"), "vm"), "zap"),
        (ingest.parse_nikto(report_text("nikto_vm.csv"), "vm"), "nikto2"),
        (ingest.parse_msf_log(report_text("msf_vm.log"), "vm"), "msf"),
    ]
    for fs, tool in pairs:
        assert {key.tool for key, _, _ in fs.entries()} == {tool}


def test_order_independence_of_parsing():
    lines = report_text("msf_vm.log").splitlines()
    shuffled = lines[:]
    random.Random(7).shuffle(shuffled)
    original = ingest.parse_msf_log("\n".join(lines), "vm")
    permuted = ingest.parse_msf_log("\n".join(shuffled), "vm")
    assert original == permuted


def test_environment_mismatch_on_add():
    fs = FindingSet("vm")
    finding = Finding(tool="nmap", environment="container", target="t",
                      detector_id="d", cwe="20", location="80/tcp")
    with pytest.raises(ValueError):
        fs.add(finding)


def test_merge_is_commutative_and_accumulates():
    a = FindingSet("vm")
    a.add_record("nmap", "t", "d1", "20", "80/tcp", 2)
    b = FindingSet("vm")
    b.add_record("nmap", "t", "d1", "20", "80/tcp", 1)
    b.add_record("zap", "t", "d2", "89", "/x", 4)
    assert a.merge(b) == b.merge(a)
    assert a.merge(b).counts()[("nmap", "t", "d1", "80/tcp")] == 3


def test_merge_rejects_mixed_environments():
    with pytest.raises(ValueError):
        FindingSet("vm").merge(FindingSet("container"))


def test_read_jsonl_rejects_mixed_environment_lines():
    text = (
        '{"tool": "nmap", "env": "vm", "target": "t", "detector_id": "d", "cwe": "20", "location": "l", "count": 1}\n'
        '{"tool": "nmap", "env": "container", "target": "t", "detector_id": "d2", "cwe": "20", "location": "l", "count": 1}\n'
    )
    with pytest.raises(IngestError):
        ingest.read_jsonl(text)


def test_read_jsonl_empty_without_environment():
    with pytest.raises(IngestError):
        ingest.read_jsonl("")
    assert len(ingest.read_jsonl("", environment="vm")) == 0


finding_records = st.tuples(
    st.sampled_from(ingest.TOOLS),
    st.sampled_from(["host-a", "host-b"]),
    st.text(alphabet="abcd", min_size=1, max_size=4),
    st.sampled_from(["20", "79", "other", "noinfo"]),
    st.sampled_from(["80/tcp", "-", "/login"]),
    st.integers(min_value=1, max_value=5),
)


@settings(max_examples=80, deadline=None)
@given(st.lists(finding_records, max_size=10))
def test_interchange_round_trip(records):
    fs = FindingSet("vm")
    for tool, target, detector, cwe, location, count in records:
        fs.add_record(tool, target, detector, cwe, location, count)
    assert ingest.read_jsonl(ingest.write_jsonl(fs), environment="vm") == fs
