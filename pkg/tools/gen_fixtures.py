#!/usr/bin/env python3
"""Regenerate the bundled fixture corpus under fixtures/.

The tables below transcribe the reference detection-count dataset for
Metasploitable targets scanned in a VM and in a container build of the same
images. Raw report files (fixtures/reports/) realize those counts in each
tool's native format; the canonical corpus (fixtures/corpus/) is produced by
running the package parsers over the raw reports, except for OpenVAS, whose
published data is per-CWE aggregates and is transcribed directly at class
level.

Usage: python tools/gen_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from cyrange import ingest  # noqa: E402

FIXTURES = ROOT / "fixtures"

# (cwe, classification, count) - counts identical in both environments
OPENVAS_ROWS = [
    ("16", "Configuration", 2),
    ("17", "Code", 2),
    ("18", "Source Code", 1),
    ("20", "Improper Input Validation", 82),
    ("22", "Pass Traversal", 7),
    ("59", "Link Following", 6),
    ("74", "Injection", 1),
    ("79", "Cross Site Scripting", 33),
    ("89", "SQL Injection", 7),
    ("93", "CRLF Injection", 4),
    ("94", "Code Injection", 13),
    ("113", "HTTP Response Splitting", 1),
    ("119", "Buffer Error", 66),
    ("125", "Out-of-bounds Read", 2),
    ("134", "Use of Externally-Controlled Format String", 5),
    ("189", "Numeric Errors", 31),
    ("190", "Integer Overflow or Wraparound", 3),
    ("200", "Exposure of Sensitive Information to an Unauthorized Actor", 42),
    ("254", "7PK - Security Features", 2),
    ("255", "Credentials Management Errors", 2),
    ("264", "Permissions, Privileges, and Access Controls", 54),
    ("275", "Permission Issues", 1),
    ("284", "Improper Access Control", 5),
    ("287", "Improper Authentication", 8),
    ("295", "Improper Certificate Validation", 2),
    ("310", "Cryptographic Issues", 22),
    ("311", "Missing Encryption of Sensitive Data", 22),
    ("320", "Key Management Errors", 2),
    ("327", "Use of a Broken or Risky Cryptographic Algorithm", 1),
    ("345", "Insufficient Verification of Data Authenticity", 1),
    ("352", "Cross Site Request Forgery", 5),
    ("362", "Race Condition", 9),
    ("384", "Session Fixation", 1),
    ("399", "Resource Management Errors", 51),
    ("400", "Uncontrolled Resource Consumption", 2),
    ("415", "Double Free", 1),
    ("416", "Use After Free", 2),
    ("476", "NULL Pointer Dereference", 8),
    ("502", "Deserialization of Untrusted Data", 2),
    ("552", "Files or Directories Accessible to External Parties", 1),
    ("601", "Open Redirect", 5),
    ("732", "Incorrect Permission Assignment for Critical Resource", 1),
    ("772", "Missing Release of Resource after Effective Lifetime", 1),
    ("787", "Out-of-bounds Write", 1),
    ("835", "Infinite Loop", 8),
    ("other", "Design errors", 4),
    ("other", "Other errors", 50),
    ("noinfo", "Lack of information", 123),
]

# Synthetic detector ids for the raw OpenVAS realization: the dataset is
# aggregated per class, so each class gets one placeholder CVE. The noinfo
# class deliberately has no CWE-map entry.
def _openvas_cve(cwe: str, label: str) -> str:
    if label == "Design errors":
        return "CVE-9999-0901"
    if label == "Other errors":
        return "CVE-9999-0902"
    if label == "Lack of information":
        return "CVE-9999-0999"
    return f"CVE-9999-{int(cwe):04d}"


# (port, nmap service name, product, version) - one open port per service row
NMAP_ROWS = [
    (21, "ftp", "vsftpd", "2.3.4"),
    (22, "ssh", "OpenSSH", "4.7p1"),
    (53, "domain", "ISC BIND", "9.4.2"),
    (80, "http", "Apache httpd", "2.2.8"),
    (111, "rpcbind", "rpcbind", "2"),
    (139, "netbios-ssn", "Samba smbd", "3.X - 4.X"),
    (631, "ipp", "CUPS", "1.7"),
    (1099, "java-rmi", "Java RMI Registry", ""),
    (2049, "nfs", "nfs", "2-4"),
    (2121, "ftp", "ProFTPD", "1.3.1"),
    (3306, "mysql", "MySQL", "5.0.51a"),
    (3500, "http", "WEBrick httpd", "1.3.1"),
    (3632, "distccd", "distccd", "v1"),
    (5432, "postgresql", "PostgreSQL DB", "8.3.0 - 8.3.7"),
    (5900, "vnc", "VNC", "protocol 3.3"),
    (6667, "irc", "UnrealIRCd", ""),
    (8009, "ajp13", "Apache Jserv", "Protocol v1.3"),
    (8180, "http", "Apache Tomcat/Coyote JSP engine", "1.1"),
    (8787, "drb", "Ruby DRb", ""),
]

NMAP_ELAPSED = {"vm": "138.93", "container": "113.75"}
NMAP_ADDR = {"vm": "192.168.56.101", "container": "192.168.56.102"}

# (cweid, alert, url path, vm count, container count)
ZAP_MSF2_ROWS = [
    ("89", "SQL Injection", "/dvwa/vulnerabilities/sqli/", 358, 422),
    ("97", "Server Side Include", "/dvwa/vulnerabilities/ssi/", 1, 1),
    ("79", "XSS (reflected)", "/dvwa/vulnerabilities/xss_r/", 1075, 1000),
    ("79", "XSS (stored)", "/dvwa/vulnerabilities/xss_s/", 5, 5),
    ("22", "Pass Traversal", "/dvwa/vulnerabilities/fi/", 21, 21),
    ("78", "Command Injection", "/dvwa/vulnerabilities/exec/", 361, 342),
    ("98", "File Inclusion", "/mutillidae/index.php", 209, 206),
    ("200", "Application error disclosure", "/dvwa/login.php", 242, 246),
    ("548", "Directory Browsing", "/dav/", 14, 15),
    ("472", "Parameter tampering", "/mutillidae/register.php", 13, 14),
    ("200", "Buffer Error disclosure", "/phpMyAdmin/index.php", 291, 287),
    ("200", "Private IP disclosure", "/twiki/bin/view", 136, 139),
]

ZAP_MSF3_ROWS = [
    ("89", "SQL Injection", "/payroll_app.php", 2, 2),
    ("97", "Server Side Include", "/ssi/", 0, 0),
    ("79", "XSS (reflected)", "/drupal/search", 1, 1),
    ("79", "XSS (stored)", "/drupal/node", 0, 0),
    ("22", "Pass Traversal", "/uploads/", 0, 0),
    ("78", "Command Injection", "/cgi-bin/ping", 0, 0),
    ("98", "File Inclusion", "/readme.php", 0, 0),
    ("200", "Application error disclosure", "/chat/", 1, 1),
    ("548", "Directory Browsing", "/uploads/", 21, 21),
    ("472", "Parameter tampering", "/payroll_app.php", 1, 0),
    ("200", "Buffer Error disclosure", "/phpmyadmin/index.php", 1, 1),
    ("200", "Private IP disclosure", "/cgi-bin/status", 1, 1),
]

# (osvdb id, message, count) - counts identical in both environments
NIKTO_ROWS = [
    ("48", "/doc/: directory is browsable", 1),
    ("119", "/cgi-bin/finger: CVE-1999-0269 finger CGI reveals user information", 2),
    ("576", "/console/login/LoginForm.jsp: weblogic admin interface vulnerability", 1),
    ("877", "TRACE method is active, site is vulnerable to XST", 1),
    ("3092", "/phpMyAdmin/: phpMyAdmin is browsable", 7),
    ("3233", "/icons/README: server configuration file is browsable", 3),
    ("3268", "/doc/: directory index is browsable", 9),
    ("3288", "Abyss 1.03 directory traversal vulnerability", 1),
    ("12184", "/index.php?=PHPB8B5F2A0: PHP version disclosure", 1),
]

# Module run outcomes - every module succeeded in both environments
MSF_MODULES = [
    "auxiliary/scanner/ssl/openssl_heartbleed",
    "auxiliary/scanner/ssh/ssh_enumusers",
    "auxiliary/scanner/http/options",
    "auxiliary/scanner/http/trace",
    "auxiliary/scanner/http/tomcat_enum",
    "auxiliary/scanner/http/ssl_version",
    "auxiliary/scanner/ssl/openssl_ccs",
    "auxiliary/scanner/http/apache_optionsbleed",
    "auxiliary/scanner/rservices/rexec_login",
    "auxiliary/scanner/rservices/rlogin_login",
    "auxiliary/scanner/rservices/rsh_login",
    "auxiliary/server/openssl_heartbeat_client_memory",
    "exploit/linux/samba/is_known_pipename",
    "exploit/linux/samba/setinfopolicy_heap",
    "exploit/unix/misc/distcc_exec",
    "exploit/unix/irc/unreal_ircd_3281_backdoor",
    "exploit/unix/ftp/proftpd_modcopy_exec",
    "exploit/unix/webapp/twiki_history",
    "exploit/multi/browser/java_storeimagearray",
    "exploit/multi/http/php_cgi_arg_injection",
    "exploit/multi/samba/usermap_script",
]


def gen_nmap(env: str) -> str:
    ports = []
    for port, name, product, version in NMAP_ROWS:
        version_attr = f' version="{version}"' if version else ""
        ports.append(
            f'      <port protocol="tcp" portid="{port}">'
            f'<state state="open"/>'
            f'<service name="{name}" product="{product}"{version_attr}/></port>'
        )
    ports_xml = "\n".join(ports)
    return f"""<?xml version="1.0" encoding="UTF-8"?>
<nmaprun scanner="nmap" args="nmap -sV metasploitable" version="7.70">
  <host>
    <address addr="{NMAP_ADDR[env]}" addrtype="ipv4"/>
    <hostnames><hostname name="metasploitable" type="user"/></hostnames>
    <ports>
{ports_xml}
    </ports>
  </host>
  <runstats><finished elapsed="{NMAP_ELAPSED[env]}"/></runstats>
</nmaprun>
"""


def gen_openvas(env: str) -> str:
    results = []
    for index, (cwe, label, count) in enumerate(OPENVAS_ROWS):
        cve = _openvas_cve(cwe, label)
        oid = f"1.3.6.1.4.1.25623.1.0.9{index:05d}"
        for _ in range(count):
            results.append(
                "    <result>"
                f"<name>{label}</name>"
                "<host>metasploitable</host>"
                "<port>general/tcp</port>"
                "<threat>Medium</threat>"
                f'<nvt oid="{oid}"><cve>{cve}</cve></nvt>'
                "</result>"
            )
    body = "\n".join(results)
    return f'<?xml version="1.0" encoding="UTF-8"?>\n<report>\n  <results>\n{body}\n  </results>\n</report>\n'


def gen_zap(target: str, rows, column: int) -> str:
    alerts = []
    for cweid, alert, path, vm_count, ct_count in rows:
        count = (vm_count, ct_count)[column]
        if count == 0:
            continue
        alerts.append({
            "alert": alert,
            "cweid": cweid,
            "riskdesc": "Medium",
            "instances": [{"uri": f"http://{target}{path}", "method": "GET"}] * count,
        })
    doc = {"@version": "2.8.0", "site": [{"@name": f"http://{target}", "alerts": alerts}]}
    return json.dumps(doc, indent=1) + "\n"


def gen_nikto(env: str) -> str:
    del env  # identical in both environments
    lines = []
    for osvdb, message, count in NIKTO_ROWS:
        for _ in range(count):
            lines.append(f'"metasploitable","80","{osvdb}","{message}"')
    return "".join(line + "\n" for line in lines)


def gen_msf(env: str) -> str:
    del env  # identical in both environments
    return "".join(f"{module} SUCCESS\n" for module in MSF_MODULES)


def gen_openvas_corpus(env: str) -> str:
    fs = ingest.FindingSet(env)
    for cwe, label, count in OPENVAS_ROWS:
        fs.add_record(tool="openvas", target="metasploitable", detector_id=label,
                      cwe=cwe, location="-", count=count)
    return ingest.write_jsonl(fs)


def main() -> None:
    reports = FIXTURES / "reports"
    corpus = FIXTURES / "corpus"
    reports.mkdir(parents=True, exist_ok=True)
    corpus.mkdir(parents=True, exist_ok=True)

    for env in ("vm", "container"):
        column = 0 if env == "vm" else 1

        nmap_xml = gen_nmap(env)
        (reports / f"nmap_{env}.xml").write_text(nmap_xml, encoding="utf-8")
        (corpus / f"nmap_{env}.jsonl").write_text(
            ingest.write_jsonl(ingest.parse_nmap(nmap_xml, env)), encoding="utf-8")

        openvas_xml = gen_openvas(env)
        (reports / f"openvas_{env}.xml").write_text(openvas_xml, encoding="utf-8")
        (corpus / f"openvas_{env}.jsonl").write_text(gen_openvas_corpus(env), encoding="utf-8")

        for target_label, rows in (("metasploitable2", ZAP_MSF2_ROWS), ("metasploitable3", ZAP_MSF3_ROWS)):
            short = "msf2" if target_label.endswith("2") else "msf3"
            zap_json = gen_zap(target_label, rows, column)
            (reports / f"zap_{short}_{env}.json").write_text(zap_json, encoding="utf-8")
            (corpus / f"zap_{short}_{env}.jsonl").write_text(
                ingest.write_jsonl(ingest.parse_zap(zap_json, env)), encoding="utf-8")

        nikto_csv = gen_nikto(env)
        (reports / f"nikto_{env}.csv").write_text(nikto_csv, encoding="utf-8")
        (corpus / f"nikto_{env}.jsonl").write_text(
            ingest.write_jsonl(ingest.parse_nikto(nikto_csv, env)), encoding="utf-8")

        msf_log = gen_msf(env)
        (reports / f"msf_{env}.log").write_text(msf_log, encoding="utf-8")
        (corpus / f"msf_{env}.jsonl").write_text(
            ingest.write_jsonl(ingest.parse_msf_log(msf_log, env, target="metasploitable")), encoding="utf-8")

    print(f"fixtures written under {FIXTURES}")


if __name__ == "__main__":
    main()
