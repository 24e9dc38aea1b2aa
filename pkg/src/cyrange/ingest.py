"""Normalize heterogeneous scanner and exploit reports into one finding model.

Each parser consumes a documented subset of its tool's report format and
emits a FindingSet: a multiset of findings keyed by
(tool, target, detector_id, location). Counts accumulate on key collisions.
Supported inputs:

* Nmap XML: ``host`` (with ``hostnames``/``address``), ``ports/port`` with an
  open ``state`` and a ``service`` element; ``runstats/finished@elapsed`` is
  kept as scan-duration metadata.
* OpenVAS XML: ``result`` elements with ``nvt`` (oid attribute, optional
  ``cve`` child), ``host``, ``port``, ``threat``.
* ZAP JSON: ``site[]`` with ``alerts[]``; each alert contributes one finding
  per entry in ``instances[]`` (identity is the alert name plus URL path, so
  instance counts fold into multiset counts).
* Nikto2 CSV: rows of (host, port, osvdb, message).
* Exploit run logs: one ``<module path> <SUCCESS|FAIL>`` line per module.

The canonical interchange format is JSON lines with keys
tool, env, target, detector_id, cwe, location, count.
"""

from __future__ import annotations

import csv
import io
import json
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Iterator, NamedTuple
from urllib.parse import urlparse

from .errors import DataFileError, IngestError

TOOLS = ("openvas", "nmap", "zap", "nikto2", "msf")
ENVIRONMENTS = ("real", "vm", "container")

CWE_NOINFO = "noinfo"
CWE_OTHER = "other"


class FindingKey(NamedTuple):
    tool: str
    target: str
    detector_id: str
    location: str


@dataclass(frozen=True)
class Finding:
    """One normalized detection outcome. Severity never enters identity."""

    tool: str
    environment: str
    target: str
    detector_id: str
    cwe: str
    location: str
    severity: str | None = None

    def __post_init__(self):
        if self.tool not in TOOLS:
            raise ValueError(f"unknown tool tag: {self.tool}")
        if self.environment not in ENVIRONMENTS:
            raise ValueError(f"unknown environment tag: {self.environment}")
        if not self.detector_id:
            raise ValueError("detector_id must be non-empty")

    @property
    def key(self) -> FindingKey:
        return FindingKey(self.tool, self.target, self.detector_id, self.location)


def cwe_sort_key(cwe: str) -> tuple[int, object]:
    """Numeric CWE ids sort ascending, named buckets (design/other/noinfo) after."""
    return (0, int(cwe)) if cwe.isdigit() else (1, cwe)


class FindingSet:
    """Multiset of findings observed in a single environment.

    Identity is (tool, target, detector_id, location); the CWE of the first
    finding inserted under a key is retained. ``meta`` carries parser metadata
    such as scan duration and never participates in equality.
    """

    def __init__(self, environment: str, meta: dict | None = None):
        if environment not in ENVIRONMENTS:
            raise ValueError(f"unknown environment tag: {environment}")
        self.environment = environment
        self.meta: dict = dict(meta or {})
        self._entries: dict[FindingKey, list] = {}  # key -> [cwe, count]

    def add(self, finding: Finding, count: int = 1) -> None:
        if count < 1:
            raise ValueError("count must be at least 1")
        if finding.environment != self.environment:
            raise ValueError(
                f"finding tagged {finding.environment!r} cannot join a {self.environment!r} set"
            )
        entry = self._entries.get(finding.key)
        if entry is None:
            self._entries[finding.key] = [finding.cwe, count]
        else:
            entry[1] += count

    def add_record(self, tool: str, target: str, detector_id: str, cwe: str,
                   location: str, count: int = 1) -> None:
        self.add(Finding(tool, self.environment, target, detector_id, cwe, location), count)

    def counts(self) -> dict[FindingKey, int]:
        return {key: entry[1] for key, entry in self._entries.items()}

    def cwe_of(self, key: FindingKey) -> str:
        return self._entries[key][0]

    def entries(self) -> Iterator[tuple[FindingKey, str, int]]:
        """Yield (key, cwe, count) in canonical key order."""
        for key in sorted(self._entries):
            cwe, count = self._entries[key]
            yield key, cwe, count

    def merge(self, other: "FindingSet") -> "FindingSet":
        """Combine two same-environment sets; associative and commutative."""
        if other.environment != self.environment:
            raise ValueError("cannot merge finding sets from different environments")
        merged = FindingSet(self.environment)
        for source in (self, other):
            for key, cwe, count in source.entries():
                entry = merged._entries.get(key)
                if entry is None:
                    merged._entries[key] = [cwe, count]
                else:
                    entry[1] += count
        return merged

    def total(self) -> int:
        return sum(entry[1] for entry in self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FindingSet):
            return NotImplemented
        return self.environment == other.environment and {
            k: tuple(v) for k, v in self._entries.items()
        } == {k: tuple(v) for k, v in other._entries.items()}

    def __repr__(self) -> str:
        return f"FindingSet(env={self.environment!r}, keys={len(self._entries)}, total={self.total()})"


# ---------------------------------------------------------------------------
# CVE/CWE mapping

class CweMap:
    """Detector-id to CWE correspondence: exact entries, then prefix rules.

    The lookup is total: anything unmatched falls back to ``noinfo``. The
    bundled map seeds the correspondences needed by the fixture corpus and is
    deliberately not a complete CVE-to-CWE database.
    """

    def __init__(self, exact: dict[str, str] | None = None, prefix: dict[str, str] | None = None):
        self.exact = dict(exact or {})
        self.prefix = dict(prefix or {})

    def lookup(self, detector_id: str) -> str:
        hit = self.exact.get(detector_id)
        if hit is not None:
            return hit
        # Longest prefix wins; lexicographic order breaks (impossible) ties.
        best = None
        for pfx in sorted(self.prefix, key=lambda p: (-len(p), p)):
            if detector_id.startswith(pfx):
                best = self.prefix[pfx]
                break
        return best if best is not None else CWE_NOINFO

    @classmethod
    def from_json(cls, text: str) -> "CweMap":
        try:
            data = json.loads(text)
            return cls(exact=data.get("exact", {}), prefix=data.get("prefix", {}))
        except (json.JSONDecodeError, AttributeError) as exc:
            raise DataFileError(f"malformed CWE map: {exc}") from exc


_default_cwe_map: CweMap | None = None


def default_cwe_map() -> CweMap:
    global _default_cwe_map
    if _default_cwe_map is None:
        text = resources.files("cyrange").joinpath("data/cwe_map.json").read_text(encoding="utf-8")
        _default_cwe_map = CweMap.from_json(text)
    return _default_cwe_map


def map_cve_to_cwe(detector_id: str, cwe_map: CweMap | None = None) -> str:
    """Resolve a detector id to a CWE id, ``other``, or ``noinfo``. Pure and total."""
    return (cwe_map or default_cwe_map()).lookup(detector_id)


# ---------------------------------------------------------------------------
# Parsers

def _parse_xml(text: str) -> ET.Element:
    try:
        return ET.fromstring(text)
    except ET.ParseError as exc:
        raise IngestError(f"malformed XML: {exc}") from exc


def parse_nmap(report: str, environment: str, cwe_map: CweMap | None = None) -> FindingSet:
    """One finding per open port; detector is ``service:<product>/<version>``."""
    cwe_map = cwe_map or default_cwe_map()
    root = _parse_xml(report)
    hosts = root.findall(".//host")
    if not hosts:
        raise IngestError("missing host element")
    out = FindingSet(environment)
    finished = root.find(".//runstats/finished")
    if finished is not None and finished.get("elapsed"):
        out.meta["elapsed_s"] = float(finished.get("elapsed"))
    for host in hosts:
        hostname = host.find("hostnames/hostname")
        if hostname is not None and hostname.get("name"):
            target = hostname.get("name")
        else:
            address = host.find("address")
            if address is None or not address.get("addr"):
                raise IngestError("host element lacks hostname and address")
            target = address.get("addr")
        for port in host.findall("ports/port"):
            state = port.find("state")
            if state is None or state.get("state") != "open":
                continue
            service = port.find("service")
            if service is None:
                continue
            base = service.get("product") or service.get("name") or "unknown"
            version = service.get("version")
            detector = f"service:{base}/{version}" if version else f"service:{base}"
            location = f"{port.get('portid')}/{port.get('protocol')}"
            out.add(Finding(
                tool="nmap", environment=environment, target=target,
                detector_id=detector, cwe=cwe_map.lookup(detector), location=location,
            ))
    return out


def parse_openvas(report: str, environment: str, cwe_map: CweMap | None = None) -> FindingSet:
    """One finding per result; detector is the CVE id when present, else the NVT oid."""
    cwe_map = cwe_map or default_cwe_map()
    root = _parse_xml(report)
    out = FindingSet(environment)
    for result in root.iter("result"):
        nvt = result.find("nvt")
        cve = nvt.findtext("cve") if nvt is not None else None
        if cve and cve.strip() and cve.strip() != "NOCVE":
            detector = cve.strip()
        elif nvt is not None and nvt.get("oid"):
            detector = nvt.get("oid")
        else:
            raise IngestError("result element lacks both a CVE and an NVT oid")
        target = (result.findtext("host") or "unknown").strip()
        location = (result.findtext("port") or "general").strip()
        severity = result.findtext("threat")
        out.add(Finding(
            tool="openvas", environment=environment, target=target,
            detector_id=detector, cwe=cwe_map.lookup(detector), location=location,
            severity=severity.strip() if severity else None,
        ))
    return out


def parse_zap(report: str, environment: str) -> FindingSet:
    """One finding per alert instance; the alert's own cweid tags the finding."""
    try:
        data = json.loads(report)
    except json.JSONDecodeError as exc:
        raise IngestError(f"malformed JSON: {exc}") from exc
    if not isinstance(data, dict) or "site" not in data:
        raise IngestError("missing site array")
    sites = data["site"]
    if isinstance(sites, dict):
        sites = [sites]
    out = FindingSet(environment)
    for site in sites:
        name = site.get("@name", "")
        parsed = urlparse(name)
        target = parsed.netloc or name or "unknown"
        if "alerts" not in site:
            raise IngestError("missing alerts array")
        for alert in site["alerts"]:
            alert_name = alert.get("alert") or alert.get("name")
            if not alert_name:
                raise IngestError("alert lacks a name")
            cweid = str(alert.get("cweid", "")).strip()
            cwe = cweid if cweid.isdigit() and cweid != "-1" else CWE_NOINFO
            severity = alert.get("riskdesc")
            for instance in alert.get("instances", []):
                uri = instance.get("uri", "")
                location = urlparse(uri).path or "/"
                out.add(Finding(
                    tool="zap", environment=environment, target=target,
                    detector_id=alert_name, cwe=cwe, location=location,
                    severity=severity,
                ))
    return out


def parse_nikto(report: str, environment: str, cwe_map: CweMap | None = None) -> FindingSet:
    """Rows of (host, port, osvdb, message); detector is ``OSVDB-<n>``."""
    cwe_map = cwe_map or default_cwe_map()
    out = FindingSet(environment)
    reader = csv.reader(io.StringIO(report))
    for row_number, row in enumerate(reader, start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != 4:
            raise IngestError(f"row {row_number}: expected 4 columns (host, port, osvdb, message), got {len(row)}")
        host, port, osvdb, _message = (col.strip() for col in row)
        detector = osvdb if osvdb.startswith("OSVDB-") else f"OSVDB-{osvdb}"
        out.add(Finding(
            tool="nikto2", environment=environment, target=host,
            detector_id=detector, cwe=cwe_map.lookup(detector), location=f"{port}/tcp",
        ))
    return out


def parse_msf_log(log: str, environment: str, target: str = "target",
                  cwe_map: CweMap | None = None) -> FindingSet:
    """Run-log lines ``<module path> <SUCCESS|FAIL>``; successes become findings."""
    cwe_map = cwe_map or default_cwe_map()
    out = FindingSet(environment)
    for line_number, raw in enumerate(log.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2 or parts[1] not in ("SUCCESS", "FAIL"):
            raise IngestError(f"line {line_number}: expected '<module path> <SUCCESS|FAIL>', got {raw!r}")
        module, outcome = parts
        if outcome == "SUCCESS":
            out.add(Finding(
                tool="msf", environment=environment, target=target,
                detector_id=module, cwe=cwe_map.lookup(module), location="-",
            ))
    return out


# ---------------------------------------------------------------------------
# Canonical interchange (JSON lines)

def write_jsonl(fs: FindingSet) -> str:
    lines = []
    for key, cwe, count in fs.entries():
        lines.append(json.dumps({
            "tool": key.tool,
            "env": fs.environment,
            "target": key.target,
            "detector_id": key.detector_id,
            "cwe": cwe,
            "location": key.location,
            "count": count,
        }))
    return "".join(line + "\n" for line in lines)


def read_jsonl(text: str, environment: str | None = None) -> FindingSet:
    """Rebuild a FindingSet from interchange lines.

    All lines must carry one environment tag; pass ``environment`` to accept
    an empty document.
    """
    out: FindingSet | None = None
    if environment is not None:
        out = FindingSet(environment)
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"line {line_number}: malformed JSON: {exc}") from exc
        try:
            env = record["env"]
            if out is None:
                out = FindingSet(env)
            elif env != out.environment:
                raise IngestError(
                    f"line {line_number}: environment {env!r} conflicts with {out.environment!r}"
                )
            out.add_record(
                tool=record["tool"], target=record["target"],
                detector_id=record["detector_id"], cwe=record["cwe"],
                location=record["location"], count=int(record.get("count", 1)),
            )
        except KeyError as exc:
            raise IngestError(f"line {line_number}: missing key {exc}") from exc
        except ValueError as exc:
            raise IngestError(f"line {line_number}: {exc}") from exc
    if out is None:
        raise IngestError("empty interchange document and no environment given")
    return out


def merge_all(sets: Iterable[FindingSet]) -> FindingSet:
    """Reduce any number of same-environment sets into one."""
    sets = list(sets)
    if not sets:
        raise ValueError("nothing to merge")
    merged = sets[0]
    for fs in sets[1:]:
        merged = merged.merge(fs)
    return merged
