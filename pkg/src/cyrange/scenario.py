"""Declarative range scenarios: parsing, validation, and segment reachability.

A scenario document is YAML with four top-level keys::

    name: seven-step-intrusion
    nodes:
      - id: web
        role: web_server          # web_server|db_server|client|attacker|security_device
        image: metasploitable2
        backend: container        # optional: vm|container
        services:
          - {name: http, port: 80, version: Apache 2.2.8}   # protocol defaults to tcp
        vulns: [CVE-2011-2523]    # CVE-/OSVDB-/MSF- ids, or {id: ..., category: ...}
        limits: {memory_mb: 1024, storage_mb: 8192, cpu_pct: 50}
        export_exclude: [/var/cache]   # optional extra image-export exclusions
    segments:
      - id: dmz
        members: [web]
        links: [external]         # directed; declare both sides for two-way traffic
    steps:
      - {index: 1, actor: attacker, target: web, action: scan}

Unknown keys and unknown enum values are hard parse errors. Segment links are
directed on purpose: one-way declarations model firewall-style rules, and the
validator flags any link that is not reciprocated.
"""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field

import yaml

from .errors import ScenarioSyntaxError, SchemaError, UnknownNodeError

VULN_ID_PREFIXES = ("CVE-", "OSVDB-", "MSF-")

BACKEND_KINDS = ("vm", "container")


class Role(str, enum.Enum):
    WEB_SERVER = "web_server"
    DB_SERVER = "db_server"
    CLIENT = "client"
    ATTACKER = "attacker"
    SECURITY_DEVICE = "security_device"


class Action(str, enum.Enum):
    SCAN = "scan"
    EXPLOIT = "exploit"
    BACKDOOR = "backdoor"
    PIVOT = "pivot"
    PRIVILEGE_ESCALATION = "privilege_escalation"
    CREDENTIAL_THEFT = "credential_theft"
    EXFILTRATION = "exfiltration"


@dataclass(frozen=True)
class VulnRef:
    """Vulnerability reference: a scheme-prefixed id plus an optional category tag."""

    id: str
    category: str | None = None


@dataclass(frozen=True)
class ServiceSpec:
    name: str
    port: int
    version: str = ""
    protocol: str = "tcp"


@dataclass(frozen=True)
class ResourceCaps:
    """Per-instance limits applied at provisioning time."""

    memory_mb: int
    storage_mb: int
    cpu_pct: int

    def __post_init__(self):
        if self.memory_mb <= 0 or self.storage_mb <= 0 or self.cpu_pct <= 0:
            raise ValueError("resource caps must be positive")
        if self.cpu_pct > 100:
            raise ValueError("cpu_pct must be at most 100")


@dataclass(frozen=True)
class Node:
    id: str
    role: Role
    image: str
    services: tuple[ServiceSpec, ...] = ()
    vulns: tuple[VulnRef, ...] = ()
    backend_kind: str | None = None
    limits: ResourceCaps | None = None
    export_exclude: tuple[str, ...] = ()


@dataclass(frozen=True)
class Segment:
    """A network segment. ``members`` and ``links`` are kept sorted for determinism."""

    id: str
    members: tuple[str, ...]
    links: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "members", tuple(sorted(set(self.members))))
        object.__setattr__(self, "links", tuple(sorted(set(self.links))))


@dataclass(frozen=True)
class AttackStep:
    index: int
    actor: str
    target: str
    action: Action
    requires_vuln: VulnRef | None = None


@dataclass(frozen=True)
class Scenario:
    name: str
    nodes: tuple[Node, ...] = ()
    segments: tuple[Segment, ...] = ()
    steps: tuple[AttackStep, ...] = ()

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise UnknownNodeError(f"unknown node id: {node_id}")

    def has_node(self, node_id: str) -> bool:
        return any(n.id == node_id for n in self.nodes)

    def segments_of(self, node_id: str) -> tuple[str, ...]:
        return tuple(sorted(s.id for s in self.segments if node_id in s.members))


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "warning" | "error"
    subject: str   # "node:<id>" | "segment:<id>" | "step:<index>"
    message: str

    def render(self) -> str:
        return f"{self.severity} {self.subject} {self.message}"


# ---------------------------------------------------------------------------
# Document decoding

def _expect_mapping(value, subject):
    if not isinstance(value, dict):
        raise SchemaError(subject, "expected a mapping")
    return value


def _expect_list(value, subject):
    if not isinstance(value, list):
        raise SchemaError(subject, "expected a list")
    return value


def _expect_str(value, subject):
    if not isinstance(value, str):
        raise SchemaError(subject, "expected a string")
    return value


def _expect_int(value, subject):
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(subject, "expected an integer")
    return value


def _check_keys(mapping, allowed, subject):
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise SchemaError(subject, f"unknown keys: {', '.join(unknown)}")


def _decode_vuln(value, subject) -> VulnRef:
    if isinstance(value, str):
        return VulnRef(id=value)
    mapping = _expect_mapping(value, subject)
    _check_keys(mapping, ("id", "category"), subject)
    if "id" not in mapping:
        raise SchemaError(subject, "missing key: id")
    vid = _expect_str(mapping["id"], f"{subject}.id")
    category = mapping.get("category")
    if category is not None:
        category = _expect_str(category, f"{subject}.category")
    return VulnRef(id=vid, category=category)


def _decode_service(value, subject) -> ServiceSpec:
    mapping = _expect_mapping(value, subject)
    _check_keys(mapping, ("name", "port", "version", "protocol"), subject)
    for key in ("name", "port"):
        if key not in mapping:
            raise SchemaError(subject, f"missing key: {key}")
    return ServiceSpec(
        name=_expect_str(mapping["name"], f"{subject}.name"),
        port=_expect_int(mapping["port"], f"{subject}.port"),
        version=_expect_str(mapping.get("version", ""), f"{subject}.version"),
        protocol=_expect_str(mapping.get("protocol", "tcp"), f"{subject}.protocol"),
    )


def _decode_caps(value, subject) -> ResourceCaps:
    mapping = _expect_mapping(value, subject)
    _check_keys(mapping, ("memory_mb", "storage_mb", "cpu_pct"), subject)
    for key in ("memory_mb", "storage_mb", "cpu_pct"):
        if key not in mapping:
            raise SchemaError(subject, f"missing key: {key}")
    try:
        return ResourceCaps(
            memory_mb=_expect_int(mapping["memory_mb"], f"{subject}.memory_mb"),
            storage_mb=_expect_int(mapping["storage_mb"], f"{subject}.storage_mb"),
            cpu_pct=_expect_int(mapping["cpu_pct"], f"{subject}.cpu_pct"),
        )
    except ValueError as exc:
        raise SchemaError(subject, str(exc)) from exc


def _decode_node(value, subject) -> Node:
    mapping = _expect_mapping(value, subject)
    allowed = ("id", "role", "image", "backend", "services", "vulns", "limits", "export_exclude")
    _check_keys(mapping, allowed, subject)
    for key in ("id", "role", "image"):
        if key not in mapping:
            raise SchemaError(subject, f"missing key: {key}")
    role_text = _expect_str(mapping["role"], f"{subject}.role")
    try:
        role = Role(role_text)
    except ValueError:
        raise SchemaError(f"{subject}.role", f"unknown role: {role_text}") from None
    backend = mapping.get("backend")
    if backend is not None:
        backend = _expect_str(backend, f"{subject}.backend")
        if backend not in BACKEND_KINDS:
            raise SchemaError(f"{subject}.backend", f"unknown backend kind: {backend}")
    services = tuple(
        _decode_service(item, f"{subject}.services[{i}]")
        for i, item in enumerate(_expect_list(mapping.get("services", []), f"{subject}.services"))
    )
    vulns = tuple(
        _decode_vuln(item, f"{subject}.vulns[{i}]")
        for i, item in enumerate(_expect_list(mapping.get("vulns", []), f"{subject}.vulns"))
    )
    limits = mapping.get("limits")
    if limits is not None:
        limits = _decode_caps(limits, f"{subject}.limits")
    export_exclude = tuple(
        _expect_str(item, f"{subject}.export_exclude[{i}]")
        for i, item in enumerate(
            _expect_list(mapping.get("export_exclude", []), f"{subject}.export_exclude")
        )
    )
    return Node(
        id=_expect_str(mapping["id"], f"{subject}.id"),
        role=role,
        image=_expect_str(mapping["image"], f"{subject}.image"),
        services=services,
        vulns=vulns,
        backend_kind=backend,
        limits=limits,
        export_exclude=export_exclude,
    )


def _decode_segment(value, subject) -> Segment:
    mapping = _expect_mapping(value, subject)
    _check_keys(mapping, ("id", "members", "links"), subject)
    for key in ("id", "members"):
        if key not in mapping:
            raise SchemaError(subject, f"missing key: {key}")
    members = [
        _expect_str(item, f"{subject}.members[{i}]")
        for i, item in enumerate(_expect_list(mapping["members"], f"{subject}.members"))
    ]
    links = [
        _expect_str(item, f"{subject}.links[{i}]")
        for i, item in enumerate(_expect_list(mapping.get("links", []), f"{subject}.links"))
    ]
    return Segment(id=_expect_str(mapping["id"], f"{subject}.id"), members=tuple(members), links=tuple(links))


def _decode_step(value, subject) -> AttackStep:
    mapping = _expect_mapping(value, subject)
    _check_keys(mapping, ("index", "actor", "target", "action", "requires_vuln"), subject)
    for key in ("index", "actor", "target", "action"):
        if key not in mapping:
            raise SchemaError(subject, f"missing key: {key}")
    action_text = _expect_str(mapping["action"], f"{subject}.action")
    try:
        action = Action(action_text)
    except ValueError:
        raise SchemaError(f"{subject}.action", f"unknown action: {action_text}") from None
    requires = mapping.get("requires_vuln")
    if requires is not None:
        requires = _decode_vuln(requires, f"{subject}.requires_vuln")
    return AttackStep(
        index=_expect_int(mapping["index"], f"{subject}.index"),
        actor=_expect_str(mapping["actor"], f"{subject}.actor"),
        target=_expect_str(mapping["target"], f"{subject}.target"),
        action=action,
        requires_vuln=requires,
    )


def parse_scenario(doc: str) -> Scenario:
    """Parse a scenario document, raising on syntax or schema violations.

    Raises ScenarioSyntaxError with the source position for malformed YAML and
    SchemaError (field plus reason) for schema violations, including violations
    of structural invariants such as dangling references.
    """
    try:
        data = yaml.safe_load(doc)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark is not None else None
        column = mark.column + 1 if mark is not None else None
        raise ScenarioSyntaxError(exc.problem or "malformed document", line, column) from exc
    except yaml.YAMLError as exc:
        raise ScenarioSyntaxError(str(exc)) from exc
    if data is None:
        raise SchemaError("document", "empty document")
    mapping = _expect_mapping(data, "document")
    _check_keys(mapping, ("name", "nodes", "segments", "steps"), "document")
    if "name" not in mapping:
        raise SchemaError("document", "missing key: name")
    scenario = Scenario(
        name=_expect_str(mapping["name"], "name"),
        nodes=tuple(
            _decode_node(item, f"nodes[{i}]")
            for i, item in enumerate(_expect_list(mapping.get("nodes", []), "nodes"))
        ),
        segments=tuple(
            _decode_segment(item, f"segments[{i}]")
            for i, item in enumerate(_expect_list(mapping.get("segments", []), "segments"))
        ),
        steps=tuple(
            _decode_step(item, f"steps[{i}]")
            for i, item in enumerate(_expect_list(mapping.get("steps", []), "steps"))
        ),
    )
    problems = _structural_diagnostics(scenario)
    if problems:
        first = problems[0]
        raise SchemaError(first.subject, first.message)
    return scenario


# ---------------------------------------------------------------------------
# Serialization (round-trips through parse_scenario)

def to_document(s: Scenario) -> dict:
    doc: dict = {"name": s.name, "nodes": [], "segments": [], "steps": []}
    for n in s.nodes:
        entry: dict = {"id": n.id, "role": n.role.value, "image": n.image}
        if n.backend_kind is not None:
            entry["backend"] = n.backend_kind
        if n.services:
            entry["services"] = [
                {
                    "name": svc.name,
                    "port": svc.port,
                    **({"version": svc.version} if svc.version else {}),
                    **({"protocol": svc.protocol} if svc.protocol != "tcp" else {}),
                }
                for svc in n.services
            ]
        if n.vulns:
            entry["vulns"] = [
                v.id if v.category is None else {"id": v.id, "category": v.category}
                for v in n.vulns
            ]
        if n.limits is not None:
            entry["limits"] = {
                "memory_mb": n.limits.memory_mb,
                "storage_mb": n.limits.storage_mb,
                "cpu_pct": n.limits.cpu_pct,
            }
        if n.export_exclude:
            entry["export_exclude"] = list(n.export_exclude)
        doc["nodes"].append(entry)
    for seg in s.segments:
        entry = {"id": seg.id, "members": list(seg.members)}
        if seg.links:
            entry["links"] = list(seg.links)
        doc["segments"].append(entry)
    for step in s.steps:
        entry = {
            "index": step.index,
            "actor": step.actor,
            "target": step.target,
            "action": step.action.value,
        }
        if step.requires_vuln is not None:
            v = step.requires_vuln
            entry["requires_vuln"] = v.id if v.category is None else {"id": v.id, "category": v.category}
        doc["steps"].append(entry)
    return doc


def serialize_scenario(s: Scenario) -> str:
    return yaml.safe_dump(to_document(s), sort_keys=False)


# ---------------------------------------------------------------------------
# Validation

def _step_sort_index(subject: str) -> int:
    if subject.startswith("step:"):
        return int(subject.split(":", 1)[1])
    return 0


def _structural_diagnostics(s: Scenario) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    err = lambda subject, message: out.append(Diagnostic("error", subject, message))

    if not s.name:
        err("document", "scenario name is empty")

    node_ids: set[str] = set()
    for n in s.nodes:
        if n.id in node_ids:
            err(f"node:{n.id}", "duplicate node id")
        node_ids.add(n.id)
        seen_ports: set[tuple[int, str]] = set()
        for svc in n.services:
            if not 1 <= svc.port <= 65535:
                err(f"node:{n.id}", f"service {svc.name}: port {svc.port} outside 1..65535")
            if (svc.port, svc.protocol) in seen_ports:
                err(f"node:{n.id}", f"duplicate service port {svc.port}/{svc.protocol}")
            seen_ports.add((svc.port, svc.protocol))
        for v in n.vulns:
            if not v.id.startswith(VULN_ID_PREFIXES):
                err(f"node:{n.id}", f"vulnerability id {v.id!r} lacks a recognized prefix (CVE-, OSVDB-, MSF-)")

    segment_ids: set[str] = set()
    for seg in s.segments:
        if seg.id in segment_ids:
            err(f"segment:{seg.id}", "duplicate segment id")
        segment_ids.add(seg.id)
        if not seg.members:
            err(f"segment:{seg.id}", "segment has no members")
        for member in seg.members:
            if member not in node_ids:
                err(f"segment:{seg.id}", f"member {member} is not a declared node")
    for seg in s.segments:
        for link in seg.links:
            if link not in segment_ids:
                err(f"segment:{seg.id}", f"link target {link} is not a declared segment")

    for position, step in enumerate(s.steps, start=1):
        if step.index != position:
            err(f"step:{step.index}", f"step indices must be contiguous from 1 (found {step.index} at position {position})")
        for label, ref in (("actor", step.actor), ("target", step.target)):
            if ref not in node_ids:
                err(f"step:{step.index}", f"{label} {ref} is not a declared node")
        if step.actor == step.target and step.action is not Action.PRIVILEGE_ESCALATION:
            err(f"step:{step.index}", f"actor and target are both {step.actor}; only privilege_escalation may be self-targeted")
        if step.requires_vuln is not None and not step.requires_vuln.id.startswith(VULN_ID_PREFIXES):
            err(f"step:{step.index}", f"required vulnerability id {step.requires_vuln.id!r} lacks a recognized prefix")

    out.sort(key=lambda d: (_step_sort_index(d.subject), d.subject, d.message))
    return out


def validate_scenario(s: Scenario) -> list[Diagnostic]:
    """Return deterministic diagnostics; empty means the scenario is exercise-ready.

    Structural invariant violations come back at error severity, step
    infeasibility (an actor that cannot reach its target) at error severity,
    and advisory findings (missing container limits, unreciprocated links,
    required vulnerabilities absent on the target) as warnings. Output order
    is (step index, subject) with non-step diagnostics first.
    """
    out = _structural_diagnostics(s)
    structurally_ok = not out

    for n in sorted(s.nodes, key=lambda n: n.id):
        if n.backend_kind == "container" and n.limits is None:
            out.append(Diagnostic(
                "warning", f"node:{n.id}",
                "container node has no resource caps; shared-resource blast radius is unbounded",
            ))

    for seg in sorted(s.segments, key=lambda seg: seg.id):
        for link in seg.links:
            peer = next((other for other in s.segments if other.id == link), None)
            if peer is not None and seg.id not in peer.links:
                out.append(Diagnostic("warning", f"segment:{seg.id}", f"link to {link} is not reciprocated"))

    if structurally_ok:
        for step in s.steps:
            if step.requires_vuln is not None:
                target = s.node(step.target)
                if step.requires_vuln.id not in {v.id for v in target.vulns}:
                    out.append(Diagnostic(
                        "warning", f"step:{step.index}",
                        f"{step.action.value}: required vulnerability {step.requires_vuln.id} absent on target {step.target}",
                    ))
            if reachability(s, step.actor, step.target) is None:
                out.append(Diagnostic(
                    "error", f"step:{step.index}",
                    f"{step.action.value}: target {step.target} is unreachable from actor {step.actor}",
                ))

    out.sort(key=lambda d: (_step_sort_index(d.subject), d.subject, d.message))
    return out


def has_errors(diagnostics: list[Diagnostic]) -> bool:
    return any(d.severity == "error" for d in diagnostics)


# ---------------------------------------------------------------------------
# Reachability

def reachability(s: Scenario, from_node: str, to_node: str) -> list[str] | None:
    """Shortest segment path from one node's segment to another's, or None.

    Hop count decides; among equally short paths the lexicographically
    smallest segment-id sequence wins, so reports are stable. A node
    reachable within its own segment yields a single-element path. Nodes
    that belong to no segment are unreachable.
    """
    if not s.has_node(from_node):
        raise UnknownNodeError(f"unknown node id: {from_node}")
    if not s.has_node(to_node):
        raise UnknownNodeError(f"unknown node id: {to_node}")

    links = {seg.id: seg.links for seg in s.segments}
    start = s.segments_of(from_node)
    goals = set(s.segments_of(to_node))
    if not start or not goals:
        return None

    # Lexicographic BFS: the heap orders by (hops, path), so the first settled
    # goal segment carries the smallest shortest path.
    heap: list[tuple[int, tuple[str, ...]]] = [(1, (seg,)) for seg in start]
    heapq.heapify(heap)
    settled: set[str] = set()
    while heap:
        length, path = heapq.heappop(heap)
        current = path[-1]
        if current in settled:
            continue
        settled.add(current)
        if current in goals:
            return list(path)
        for neighbor in links.get(current, ()):
            if neighbor not in settled:
                heapq.heappush(heap, (length + 1, path + (neighbor,)))
    return None
