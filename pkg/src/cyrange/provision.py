"""Turn scenarios into backend-neutral provisioning plans and execute them.

Plans are ordered directive sequences: networks first, then per node a
create_instance followed by its apply_limits and start_service directives.
Execution is all-or-nothing: any driver failure rolls back every instance
created so far. Drivers implement the instance lifecycle
(create/start/stop/stats/destroy); the network, limits, and service hooks
default to no-ops so simple drivers stay simple.

Container image exports are specified, not performed: the export plan names
the filesystem root and the exclusion set (/boot, /dev, /mnt, /proc, /sys,
/tmp, plus per-node extras) that an importer must honor.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Iterable

from .errors import (
    DataFileError,
    DriverError,
    InvalidScenarioError,
    PlanExecutionError,
    RollbackError,
    SchemaError,
)
from .ingest import CweMap
from .resmon import ResourceSample
from .scenario import Node, ResourceCaps, Scenario, VulnRef, has_errors, validate_scenario

MANDATORY_EXPORT_EXCLUDES = frozenset({"/boot", "/dev", "/mnt", "/proc", "/sys", "/tmp"})

DIRECTIVE_KINDS = ("create_network", "create_instance", "apply_limits", "start_service")

SUITABILITY_REASONS = ("ok", "kernel_level", "host_config", "shared_resource_attack", "physical")


@dataclass(frozen=True)
class Directive:
    kind: str
    subject: str
    params: dict

    def __post_init__(self):
        if self.kind not in DIRECTIVE_KINDS:
            raise ValueError(f"unknown directive kind: {self.kind}")


@dataclass(frozen=True)
class ProvisionPlan:
    environment_id: str
    directives: tuple[Directive, ...]


@dataclass(frozen=True)
class FileSetSpec:
    """What to collect when exporting a node's filesystem into an image."""

    include_root: str
    exclude: frozenset[str]


@dataclass(frozen=True)
class Suitability:
    verdict: str  # "reproducible" | "excluded"
    reason: str
    note: str = ""

    def __post_init__(self):
        if self.reason not in SUITABILITY_REASONS:
            raise ValueError(f"unknown suitability reason: {self.reason}")
        excluded = self.verdict == "excluded"
        if excluded != (self.reason != "ok"):
            raise ValueError("verdict is excluded exactly when reason is not ok")


@dataclass(frozen=True)
class SuitabilityRule:
    """First matching rule wins. ``match`` is a category-tag prefix or a CWE id."""

    match: str
    verdict: str
    reason: str
    note: str = ""


def load_suitability_rules(text: str) -> list[SuitabilityRule]:
    try:
        records = json.loads(text)
        return [
            SuitabilityRule(
                match=record["match"], verdict=record["verdict"],
                reason=record["reason"], note=record.get("note", ""),
            )
            for record in records
        ]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise DataFileError(f"malformed suitability rules: {exc}") from exc


def default_suitability_rules() -> list[SuitabilityRule]:
    text = resources.files("cyrange").joinpath("data/suitability_rules.json").read_text(encoding="utf-8")
    return load_suitability_rules(text)


# ---------------------------------------------------------------------------
# Planning

def plan_environment(s: Scenario, backend: str, environment_id: str | None = None) -> ProvisionPlan:
    """Deterministic plan: one network per segment, one instance per matching node.

    Container plans attach networks to the host segment instead of an
    isolated default bridge, so scan traffic sees the same topology a VM
    deployment would.
    """
    if backend not in ("vm", "container"):
        raise ValueError(f"unknown backend: {backend}")
    diagnostics = validate_scenario(s)
    if has_errors(diagnostics):
        first = next(d for d in diagnostics if d.severity == "error")
        raise InvalidScenarioError(f"scenario has error diagnostics: {first.render()}")

    attachment = "host-segment" if backend == "container" else "hypervisor-internal"
    directives: list[Directive] = []
    for segment in sorted(s.segments, key=lambda seg: seg.id):
        directives.append(Directive(
            kind="create_network", subject=segment.id, params={"attachment": attachment},
        ))
    for node in sorted(s.nodes, key=lambda n: n.id):
        if node.backend_kind is not None and node.backend_kind != backend:
            continue
        if not node.image:
            raise InvalidScenarioError(f"node {node.id} has an empty image reference")
        directives.append(Directive(
            kind="create_instance", subject=node.id,
            params={"image": node.image, "networks": s.segments_of(node.id)},
        ))
        if node.limits is not None:
            directives.append(Directive(
                kind="apply_limits", subject=node.id,
                params={
                    "memory_mb": node.limits.memory_mb,
                    "storage_mb": node.limits.storage_mb,
                    "cpu_pct": node.limits.cpu_pct,
                },
            ))
        for service in sorted(node.services, key=lambda svc: (svc.port, svc.protocol)):
            directives.append(Directive(
                kind="start_service", subject=node.id,
                params={"service": service.name, "port": f"{service.port}/{service.protocol}"},
            ))
    return ProvisionPlan(
        environment_id=environment_id or f"{s.name}-{backend}",
        directives=tuple(directives),
    )


def image_export_plan(node: Node) -> FileSetSpec:
    """Filesystem export spec for a container node.

    The exclusion set is exactly the six mandatory prefixes plus the node's
    declared extras, normalized (absolute, no trailing slash, deduplicated).
    """
    if node.backend_kind != "container":
        raise ValueError(f"node {node.id} is not container-backed")
    extras = set()
    for path in node.export_exclude:
        if not path.startswith("/"):
            raise ValueError(f"export exclusion must be absolute: {path!r}")
        normalized = "/" + path.strip("/")
        extras.add(normalized)
    return FileSetSpec(include_root="/", exclude=frozenset(MANDATORY_EXPORT_EXCLUDES | extras))


def container_suitability(vuln: VulnRef, rules: Iterable[SuitabilityRule],
                          cwe_map: CweMap | None = None) -> Suitability:
    """Classify whether a vulnerability reproduces inside a container.

    Category-tag rules prefix-match the vulnerability's category; CWE rules
    (match values like ``CWE-264``) compare against the CWE the bundled map
    resolves for the vulnerability id. Anything unmatched is reproducible.
    """
    if not vuln.id and not vuln.category:
        raise SchemaError("vuln", "empty vulnerability reference")
    if vuln.id and not vuln.id.startswith(("CVE-", "OSVDB-", "MSF-")):
        raise SchemaError("vuln", f"malformed vulnerability identifier: {vuln.id!r}")
    resolved_cwe: str | None = None
    for rule in rules:
        if rule.match.startswith("CWE-"):
            if resolved_cwe is None and vuln.id:
                from .ingest import map_cve_to_cwe
                resolved_cwe = map_cve_to_cwe(vuln.id, cwe_map)
            if resolved_cwe is not None and rule.match[len("CWE-"):] == resolved_cwe:
                return Suitability(verdict=rule.verdict, reason=rule.reason, note=rule.note)
        elif vuln.category is not None and vuln.category.startswith(rule.match):
            return Suitability(verdict=rule.verdict, reason=rule.reason, note=rule.note)
    return Suitability(verdict="reproducible", reason="ok", note="no exclusion rule matched")


# ---------------------------------------------------------------------------
# Drivers and execution

class DriverContract(ABC):
    """Instance lifecycle a backend must provide.

    Contract: create before start; stats only on started instances; destroy
    is idempotent. The network/limits/service hooks have no-op defaults.
    """

    @abstractmethod
    def create(self, instance_id: str, image: str, network, limits: ResourceCaps | None = None) -> None: ...

    @abstractmethod
    def start(self, instance_id: str) -> None: ...

    @abstractmethod
    def stop(self, instance_id: str) -> None: ...

    @abstractmethod
    def stats(self, instance_id: str) -> ResourceSample: ...

    @abstractmethod
    def destroy(self, instance_id: str) -> None: ...

    def create_network(self, network_id: str, params: dict) -> None:
        return None

    def apply_limits(self, instance_id: str, caps: ResourceCaps) -> None:
        return None

    def start_service(self, instance_id: str, service: str, port: str) -> None:
        return None


class MockDriver(DriverContract):
    """Fully scripted in-memory driver for hermetic tests.

    ``fail_on`` is a set of (operation, subject) pairs that raise DriverError
    when reached; ``stats_overrides`` maps instance ids to either a scripted
    (memory_mb, storage_mb, cpu_pct) triple or an exception to raise.
    """

    def __init__(self, fail_on: Iterable[tuple[str, str]] = (),
                 stats_mb_per_instance: float = 100.0,
                 stats_overrides: dict | None = None):
        self.fail_on = set(fail_on)
        self.stats_mb_per_instance = stats_mb_per_instance
        self.stats_overrides = dict(stats_overrides or {})
        self.networks: dict[str, dict] = {}
        self.instances: dict[str, dict] = {}
        self.calls: list[tuple[str, str]] = []

    def _record(self, op: str, subject: str) -> None:
        self.calls.append((op, subject))
        if (op, subject) in self.fail_on:
            raise DriverError(f"scripted failure: {op} {subject}")

    def live_instances(self) -> int:
        return len(self.instances)

    def create_network(self, network_id: str, params: dict) -> None:
        self._record("create_network", network_id)
        self.networks[network_id] = dict(params)

    def create(self, instance_id: str, image: str, network, limits: ResourceCaps | None = None) -> None:
        self._record("create", instance_id)
        if instance_id in self.instances:
            raise DriverError(f"instance already exists: {instance_id}")
        for net in (network if isinstance(network, (tuple, list)) else (network,)):
            if net and net not in self.networks:
                raise DriverError(f"unknown network: {net}")
        self.instances[instance_id] = {
            "status": "created", "image": image, "network": network, "limits": limits,
            "services": [],
        }

    def start(self, instance_id: str) -> None:
        self._record("start", instance_id)
        if instance_id not in self.instances:
            raise DriverError(f"cannot start unknown instance: {instance_id}")
        self.instances[instance_id]["status"] = "running"

    def stop(self, instance_id: str) -> None:
        self._record("stop", instance_id)
        if instance_id not in self.instances:
            raise DriverError(f"cannot stop unknown instance: {instance_id}")
        self.instances[instance_id]["status"] = "stopped"

    def stats(self, instance_id: str) -> ResourceSample:
        self._record("stats", instance_id)
        record = self.instances.get(instance_id)
        if record is None or record["status"] != "running":
            raise DriverError(f"stats requested for non-running instance: {instance_id}")
        override = self.stats_overrides.get(instance_id)
        if isinstance(override, Exception):
            raise override
        if override is not None:
            memory, storage, cpu = override
        else:
            memory, storage, cpu = self.stats_mb_per_instance, 0.0, 0.0
        return ResourceSample(timestamp=0.0, instance_count=1,
                              memory_mb=memory, storage_mb=storage, cpu_pct=cpu)

    def destroy(self, instance_id: str) -> None:
        self._record("destroy", instance_id)
        self.instances.pop(instance_id, None)  # idempotent by contract

    def apply_limits(self, instance_id: str, caps: ResourceCaps) -> None:
        self._record("apply_limits", instance_id)
        if instance_id not in self.instances:
            raise DriverError(f"cannot apply limits to unknown instance: {instance_id}")
        self.instances[instance_id]["limits"] = caps

    def start_service(self, instance_id: str, service: str, port: str) -> None:
        self._record("start_service", instance_id)
        record = self.instances.get(instance_id)
        if record is None or record["status"] != "running":
            raise DriverError(f"cannot start service on non-running instance: {instance_id}")
        record["services"].append((service, port))


@dataclass
class EnvironmentState:
    environment_id: str
    instances: dict[str, str] = field(default_factory=dict)  # node id -> status
    networks: tuple[str, ...] = ()


def execute_plan(plan: ProvisionPlan, driver: DriverContract) -> EnvironmentState:
    """Apply directives in order; roll back all created instances on failure.

    Raises PlanExecutionError with the 1-based failing directive index, or
    RollbackError when the rollback itself leaves instances behind.
    """
    state = EnvironmentState(environment_id=plan.environment_id)
    created: list[str] = []
    networks: list[str] = []
    for index, directive in enumerate(plan.directives, start=1):
        try:
            if directive.kind == "create_network":
                driver.create_network(directive.subject, directive.params)
                networks.append(directive.subject)
            elif directive.kind == "create_instance":
                driver.create(
                    directive.subject,
                    image=directive.params["image"],
                    network=directive.params.get("networks", ()),
                )
                driver.start(directive.subject)
                created.append(directive.subject)
                state.instances[directive.subject] = "running"
            elif directive.kind == "apply_limits":
                caps = ResourceCaps(
                    memory_mb=directive.params["memory_mb"],
                    storage_mb=directive.params["storage_mb"],
                    cpu_pct=directive.params["cpu_pct"],
                )
                driver.apply_limits(directive.subject, caps)
            elif directive.kind == "start_service":
                driver.start_service(
                    directive.subject,
                    service=directive.params["service"],
                    port=directive.params["port"],
                )
        except DriverError as exc:
            failures: list[tuple[str, Exception]] = []
            for instance in reversed(created):
                try:
                    driver.destroy(instance)
                except Exception as rollback_exc:  # noqa: BLE001 - reported distinctly
                    failures.append((instance, rollback_exc))
            if failures:
                raise RollbackError(index, exc, failures) from exc
            raise PlanExecutionError(index, exc) from exc
    state.networks = tuple(networks)
    return state


def plan_to_commands(plan: ProvisionPlan) -> str:
    """Render a plan as reviewable text, one directive per line."""
    lines = []
    for directive in plan.directives:
        params = directive.params
        if directive.kind == "create_network":
            lines.append(f"network create {directive.subject} attachment={params['attachment']}")
        elif directive.kind == "create_instance":
            networks = ",".join(params.get("networks", ())) or "-"
            lines.append(f"instance create {directive.subject} image={params['image']} networks={networks}")
        elif directive.kind == "apply_limits":
            lines.append(
                f"limits apply {directive.subject} memory_mb={params['memory_mb']} "
                f"storage_mb={params['storage_mb']} cpu_pct={params['cpu_pct']}"
            )
        elif directive.kind == "start_service":
            lines.append(f"service start {directive.subject} name={params['service']} port={params['port']}")
    return "".join(line + "\n" for line in lines)
