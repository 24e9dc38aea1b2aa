"""Resource-consumption models and measurement for VM and container backends.

The model is linear per instance: VMs preallocate memory (base_mb > 0) while
containers only accrue idle cost per instance (base_mb = 0). Absolute
container overhead is a calibration default, not a measured constant;
override it with a profile file when deploying.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass
from importlib import resources
from typing import Iterable

from .errors import DataFileError, DriverError


@dataclass(frozen=True)
class ResourceProfile:
    backend: str  # "vm" | "container"
    base_mb: float      # memory preallocated per instance
    idle_mb: float      # memory consumed while idle per instance
    storage_mb: float
    cpu_idle_pct: float

    def __post_init__(self):
        if self.backend not in ("vm", "container"):
            raise ValueError(f"unknown backend kind: {self.backend}")
        for name in ("base_mb", "idle_mb", "storage_mb", "cpu_idle_pct"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.backend == "vm" and self.base_mb <= 0:
            raise ValueError("vm profiles preallocate memory: base_mb must be positive")
        if self.backend == "container" and self.base_mb != 0:
            raise ValueError("container profiles do not preallocate: base_mb must be 0")


@dataclass(frozen=True)
class ResourceSample:
    timestamp: float
    instance_count: int
    memory_mb: float
    storage_mb: float
    cpu_pct: float

    def __post_init__(self):
        if self.instance_count < 0:
            raise ValueError("instance_count must be non-negative")
        for name in ("memory_mb", "storage_mb", "cpu_pct"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


DEFAULT_PROFILES: dict[str, ResourceProfile] = {
    "vm": ResourceProfile(backend="vm", base_mb=1024, idle_mb=0, storage_mb=8192, cpu_idle_pct=2.0),
    "container": ResourceProfile(backend="container", base_mb=0, idle_mb=50, storage_mb=512, cpu_idle_pct=0.1),
}


def load_profiles(text: str) -> dict[str, ResourceProfile]:
    """Load per-backend profile records from a JSON document."""
    try:
        records = json.loads(text)
        out = {}
        for record in records:
            profile = ResourceProfile(
                backend=record["backend"],
                base_mb=record["base_mb"],
                idle_mb=record["idle_mb"],
                storage_mb=record["storage_mb"],
                cpu_idle_pct=record["cpu_idle_pct"],
            )
            out[profile.backend] = profile
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise DataFileError(f"malformed profile file: {exc}") from exc
    return out


def bundled_profiles() -> dict[str, ResourceProfile]:
    text = resources.files("cyrange").joinpath("data/profiles.json").read_text(encoding="utf-8")
    return load_profiles(text)


def simulate_usage(profile: ResourceProfile, instance_count: int, timestamp: float = 0.0) -> ResourceSample:
    """Modeled aggregate usage for n instances; exactly linear in n."""
    if instance_count < 0:
        raise ValueError("instance_count must be non-negative")
    n = instance_count
    return ResourceSample(
        timestamp=timestamp,
        instance_count=n,
        memory_mb=n * (profile.base_mb + profile.idle_mb),
        storage_mb=n * profile.storage_mb,
        cpu_pct=n * profile.cpu_idle_pct,
    )


def collect_stats(driver, env, ticks: int = 1, interval_s: float = 1.0,
                  start: float = 0.0) -> tuple[list[ResourceSample], list[str]]:
    """Poll driver stats for every running instance of an environment.

    Returns one aggregate sample per tick with logical timestamps
    (start + k * interval_s) so output stays deterministic. Instances whose
    stats call fails are skipped for that tick and reported in the warnings
    list; a stopped environment yields no samples.
    """
    running = sorted(
        instance for instance, status in env.instances.items() if status == "running"
    )
    samples: list[ResourceSample] = []
    warnings: list[str] = []
    if not running:
        return samples, warnings
    for tick in range(ticks):
        memory = storage = cpu = 0.0
        seen = 0
        for instance in running:
            try:
                stat = driver.stats(instance)
            except DriverError as exc:
                warnings.append(f"tick {tick}: stats failed for {instance}: {exc}")
                continue
            memory += stat.memory_mb
            storage += stat.storage_mb
            cpu += stat.cpu_pct
            seen += 1
        samples.append(ResourceSample(
            timestamp=start + tick * interval_s,
            instance_count=seen,
            memory_mb=memory,
            storage_mb=storage,
            cpu_pct=cpu,
        ))
    return samples, warnings


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float


@dataclass(frozen=True)
class ComparisonRow:
    instance_count: int
    vm_memory_mb: float
    ct_memory_mb: float
    memory_ratio: float | None
    vm_storage_mb: float
    ct_storage_mb: float
    storage_ratio: float | None
    vm_cpu_pct: float
    ct_cpu_pct: float
    cpu_ratio: float | None


@dataclass(frozen=True)
class ComparisonSummary:
    rows: tuple[ComparisonRow, ...]
    fits: dict[str, LinearFit]


def _ratio(vm_value: float, ct_value: float) -> float | None:
    if ct_value == 0:
        return 1.0 if vm_value == 0 else None
    return vm_value / ct_value


def _fit(samples: list[ResourceSample], attribute: str) -> LinearFit | None:
    xs = [float(s.instance_count) for s in samples]
    ys = [getattr(s, attribute) for s in samples]
    if len(set(xs)) < 2:
        return None
    slope, intercept = statistics.linear_regression(xs, ys)
    return LinearFit(slope=slope, intercept=intercept)


def compare_backends(vm_samples: Iterable[ResourceSample],
                     ct_samples: Iterable[ResourceSample]) -> ComparisonSummary:
    """Per-resource vm/container ratios at matched instance counts, plus linear fits.

    Timestamps never enter the comparison, so uniformly shifting either
    series leaves the result unchanged.
    """
    vm_samples = list(vm_samples)
    ct_samples = list(ct_samples)
    if not vm_samples or not ct_samples:
        raise ValueError("both sample series must be non-empty")
    vm_by_n = {s.instance_count: s for s in vm_samples}
    ct_by_n = {s.instance_count: s for s in ct_samples}
    matched = sorted(set(vm_by_n) & set(ct_by_n))
    if not matched:
        raise ValueError("no overlapping instance counts between the series")

    rows = []
    for n in matched:
        vm, ct = vm_by_n[n], ct_by_n[n]
        rows.append(ComparisonRow(
            instance_count=n,
            vm_memory_mb=vm.memory_mb, ct_memory_mb=ct.memory_mb,
            memory_ratio=_ratio(vm.memory_mb, ct.memory_mb),
            vm_storage_mb=vm.storage_mb, ct_storage_mb=ct.storage_mb,
            storage_ratio=_ratio(vm.storage_mb, ct.storage_mb),
            vm_cpu_pct=vm.cpu_pct, ct_cpu_pct=ct.cpu_pct,
            cpu_ratio=_ratio(vm.cpu_pct, ct.cpu_pct),
        ))

    fits: dict[str, LinearFit] = {}
    for series_name, series in (("vm", vm_samples), ("container", ct_samples)):
        for attribute in ("memory_mb", "storage_mb", "cpu_pct"):
            fit = _fit(series, attribute)
            if fit is not None:
                fits[f"{series_name}.{attribute}"] = fit

    return ComparisonSummary(rows=tuple(rows), fits=fits)
