"""cyrange: cyber-range scenario harness with backend reproducibility metrics."""

from .errors import CyrangeError
from .ingest import (
    CweMap,
    Finding,
    FindingSet,
    default_cwe_map,
    map_cve_to_cwe,
    parse_msf_log,
    parse_nikto,
    parse_nmap,
    parse_openvas,
    parse_zap,
    read_jsonl,
    write_jsonl,
)
from .provision import (
    DriverContract,
    MockDriver,
    ProvisionPlan,
    container_suitability,
    execute_plan,
    image_export_plan,
    plan_environment,
    plan_to_commands,
)
from .repro import MatchPredicate, ReproReport, aggregate_by_cwe, diff, jaccard_multiset, jaccard_set, match_rate
from .resmon import ResourceProfile, ResourceSample, compare_backends, collect_stats, simulate_usage
from .scenario import Scenario, parse_scenario, reachability, serialize_scenario, validate_scenario

__version__ = "0.1.0"

__all__ = [
    "CweMap",
    "CyrangeError",
    "DriverContract",
    "Finding",
    "FindingSet",
    "MatchPredicate",
    "MockDriver",
    "ProvisionPlan",
    "ReproReport",
    "ResourceProfile",
    "ResourceSample",
    "Scenario",
    "__version__",
    "aggregate_by_cwe",
    "compare_backends",
    "collect_stats",
    "container_suitability",
    "default_cwe_map",
    "diff",
    "execute_plan",
    "image_export_plan",
    "jaccard_multiset",
    "jaccard_set",
    "map_cve_to_cwe",
    "match_rate",
    "parse_msf_log",
    "parse_nikto",
    "parse_nmap",
    "parse_openvas",
    "parse_scenario",
    "parse_zap",
    "plan_environment",
    "plan_to_commands",
    "reachability",
    "read_jsonl",
    "serialize_scenario",
    "simulate_usage",
    "validate_scenario",
    "write_jsonl",
]
