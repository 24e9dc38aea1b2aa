"""Reproducibility metrics between finding sets from different backends.

The match predicate projects finding identity keys onto the fields that
should decide "same detection"; presence mode compares key sets, multiset
mode compares per-key counts. Jaccard similarity is reported under both
definitions because per-class count tables support either reading:

    set:      |keys(a) & keys(b)| / |keys(a) | keys(b)|
    multiset: sum_k min(a_k, b_k) / sum_k max(a_k, b_k)

Both are defined as 1.0 when the inputs are empty.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import EnvironmentMismatchError
from .ingest import FindingKey, FindingSet, cwe_sort_key

PRESENCE = "presence"
MULTISET = "multiset"

KEY_FIELDS = ("tool", "target", "detector_id", "location")

DIVERGENCE_NOTE = (
    "Headline single-value similarity figures quoted elsewhere for VM-vs-container "
    "reproducibility (0.993, or 0.997) are not derivable from per-class aggregate "
    "counts; this report always carries both the set and multiset Jaccard values "
    "computed directly from its inputs."
)


@dataclass(frozen=True)
class MatchPredicate:
    """Decides when two findings count as the same observable outcome."""

    key_fields: tuple[str, ...] = KEY_FIELDS
    count_mode: str = MULTISET

    def __post_init__(self):
        if "detector_id" not in self.key_fields:
            raise ValueError("key projection must include detector_id")
        unknown = set(self.key_fields) - set(KEY_FIELDS)
        if unknown:
            raise ValueError(f"unknown key fields: {sorted(unknown)}")
        if self.count_mode not in (PRESENCE, MULTISET):
            raise ValueError(f"unknown count mode: {self.count_mode}")

    def project(self, key: FindingKey) -> tuple:
        return tuple(getattr(key, name) for name in self.key_fields)


def _projected_counts(fs: FindingSet, predicate: MatchPredicate) -> dict[tuple, int]:
    out: dict[tuple, int] = {}
    for key, count in fs.counts().items():
        projected = predicate.project(key)
        out[projected] = out.get(projected, 0) + count
    return out


def jaccard_set(a: FindingSet, b: FindingSet, predicate: MatchPredicate | None = None) -> float:
    """Presence-based Jaccard over projected keys; 1.0 when both sets are empty."""
    predicate = predicate or MatchPredicate(count_mode=PRESENCE)
    if predicate.count_mode != PRESENCE:
        raise ValueError("jaccard_set requires a presence-mode predicate")
    keys_a = set(_projected_counts(a, predicate))
    keys_b = set(_projected_counts(b, predicate))
    union = keys_a | keys_b
    if not union:
        return 1.0
    return len(keys_a & keys_b) / len(union)


def jaccard_multiset(a: FindingSet, b: FindingSet) -> float:
    """Count-based Jaccard over identity keys; 1.0 when both sets are empty."""
    counts_a = a.counts()
    counts_b = b.counts()
    min_sum = 0
    max_sum = 0
    for key in set(counts_a) | set(counts_b):
        ca = counts_a.get(key, 0)
        cb = counts_b.get(key, 0)
        min_sum += min(ca, cb)
        max_sum += max(ca, cb)
    if max_sum == 0:
        return 1.0
    return min_sum / max_sum


def aggregate_by_cwe(fs: FindingSet) -> dict[str, int]:
    """Total finding counts per CWE bucket, in canonical CWE order."""
    totals: dict[str, int] = {}
    for _key, cwe, count in fs.entries():
        totals[cwe] = totals.get(cwe, 0) + count
    return {cwe: totals[cwe] for cwe in sorted(totals, key=cwe_sort_key)}


@dataclass(frozen=True)
class ReproRow:
    """Counts for one detection class: findings sharing (tool, target, cwe, label).

    The label is the detector id, so per-class count tables keep classes that
    share a CWE (for example reflected and stored XSS) on separate rows.
    """

    tool: str
    target: str
    cwe: str
    label: str
    baseline: int
    candidate: int

    @property
    def matched(self) -> bool:
        return self.baseline == self.candidate


@dataclass(frozen=True)
class ToolSubtotal:
    baseline: int
    candidate: int
    min_sum: int
    max_sum: int

    @property
    def j_multiset(self) -> float:
        return 1.0 if self.max_sum == 0 else self.min_sum / self.max_sum

    def combine(self, other: "ToolSubtotal") -> "ToolSubtotal":
        return ToolSubtotal(
            baseline=self.baseline + other.baseline,
            candidate=self.candidate + other.candidate,
            min_sum=self.min_sum + other.min_sum,
            max_sum=self.max_sum + other.max_sum,
        )


@dataclass(frozen=True)
class ReproReport:
    baseline_env: str
    candidate_env: str
    rows: tuple[ReproRow, ...]
    j_set: float
    j_multiset: float
    subtotals: dict[str, ToolSubtotal] = field(default_factory=dict)
    notes: tuple[str, ...] = (DIVERGENCE_NOTE,)

    @property
    def matched_rows(self) -> int:
        return sum(1 for row in self.rows if row.matched)


def _row_sort_key(row: ReproRow):
    return (-(row.baseline + row.candidate), cwe_sort_key(row.cwe), row.tool, row.target, row.label)


def diff(a: FindingSet, b: FindingSet, predicate: MatchPredicate | None = None) -> ReproReport:
    """Full comparison of two finding sets from distinct environments."""
    if a.environment == b.environment:
        raise EnvironmentMismatchError(
            f"both inputs carry environment tag {a.environment!r}; nothing to compare"
        )
    predicate = predicate or MatchPredicate(count_mode=PRESENCE)
    if predicate.count_mode != PRESENCE:
        predicate = MatchPredicate(key_fields=predicate.key_fields, count_mode=PRESENCE)

    counts_a = a.counts()
    counts_b = b.counts()

    # Class rows: aggregate locations away, keep tool/target/cwe/label.
    def class_counts(fs: FindingSet) -> dict[tuple, int]:
        out: dict[tuple, int] = {}
        for key, cwe, count in fs.entries():
            row_key = (key.tool, key.target, cwe, key.detector_id)
            out[row_key] = out.get(row_key, 0) + count
        return out

    classes_a = class_counts(a)
    classes_b = class_counts(b)
    rows = tuple(sorted((
        ReproRow(tool=tool, target=target, cwe=cwe, label=label,
                 baseline=classes_a.get((tool, target, cwe, label), 0),
                 candidate=classes_b.get((tool, target, cwe, label), 0))
        for tool, target, cwe, label in set(classes_a) | set(classes_b)
    ), key=_row_sort_key))

    subtotals: dict[str, ToolSubtotal] = {}
    for key in set(counts_a) | set(counts_b):
        ca = counts_a.get(key, 0)
        cb = counts_b.get(key, 0)
        current = subtotals.get(key.tool, ToolSubtotal(0, 0, 0, 0))
        subtotals[key.tool] = current.combine(
            ToolSubtotal(baseline=ca, candidate=cb, min_sum=min(ca, cb), max_sum=max(ca, cb))
        )

    return ReproReport(
        baseline_env=a.environment,
        candidate_env=b.environment,
        rows=rows,
        j_set=jaccard_set(a, b, predicate),
        j_multiset=jaccard_multiset(a, b),
        subtotals={tool: subtotals[tool] for tool in sorted(subtotals)},
    )


def match_rate(report: ReproReport, per_tool: bool = False) -> dict:
    """Percentage agreement per CWE: sum of per-row minima over maxima, times 100.

    A rate of 100.0 therefore holds exactly when every row of that CWE is
    matched. With ``per_tool`` the grouping key becomes (tool, cwe), which is
    the shape used for plotting data.
    """
    sums: dict = {}
    for row in report.rows:
        group = (row.tool, row.cwe) if per_tool else row.cwe
        min_sum, max_sum = sums.get(group, (0, 0))
        sums[group] = (min_sum + min(row.baseline, row.candidate),
                       max_sum + max(row.baseline, row.candidate))
    out = {}
    for group, (min_sum, max_sum) in sums.items():
        out[group] = 100.0 if max_sum == 0 else 100.0 * min_sum / max_sum
    if per_tool:
        ordered = sorted(out, key=lambda g: (g[0], cwe_sort_key(g[1])))
    else:
        ordered = sorted(out, key=cwe_sort_key)
    return {group: out[group] for group in ordered}


# ---------------------------------------------------------------------------
# JSON round-trip for saved reports

def report_to_dict(report: ReproReport) -> dict:
    return {
        "baseline_env": report.baseline_env,
        "candidate_env": report.candidate_env,
        "j_set": report.j_set,
        "j_multiset": report.j_multiset,
        "rows": [
            {
                "tool": row.tool, "target": row.target, "cwe": row.cwe, "label": row.label,
                "baseline": row.baseline, "candidate": row.candidate, "matched": row.matched,
            }
            for row in report.rows
        ],
        "subtotals": {
            tool: {
                "baseline": sub.baseline, "candidate": sub.candidate,
                "min_sum": sub.min_sum, "max_sum": sub.max_sum,
                "j_multiset": sub.j_multiset,
            }
            for tool, sub in report.subtotals.items()
        },
        "notes": list(report.notes),
    }


def report_from_dict(data: dict) -> ReproReport:
    try:
        rows = tuple(
            ReproRow(tool=row["tool"], target=row["target"], cwe=row["cwe"],
                     label=row["label"], baseline=row["baseline"], candidate=row["candidate"])
            for row in data["rows"]
        )
        subtotals = {
            tool: ToolSubtotal(baseline=sub["baseline"], candidate=sub["candidate"],
                               min_sum=sub["min_sum"], max_sum=sub["max_sum"])
            for tool, sub in data.get("subtotals", {}).items()
        }
        return ReproReport(
            baseline_env=data["baseline_env"],
            candidate_env=data["candidate_env"],
            rows=rows,
            j_set=data["j_set"],
            j_multiset=data["j_multiset"],
            subtotals=subtotals,
            notes=tuple(data.get("notes", (DIVERGENCE_NOTE,))),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed report document: {exc}") from exc
