"""Finding tuples, per-workflow report entries and corpus aggregates."""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable

from . import __version__
from .checks import (
    MISCONF_PERM_DEFAULT,
    MISCONF_PERM_GLOBAL,
    Conditionality,
    Finding,
    IssueLine,
    Kind,
    kind_of,
)
from .exploitability import EventScoreTable, ExploitabilityScore, default_score_table, score_event
from .workflow_model import WorkflowModel

EXIT_CLEAN = 0
EXIT_MISCONFIGURATIONS = 1
EXIT_VULNERABILITIES = 2
EXIT_ERROR = 3

PERM_DEFAULT = "default"
PERM_GLOBAL = "global"
PERM_PER_JOB = "per_job"


def to_tuple(finding: Finding) -> list[Any]:
    """The seven-element record: code, event, job, step, position, line, score."""
    return [
        finding.code,
        finding.triggering_event,
        finding.job_name,
        finding.step_name,
        finding.step_position,
        finding.issue_line.render(),
        finding.exploitability.level,
    ]


def _details(finding: Finding) -> dict[str, str]:
    return {"kind": finding.kind.value, "conditionality": finding.conditionality.value}


def from_tuple(record: list[Any], details: dict[str, str] | None = None,
               indeterminate: bool = False) -> Finding:
    code, event, job, step, position, line, level = record
    head, _, text = str(line).partition(": ")
    number = int(head.split()[-1])
    conditionality = Conditionality((details or {}).get("conditionality", "not_applicable"))
    return Finding(code, event, job, step, int(position), IssueLine(number, text),
                   ExploitabilityScore(int(level)), conditionality, indeterminate)


def permission_category(codes: Iterable[str]) -> str:
    codes = set(codes)
    if MISCONF_PERM_DEFAULT in codes:
        return PERM_DEFAULT
    if MISCONF_PERM_GLOBAL in codes:
        return PERM_GLOBAL
    return PERM_PER_JOB


@dataclass
class WorkflowResult:
    key: str
    events: list[tuple[str, int]]
    findings: list[Finding] = field(default_factory=list)
    indeterminate: list[Finding] = field(default_factory=list)
    content_sha256: str = ""

    @classmethod
    def from_model(cls, key: str, model: WorkflowModel, findings: list[Finding],
                   score_table: EventScoreTable | None = None) -> "WorkflowResult":
        table = score_table or default_score_table()
        events: list[tuple[str, int]] = []
        for trigger in model.triggers:
            pair = (trigger.event_name, score_event(trigger, table).level)
            if pair[0] not in [e for e, _ in events]:
                events.append(pair)
        return cls(
            key=key,
            events=events,
            findings=[f for f in findings if not f.indeterminate],
            indeterminate=[f for f in findings if f.indeterminate],
            content_sha256=hashlib.sha256(model.source.encode("utf-8")).hexdigest(),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "events": [[name, level] for name, level in self.events],
            "issues": [to_tuple(f) for f in self.findings],
            "issue_details": [_details(f) for f in self.findings],
            "indeterminate": [to_tuple(f) for f in self.indeterminate],
            "content_sha256": self.content_sha256,
        }

    @classmethod
    def from_dict(cls, key: str, data: dict[str, Any]) -> "WorkflowResult":
        details = data.get("issue_details") or [None] * len(data["issues"])
        return cls(
            key=key,
            events=[(str(e), int(s)) for e, s in data["events"]],
            findings=[from_tuple(t, d) for t, d in zip(data["issues"], details)],
            indeterminate=[from_tuple(t, indeterminate=True) for t in data.get("indeterminate", [])],
            content_sha256=data.get("content_sha256", ""),
        )


@dataclass
class AggregateStats:
    total_issues: int = 0
    vulnerabilities: int = 0
    misconfigurations: int = 0
    indeterminate: int = 0
    workflows: int = 0
    by_code: dict[str, int] = field(default_factory=dict)
    by_score: dict[str, dict[str, int]] = field(default_factory=dict)
    permission_distribution: dict[str, float] = field(default_factory=dict)

    @classmethod
    def compute(cls, results: Iterable[WorkflowResult]) -> "AggregateStats":
        results = list(results)
        by_code: Counter[str] = Counter()
        by_score = {k.value: {"1": 0, "2": 0, "3": 0} for k in Kind}
        perms: Counter[str] = Counter()
        indeterminate = 0
        for result in results:
            indeterminate += len(result.indeterminate)
            perms[permission_category(f.code for f in result.findings)] += 1
            for f in result.findings:
                by_code[f.code] += 1
                by_score[f.kind.value][str(f.exploitability.level)] += 1
        vulns = sum(n for code, n in by_code.items() if kind_of(code) is Kind.VULNERABILITY)
        total = sum(by_code.values())
        n = len(results)

        def pct(x: int) -> float:
            return round(100.0 * x / n, 1) if n else 0.0

        return cls(
            total_issues=total,
            vulnerabilities=vulns,
            misconfigurations=total - vulns,
            indeterminate=indeterminate,
            workflows=n,
            by_code=dict(sorted(by_code.items())),
            by_score=by_score,
            permission_distribution={
                "perm_default_pct": pct(perms[PERM_DEFAULT]),
                "perm_global_pct": pct(perms[PERM_GLOBAL]),
                "perm_per_job_pct": pct(perms[PERM_PER_JOB]),
            },
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "total_issues": self.total_issues,
            "vulnerabilities": self.vulnerabilities,
            "misconfigurations": self.misconfigurations,
            "indeterminate": self.indeterminate,
            "workflows": self.workflows,
            "by_code": dict(self.by_code),
            "by_score": {k: dict(v) for k, v in self.by_score.items()},
            "permission_distribution": dict(self.permission_distribution),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AggregateStats":
        return cls(**{k: data[k] for k in cls.__dataclass_fields__ if k in data})


@dataclass
class ScanReport:
    per_workflow: dict[str, WorkflowResult]
    aggregates: AggregateStats
    tool_version: str = __version__
    scan_timestamp: str | None = None
    inputs_digest: str = ""
    errors: dict[str, str] = field(default_factory=dict)
    graph: dict[str, Any] = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        if self.aggregates.vulnerabilities:
            return EXIT_VULNERABILITIES
        if self.aggregates.misconfigurations:
            return EXIT_MISCONFIGURATIONS
        return EXIT_CLEAN

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "tool_version": self.tool_version,
            "inputs_digest": self.inputs_digest,
            "workflows": {k: v.to_dict() for k, v in self.per_workflow.items()},
            "aggregates": self.aggregates.to_dict(),
            "errors": dict(self.errors),
            "graph": self.graph,
        }
        if self.scan_timestamp is not None:
            out["scan_timestamp"] = self.scan_timestamp
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScanReport":
        return cls(
            per_workflow={k: WorkflowResult.from_dict(k, v) for k, v in data["workflows"].items()},
            aggregates=AggregateStats.from_dict(data["aggregates"]),
            tool_version=data.get("tool_version", ""),
            scan_timestamp=data.get("scan_timestamp"),
            inputs_digest=data.get("inputs_digest", ""),
            errors=dict(data.get("errors", {})),
            graph=data.get("graph", {}),
        )

    @classmethod
    def from_json(cls, text: str) -> "ScanReport":
        return cls.from_dict(json.loads(text))


def inputs_digest(results: Iterable[WorkflowResult]) -> str:
    h = hashlib.sha256()
    for result in sorted(results, key=lambda r: r.key):
        h.update(result.key.encode("utf-8") + b"\0" + result.content_sha256.encode() + b"\n")
    return h.hexdigest()


def graph_summary(graph) -> dict[str, Any]:
    if graph is None:
        return {}
    return {
        "root": str(graph.root.identity),
        "nodes": sorted(str(i) for i in graph.nodes),
        "edges": sorted([str(a), str(b)] for a, b in graph.edges),
        "unresolved": sorted(graph.unresolved),
        "partial": graph.partial,
    }


def assemble_report(
    graph,
    results: Iterable[WorkflowResult],
    *,
    errors: dict[str, str] | None = None,
    timestamp: str | None = None,
) -> ScanReport:
    """Fold per-workflow results into a report; keys are ``owner/repo:path``."""
    ordered = sorted(results, key=lambda r: r.key)
    return ScanReport(
        per_workflow={r.key: r for r in ordered},
        aggregates=AggregateStats.compute(ordered),
        scan_timestamp=timestamp,
        inputs_digest=inputs_digest(ordered),
        errors=dict(sorted((errors or {}).items())),
        graph=graph_summary(graph),
    )


def _plural(n: int, word: str, plural: str | None = None) -> str:
    return f"{n} {word if n == 1 else (plural or word + 's')}"


def render_human(report: ScanReport, top: int = 10) -> str:
    agg = report.aggregates
    lines = [
        f"{_plural(agg.total_issues, 'issue')}: "
        f"{_plural(agg.vulnerabilities, 'vulnerability', 'vulnerabilities')}, "
        f"{_plural(agg.misconfigurations, 'misconfiguration')} "
        f"in {_plural(agg.workflows, 'workflow')}"
    ]
    per_repo: dict[str, Counter[str]] = {}
    for key, result in report.per_workflow.items():
        repo = key.split(":", 1)[0]
        counts = per_repo.setdefault(repo, Counter())
        for f in result.findings:
            counts[f.kind.value] += 1
    if per_repo:
        lines.append("")
        lines.append("Per repository:")
        for repo in sorted(per_repo):
            c = per_repo[repo]
            total = sum(c.values())
            lines.append(
                f"  {repo}: {_plural(total, 'issue')} "
                f"({c[Kind.VULNERABILITY.value]} vuln, {c[Kind.MISCONFIGURATION.value]} misconf)"
            )
    if agg.by_code:
        lines.append("")
        lines.append("Top issue codes:")
        ranked = sorted(agg.by_code.items(), key=lambda kv: (-kv[1], kv[0]))[:top]
        width = max(len(code) for code, _ in ranked)
        lines.extend(f"  {code:<{width}}  {n}" for code, n in ranked)
    if agg.workflows:
        dist = agg.permission_distribution
        lines.append("")
        lines.append("Permissions (SC-6):")
        lines.append(f"  default token permissions: {dist['perm_default_pct']:.1f}%")
        lines.append(f"  workflow-level only:       {dist['perm_global_pct']:.1f}%")
        lines.append(f"  per-job:                   {dist['perm_per_job_pct']:.1f}%")
    if agg.indeterminate:
        lines.append("")
        lines.append(f"{agg.indeterminate} indeterminate version checks (not counted)")
    if report.errors:
        lines.append("")
        lines.append("Errors:")
        lines.extend(f"  {k}: {v}" for k, v in report.errors.items())
    return "\n".join(lines) + "\n"
