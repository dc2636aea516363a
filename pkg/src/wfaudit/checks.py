"""Security checks SC-1 to SC-6 over a parsed workflow.

Every check first collects per-site issues and then replicates each issue
once per trigger event, attaching that event's exploitability score.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Iterable, Protocol

from .controllability import ControllabilityTable, default_controllability_table
from .errors import ForgeError, ResolverUnavailable
from .exploitability import EventScoreTable, ExploitabilityScore, default_score_table, score_event
from .workflow_model import (
    ActionRef,
    ExpressionOccurrence,
    RefType,
    Site,
    WorkflowModel,
    extract_expressions,
)

logger = logging.getLogger(__name__)

SECRET_OUTSIDE_ENV = "SECRET_OUTSIDE_ENV"
SECRET_DERIVED = "SECRET_DERIVED"
OUTDATED_WF = "OUTDATED_WF"
UNPINNED_WF = "UNPINNED_WF"
MISCONF_PERM_GLOBAL = "MISCONF_PERM_GLOBAL"
MISCONF_PERM_DEFAULT = "MISCONF_PERM_DEFAULT"

MISCONFIGURATION_CODES = frozenset(
    {OUTDATED_WF, UNPINNED_WF, MISCONF_PERM_GLOBAL, MISCONF_PERM_DEFAULT}
)


class Kind(enum.Enum):
    VULNERABILITY = "Vulnerability"
    MISCONFIGURATION = "Misconfiguration"


class Conditionality(enum.Enum):
    UNCONDITIONAL = "unconditional"
    CONDITIONAL = "conditional"
    NOT_APPLICABLE = "not_applicable"


def kind_of(code: str) -> Kind:
    if code.startswith("CI_") or code.startswith("SECRET_"):
        return Kind.VULNERABILITY
    if code in MISCONFIGURATION_CODES:
        return Kind.MISCONFIGURATION
    raise ValueError(f"unclassified issue code {code!r}")


@dataclass(frozen=True)
class IssueLine:
    number: int
    text: str

    def render(self) -> str:
        return f"line {self.number}: {self.text}"


@dataclass(frozen=True)
class Finding:
    code: str
    triggering_event: str
    job_name: str
    step_name: str
    step_position: int
    issue_line: IssueLine
    exploitability: ExploitabilityScore
    conditionality: Conditionality = Conditionality.NOT_APPLICABLE
    indeterminate: bool = False

    @property
    def kind(self) -> Kind:
        return kind_of(self.code)


@dataclass(frozen=True)
class _SiteIssue:
    code: str
    job_name: str
    step_name: str
    step_position: int
    line: int
    conditionality: Conditionality = Conditionality.NOT_APPLICABLE
    indeterminate: bool = False


class Resolver(Protocol):
    """What SC-4 needs from the forge: latest release commit and ref resolution."""

    def latest_version(self, repository: str): ...

    def resolve_ref(self, repository: str, ref: ActionRef) -> str: ...


def _replicate(
    model: WorkflowModel, issues: Iterable[_SiteIssue], score_table: EventScoreTable | None
) -> list[Finding]:
    table = score_table or default_score_table()
    scored = [(t.event_name, score_event(t, table)) for t in model.triggers]
    out = []
    for issue in issues:
        line = IssueLine(issue.line, model.line_text(issue.line))
        for event, score in scored:
            out.append(
                Finding(
                    code=issue.code,
                    triggering_event=event,
                    job_name=issue.job_name,
                    step_name=issue.step_name,
                    step_position=issue.step_position,
                    issue_line=line,
                    exploitability=score,
                    conditionality=issue.conditionality,
                    indeterminate=issue.indeterminate,
                )
            )
    return out


def _step_name(model: WorkflowModel, job_id: str, step_index: int) -> str:
    if not job_id or step_index == 0:
        return "-"
    return model.jobs[job_id].steps[step_index - 1].label


def _secret_issues(model: WorkflowModel, expressions: list[ExpressionOccurrence]) -> list[_SiteIssue]:
    issues = []
    for occ in expressions:
        if not occ.is_context or occ.context != "secrets":
            continue
        common = dict(
            job_name=occ.job_id or "-",
            step_name=_step_name(model, occ.job_id, occ.step_index),
            step_position=occ.step_index,
            line=occ.line,
        )
        if occ.site not in (Site.ENV_VALUE, Site.WITH_INPUT):
            issues.append(_SiteIssue(SECRET_OUTSIDE_ENV, **common))
        if occ.composed:
            issues.append(_SiteIssue(SECRET_DERIVED, **common))
    return issues


def check_secrets(
    model: WorkflowModel,
    expressions: list[ExpressionOccurrence] | None = None,
    score_table: EventScoreTable | None = None,
) -> list[Finding]:
    """SC-1 (secret used outside an env/with block) and SC-2 (secret composed into new data)."""
    if expressions is None:
        expressions = extract_expressions(model)
    return _replicate(model, _secret_issues(model, expressions), score_table)


def _injection_issues(
    model: WorkflowModel, expressions: list[ExpressionOccurrence], table: ControllabilityTable
) -> list[_SiteIssue]:
    issues = []
    for occ in expressions:
        if occ.site is not Site.RUN_SCRIPT or not occ.is_context or occ.context != "github":
            continue
        tag = table.attacker_tag(occ.path)  # type: ignore[arg-type]
        if tag is None:
            continue
        job = model.jobs[occ.job_id]
        step = job.steps[occ.step_index - 1]
        guarded = step.conditional is not None or job.conditional is not None
        issues.append(
            _SiteIssue(
                tag,
                job_name=occ.job_id,
                step_name=step.label,
                step_position=occ.step_index,
                line=occ.line,
                conditionality=Conditionality.CONDITIONAL if guarded else Conditionality.UNCONDITIONAL,
            )
        )
    return issues


def check_injection(
    model: WorkflowModel,
    expressions: list[ExpressionOccurrence] | None = None,
    table: ControllabilityTable | None = None,
    score_table: EventScoreTable | None = None,
) -> list[Finding]:
    """SC-3: attacker-controlled ``github.*`` values interpolated straight into run scripts."""
    if expressions is None:
        expressions = extract_expressions(model)
    table = table or default_controllability_table()
    return _replicate(model, _injection_issues(model, expressions, table), score_table)


def _uses_sites(model: WorkflowModel) -> list[tuple[str, str, int, int, ActionRef]]:
    sites = []
    for job in model.jobs.values():
        if job.reusable_workflow is not None:
            sites.append((job.job_id, "-", 0, job.uses_line, job.reusable_workflow))
        for step in job.steps:
            if step.uses is not None:
                sites.append((job.job_id, step.label, step.index, step.uses_line, step.uses))
    return sites


def _third_party_issues(model: WorkflowModel, resolver: Resolver | None) -> list[_SiteIssue]:
    issues = []
    for job_id, step_name, position, line, ref in _uses_sites(model):
        if not ref.is_remote:
            continue
        common = dict(job_name=job_id, step_name=step_name, step_position=position, line=line)
        if ref.ref_type is not RefType.COMMIT_SHA:
            issues.append(_SiteIssue(UNPINNED_WF, **common))
        try:
            if resolver is None:
                raise ResolverUnavailable("no resolver configured")
            latest = resolver.latest_version(ref.repository)
            current = resolver.resolve_ref(ref.repository, ref)
        except (ForgeError, ResolverUnavailable) as exc:
            logger.info("SC-4 indeterminate for %s: %s", ref.raw, exc)
            issues.append(_SiteIssue(OUTDATED_WF, indeterminate=True, **common))
            continue
        if current != latest.commit_sha:
            issues.append(_SiteIssue(OUTDATED_WF, **common))
    return issues


def check_third_party(
    model: WorkflowModel,
    resolver: Resolver | None,
    score_table: EventScoreTable | None = None,
) -> list[Finding]:
    """SC-4 (stale third-party version) and SC-5 (not pinned to a commit sha)."""
    return _replicate(model, _third_party_issues(model, resolver), score_table)


def _permission_issues(model: WorkflowModel) -> list[_SiteIssue]:
    lacking = [job for job in model.jobs.values() if job.permissions is None]
    if not lacking:
        return []
    first = lacking[0]
    if model.permissions is not None:
        return [_SiteIssue(MISCONF_PERM_GLOBAL, first.job_id, "-", 0, model.permissions.line)]
    if len(lacking) == len(model.jobs):
        return [_SiteIssue(MISCONF_PERM_DEFAULT, first.job_id, "-", 0, 1)]
    # Some jobs scoped, others left on the default token.
    return [_SiteIssue(MISCONF_PERM_DEFAULT, first.job_id, "-", 0, first.line)]


def check_permissions(
    model: WorkflowModel, score_table: EventScoreTable | None = None
) -> list[Finding]:
    """SC-6: permissions must be declared per job, not left default or only set globally."""
    return _replicate(model, _permission_issues(model), score_table)


def sort_findings(model: WorkflowModel, findings: list[Finding]) -> list[Finding]:
    job_order = model.job_order
    event_order = {t.event_name: i for i, t in enumerate(model.triggers)}
    return sorted(
        findings,
        key=lambda f: (
            job_order.get(f.job_name, -1),
            f.step_position,
            f.issue_line.number,
            f.code,
            event_order.get(f.triggering_event, len(event_order)),
        ),
    )


def run_all_checks(
    model: WorkflowModel,
    table: ControllabilityTable | None = None,
    resolver: Resolver | None = None,
    score_table: EventScoreTable | None = None,
) -> list[Finding]:
    """Run SC-1..SC-6 with SC-7 scores attached; indeterminate SC-4 results are included but flagged."""
    expressions = extract_expressions(model)
    findings = (
        check_secrets(model, expressions, score_table)
        + check_injection(model, expressions, table, score_table)
        + check_third_party(model, resolver, score_table)
        + check_permissions(model, score_table)
    )
    return sort_findings(model, findings)
