"""Which ``github.*`` context paths an outside account can write."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError
from .workflow_model import NotAContextPath, normalize_context_path


class Controllability(enum.Enum):
    ATTACKER = "AttackerControlled"
    MAINTAINER = "MaintainerControlled"
    PLATFORM = "PlatformControlled"


@dataclass(frozen=True)
class ContextEntry:
    tag: str | None
    controllability: Controllability


_ATTACKER: dict[str, str] = {
    "github.event.issue.title": "CI_ISSUE_TITLE",
    "github.event.issue.body": "CI_ISSUE_BODY",
    "github.event.pull_request.title": "CI_PR_TITLE",
    "github.event.pull_request.body": "CI_PR_BODY",
    "github.event.pull_request.head.ref": "CI_PR_HEAD_REF",
    "github.event.pull_request.head.label": "CI_PR_HEAD_LABEL",
    "github.event.pull_request.head.repo.name": "CI_PR_HEAD_REPO_NAME",
    "github.event.pull_request.head.repo.description": "CI_PR_HEAD_REPO_DESCRIPTION",
    "github.event.pull_request.head.repo.homepage": "CI_PR_HEAD_REPO_HOMEPAGE",
    "github.event.comment.body": "CI_COMMENT_BODY",
    "github.event.review.body": "CI_REVIEW_BODY",
    "github.event.review_comment.body": "CI_REVIEW_COMMENT_BODY",
    "github.event.discussion.title": "CI_DISCUSSION_TITLE",
    "github.event.discussion.body": "CI_DISCUSSION_BODY",
    "github.event.pages[*].page_name": "CI_PAGE_NAME",
    "github.event.commits[*].message": "CI_COMMITS_MESSAGE",
    "github.event.commits[*].author.name": "CI_COMMITS_AUTHOR_NAME",
    "github.event.commits[*].author.email": "CI_COMMITS_AUTHOR_EMAIL",
    "github.event.head_commit.message": "CI_HEAD_COMMIT_MESSAGE",
    "github.event.head_commit.author.name": "CI_HEAD_COMMIT_AUTHOR_NAME",
    "github.event.head_commit.author.email": "CI_HEAD_COMMIT_AUTHOR_EMAIL",
    "github.event.workflow_run.head_branch": "CI_WORKFLOW_RUN_HEAD_BRANCH",
    "github.event.workflow_run.head_commit.message": "CI_WORKFLOW_RUN_COMMIT_MESSAGE",
    "github.event.workflow_run.head_commit.author.name": "CI_WORKFLOW_RUN_COMMIT_AUTHOR_NAME",
    "github.event.workflow_run.head_commit.author.email": "CI_WORKFLOW_RUN_COMMIT_AUTHOR_EMAIL",
    "github.head_ref": "CI_HEAD_REF",
    "github.actor": "CI_ACTOR",
    "github.triggering_actor": "CI_TRIGGERING_ACTOR",
}

_MAINTAINER = (
    "github.event.inputs",
    "github.event.release.name",
    "github.event.release.body",
    "github.event.release.tag_name",
    "github.ref_name",
    "github.base_ref",
)

_PLATFORM = (
    "github.sha",
    "github.ref",
    "github.repository",
    "github.repository_owner",
    "github.run_id",
    "github.run_number",
    "github.run_attempt",
    "github.event_name",
    "github.workflow",
    "github.workspace",
    "github.server_url",
    "github.api_url",
    "github.token",
    "github.job",
    "github.event.pull_request.number",
    "github.event.pull_request.head.sha",
    "github.event.pull_request.base.sha",
    "github.event.issue.number",
    "github.event.number",
)


@dataclass(frozen=True)
class ControllabilityTable:
    entries: dict[str, ContextEntry]

    def lookup(self, path: str) -> ContextEntry | None:
        return self.entries.get(path)

    def attacker_tag(self, path: str) -> str | None:
        entry = self.entries.get(path)
        if entry is None or entry.controllability is not Controllability.ATTACKER:
            return None
        return entry.tag

    def validate(self) -> None:
        """Each CI_* tag must come from exactly one attacker-controlled path."""
        seen: dict[str, str] = {}
        for path, entry in self.entries.items():
            if entry.controllability is not Controllability.ATTACKER:
                continue
            if not entry.tag or not entry.tag.startswith("CI_"):
                raise ConfigError(f"attacker-controlled path {path!r} needs a CI_* tag")
            if entry.tag in seen:
                raise ConfigError(f"tag {entry.tag} used by both {seen[entry.tag]!r} and {path!r}")
            seen[entry.tag] = path


def default_controllability_table() -> ControllabilityTable:
    entries = {p: ContextEntry(tag, Controllability.ATTACKER) for p, tag in _ATTACKER.items()}
    entries.update({p: ContextEntry(None, Controllability.MAINTAINER) for p in _MAINTAINER})
    entries.update({p: ContextEntry(None, Controllability.PLATFORM) for p in _PLATFORM})
    return ControllabilityTable(entries)


def load_controllability_table(path: str | Path | None) -> ControllabilityTable:
    """Default table, optionally merged with a YAML override file.

    Override values are either a CI_* tag string (attacker controlled) or a
    mapping ``{class: <Controllability value>, tag: <CI_*>}``.
    """
    table = default_controllability_table()
    if path is None:
        return table
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read controllability table {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"controllability table {path} must be a mapping")
    entries = dict(table.entries)
    for raw_path, value in data.items():
        try:
            key = normalize_context_path(str(raw_path)).path
        except NotAContextPath as exc:
            raise ConfigError(f"{raw_path!r} is not a context path") from exc
        if isinstance(value, str):
            entries[key] = ContextEntry(value, Controllability.ATTACKER)
        elif isinstance(value, dict):
            try:
                cls = Controllability(value.get("class", Controllability.ATTACKER.value))
            except ValueError as exc:
                raise ConfigError(f"{raw_path!r}: unknown class {value.get('class')!r}") from exc
            entries[key] = ContextEntry(value.get("tag"), cls)
        else:
            raise ConfigError(f"{raw_path!r}: expected a tag or a mapping")
    merged = ControllabilityTable(entries)
    merged.validate()
    return merged
