"""Trigger-event exploitability scoring (SC-7).

Each event gets a level on a three-step scale describing how freely an
outside account can fire it. Activity-type filters can only lower a score.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from .errors import ConfigError
from .workflow_model import TriggerEvent


class Level(enum.IntEnum):
    RESTRICTED = 1
    SUPERVISED = 2
    UNSUPERVISED = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True)
class ExploitabilityScore:
    level: int
    rationale: str = ""

    def __post_init__(self) -> None:
        if self.level not in (1, 2, 3):
            raise ValueError(f"exploitability level must be 1, 2 or 3, got {self.level!r}")

    @property
    def label(self) -> str:
        return Level(self.level).label


_R, _S, _U = Level.RESTRICTED, Level.SUPERVISED, Level.UNSUPERVISED

_WRITE = "requires write access or a repository content change"
_MEDIATED = "fires only after maintainer mediation or approval"
_EXTERNAL = "any account can fire it through an external action"

# event -> (level, rationale)
_BASE: dict[str, tuple[Level, str]] = {
    "branch_protection_rule": (_R, _WRITE),
    "check_run": (_R, "created by integrations with checks permission"),
    "check_suite": (_R, "created by pushes or integrations with checks permission"),
    "create": (_R, _WRITE),
    "delete": (_R, _WRITE),
    "deployment": (_R, _WRITE),
    "deployment_status": (_R, _WRITE),
    "discussion": (_U, _EXTERNAL),
    "discussion_comment": (_U, _EXTERNAL),
    "fork": (_U, _EXTERNAL),
    "gollum": (_S, "wiki edits are limited to collaborators unless the wiki is opened up"),
    "issue_comment": (_U, _EXTERNAL),
    "issues": (_U, _EXTERNAL),
    "label": (_R, "label management requires triage or write access"),
    "merge_group": (_R, "merge queue entries require write access"),
    "milestone": (_R, "milestone management requires triage or write access"),
    "page_build": (_R, _WRITE),
    "project": (_R, "project management requires write access"),
    "project_card": (_R, "project management requires write access"),
    "project_column": (_R, "project management requires write access"),
    "public": (_R, "visibility change requires admin access"),
    "pull_request": (_S, _MEDIATED),
    "pull_request_review": (_S, _MEDIATED),
    "pull_request_review_comment": (_S, _MEDIATED),
    "pull_request_target": (_U, "runs in base-repository context for any fork pull request"),
    "push": (_R, _WRITE),
    "registry_package": (_R, _WRITE),
    "release": (_R, _WRITE),
    "repository_dispatch": (_R, "needs a token with write access to dispatch"),
    "schedule": (_R, "only a committed workflow change sets the cron"),
    "status": (_R, "commit statuses require write or statuses access"),
    "watch": (_U, _EXTERNAL),
    "workflow_call": (_S, "inherits the trigger of the calling workflow"),
    "workflow_dispatch": (_R, "dispatch requires write access"),
    "workflow_run": (_S, "follows another workflow that may itself be externally triggered"),
}

# (event, activity) -> (level, rationale)
_OVERRIDES: dict[tuple[str, str], tuple[Level, str]] = {
    ("issues", "assigned"): (_S, "only maintainers assign issues"),
    ("issues", "unassigned"): (_S, "only maintainers unassign issues"),
    ("issues", "labeled"): (_S, "only maintainers label issues"),
    ("issues", "unlabeled"): (_S, "only maintainers unlabel issues"),
    ("pull_request_target", "labeled"): (_S, "labeling a pull request requires triage access"),
    ("pull_request_target", "unlabeled"): (_S, "labeling a pull request requires triage access"),
    ("pull_request_target", "assigned"): (_S, "only maintainers assign pull requests"),
}

UNKNOWN_EVENT = "unknown event"


@dataclass(frozen=True)
class EventScoreTable:
    base: dict[str, ExploitabilityScore]
    activity_overrides: dict[tuple[str, str], ExploitabilityScore] = field(default_factory=dict)
    default_for_unknown: ExploitabilityScore = ExploitabilityScore(2, UNKNOWN_EVENT)
    overridden: frozenset[str] = frozenset()

    def lookup(self, event_name: str) -> ExploitabilityScore:
        return self.base.get(event_name.lower(), self.default_for_unknown)

    def merged(self, overrides: dict[str, int]) -> "EventScoreTable":
        """Return a copy with ``event`` or ``event/activity`` keys replaced by user levels."""
        base = dict(self.base)
        activity = dict(self.activity_overrides)
        touched = set(self.overridden)
        for key, level in overrides.items():
            score = ExploitabilityScore(level, "override")
            if "/" in key:
                event, act = key.lower().split("/", 1)
                activity[(event, act)] = score
            else:
                base[key.lower()] = score
            touched.add(key.lower())
        return replace(self, base=base, activity_overrides=activity, overridden=frozenset(touched))


def default_score_table() -> EventScoreTable:
    return EventScoreTable(
        base={name: ExploitabilityScore(int(lvl), why) for name, (lvl, why) in _BASE.items()},
        activity_overrides={
            key: ExploitabilityScore(int(lvl), why) for key, (lvl, why) in _OVERRIDES.items()
        },
    )


def score_event(event: TriggerEvent, table: EventScoreTable | None = None) -> ExploitabilityScore:
    """Score one trigger.

    When every declared activity type has an override, the highest override
    applies (an attacker picks the easiest path), capped at the base score.
    """
    table = table or default_score_table()
    name = event.event_name.lower()
    base = table.lookup(name)
    types = event.activity_types
    if not types:
        return base
    overrides = [table.activity_overrides.get((name, t)) for t in types]
    if any(o is None for o in overrides):
        return base
    best = max(overrides, key=lambda s: s.level)  # type: ignore[union-attr]
    if best.level >= base.level:
        return base
    return ExploitabilityScore(best.level, f"activity filter: {best.rationale}")  # type: ignore[union-attr]


def load_score_overrides(path: str | Path) -> dict[str, int]:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read score table {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"score table {path} must map event names to 1, 2 or 3")
    out: dict[str, int] = {}
    for key, value in data.items():
        if isinstance(value, bool) or value not in (1, 2, 3):
            raise ConfigError(f"score table {path}: {key!r} must be 1, 2 or 3, got {value!r}")
        out[str(key)] = int(value)
    return out


def load_score_table(path: str | Path | None) -> EventScoreTable:
    table = default_score_table()
    if path is None:
        return table
    return table.merged(load_score_overrides(path))


def format_score_table(table: EventScoreTable) -> str:
    lines = []
    for name in sorted(table.base):
        score = table.base[name]
        tag = " (override)" if name in table.overridden else ""
        lines.append(f"{name} {score.level}{tag}  # {score.label}: {score.rationale}")
    for (event, act) in sorted(table.activity_overrides):
        score = table.activity_overrides[(event, act)]
        key = f"{event}/{act}"
        tag = " (override)" if key in table.overridden else ""
        lines.append(f"{key} {score.level}{tag}  # {score.label}: {score.rationale}")
    d = table.default_for_unknown
    lines.append(f"<unknown> {d.level}  # {d.label}: {d.rationale}")
    return "\n".join(lines) + "\n"
