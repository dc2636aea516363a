"""Workflow YAML parsing and template-expression extraction.

Workflows are loaded through PyYAML's composer rather than ``safe_load`` so
that every scalar keeps its source span. Expression extraction scans those
spans in the original text, which is what lets a finding point at the exact
line it came from.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Any, Iterator, NamedTuple

import yaml
from yaml.nodes import MappingNode, Node, ScalarNode, SequenceNode

from .errors import EmptyJobs, MalformedYaml, NotAContextPath, NotAWorkflow

# Activity types per event, used to flag typos in `types:` filters.
ACTIVITY_TYPES: dict[str, frozenset[str]] = {
    "issues": frozenset(
        "opened edited deleted transferred pinned unpinned closed reopened assigned "
        "unassigned labeled unlabeled locked unlocked milestoned demilestoned".split()
    ),
    "issue_comment": frozenset({"created", "edited", "deleted"}),
    "pull_request": frozenset(
        "assigned unassigned labeled unlabeled opened edited closed reopened synchronize "
        "converted_to_draft ready_for_review locked unlocked review_requested "
        "review_request_removed auto_merge_enabled auto_merge_disabled milestoned "
        "demilestoned enqueued dequeued".split()
    ),
    "pull_request_review": frozenset({"submitted", "edited", "dismissed"}),
    "pull_request_review_comment": frozenset({"created", "edited", "deleted"}),
    "discussion": frozenset(
        "created edited deleted transferred pinned unpinned labeled unlabeled locked "
        "unlocked category_changed answered unanswered".split()
    ),
    "discussion_comment": frozenset({"created", "edited", "deleted"}),
    "release": frozenset(
        {"published", "unpublished", "created", "edited", "deleted", "prereleased", "released"}
    ),
    "workflow_run": frozenset({"completed", "requested", "in_progress"}),
    "check_run": frozenset({"created", "rerequested", "completed", "requested_action"}),
    "check_suite": frozenset({"completed"}),
    "label": frozenset({"created", "edited", "deleted"}),
    "milestone": frozenset({"created", "closed", "opened", "edited", "deleted"}),
    "registry_package": frozenset({"published", "updated"}),
    "branch_protection_rule": frozenset({"created", "edited", "deleted"}),
    "merge_group": frozenset({"checks_requested"}),
    "watch": frozenset({"started"}),
}
ACTIVITY_TYPES["pull_request_target"] = ACTIVITY_TYPES["pull_request"]

FILTER_KEYS = frozenset(
    {
        "branches",
        "branches-ignore",
        "tags",
        "tags-ignore",
        "paths",
        "paths-ignore",
        "workflows",
        "names",
    }
)

PERMISSION_SCOPES = frozenset(
    {
        "actions",
        "attestations",
        "checks",
        "contents",
        "deployments",
        "discussions",
        "id-token",
        "issues",
        "models",
        "packages",
        "pages",
        "pull-requests",
        "repository-projects",
        "security-events",
        "statuses",
    }
)
PERMISSION_LEVELS = frozenset({"read", "write", "none"})

_SHA_RE = re.compile(r"^[0-9a-fA-F]{40}$")
_TAG_LIKE_RE = re.compile(r"^(v?\d+([.\-]\w+)*|latest|stable|release.*)$", re.IGNORECASE)


# --------------------------------------------------------------------------
# Domain types
# --------------------------------------------------------------------------


class RefType(enum.Enum):
    TAG = "tag"
    BRANCH = "branch"
    COMMIT_SHA = "commit_sha"
    LOCAL_PATH = "local_path"
    DOCKER_IMAGE = "docker_image"


@dataclass(frozen=True)
class ActionRef:
    owner: str
    repo: str
    subpath: str | None
    ref_type: RefType
    ref: str
    raw: str

    @property
    def is_remote(self) -> bool:
        """Whether SC-4/SC-5 style version checks apply to this reference."""
        return self.ref_type not in (RefType.LOCAL_PATH, RefType.DOCKER_IMAGE)

    @property
    def repository(self) -> str:
        return f"{self.owner}/{self.repo}"

    @classmethod
    def parse(cls, uses: str) -> "ActionRef":
        text = uses.strip()
        if text.startswith(("./", "../")):
            return cls("", "", text, RefType.LOCAL_PATH, text, uses)
        if text.startswith("docker://"):
            return cls("", "", None, RefType.DOCKER_IMAGE, text[len("docker://") :], uses)
        target, sep, ref = text.rpartition("@")
        if not sep:
            target, ref = text, ""
        parts = target.split("/")
        owner = parts[0]
        repo = parts[1] if len(parts) > 1 else ""
        subpath = "/".join(parts[2:]) or None
        if _SHA_RE.match(ref):
            return cls(owner, repo, subpath, RefType.COMMIT_SHA, ref.lower(), uses)
        if _TAG_LIKE_RE.match(ref):
            return cls(owner, repo, subpath, RefType.TAG, ref, uses)
        return cls(owner, repo, subpath, RefType.BRANCH, ref, uses)


class PermissionMode(enum.Enum):
    NONE = "none"
    READ_ALL = "read-all"
    WRITE_ALL = "write-all"
    SCOPED = "scoped"


@dataclass(frozen=True)
class PermissionDecl:
    mode: PermissionMode
    scopes: dict[str, str] = field(default_factory=dict)
    unknown_scopes: tuple[str, ...] = ()
    line: int = 0

    @classmethod
    def from_value(cls, value: Any, line: int) -> "PermissionDecl":
        if value is None or value == {}:
            return cls(PermissionMode.NONE, {}, (), line)
        if isinstance(value, str):
            lowered = value.strip().lower()
            if lowered == "read-all":
                return cls(PermissionMode.READ_ALL, {}, (), line)
            if lowered == "write-all":
                return cls(PermissionMode.WRITE_ALL, {}, (), line)
            raise NotAWorkflow(f"line {line}: unsupported permissions value {value!r}")
        if isinstance(value, dict):
            scopes = {str(k): str(v).lower() for k, v in value.items()}
            unknown = tuple(
                k for k, v in scopes.items() if k not in PERMISSION_SCOPES or v not in PERMISSION_LEVELS
            )
            return cls(PermissionMode.SCOPED, scopes, unknown, line)
        raise NotAWorkflow(f"line {line}: unsupported permissions value {value!r}")


@dataclass(frozen=True)
class TriggerEvent:
    event_name: str
    activity_types: tuple[str, ...] = ()
    filters: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def unknown_activity_types(self) -> tuple[str, ...]:
        known = ACTIVITY_TYPES.get(self.event_name)
        if known is None:
            return ()
        return tuple(t for t in self.activity_types if t not in known)


@dataclass(frozen=True)
class StepModel:
    index: int
    line: int
    display_name: str | None = None
    step_id: str | None = None
    run_script: str | None = None
    uses: ActionRef | None = None
    uses_line: int = 0
    env: dict[str, str] = field(default_factory=dict)
    with_inputs: dict[str, str] = field(default_factory=dict)
    conditional: str | None = None

    @property
    def label(self) -> str:
        """Name shown in reports: explicit name, then id, then the action or run text."""
        if self.display_name:
            return self.display_name
        if self.step_id:
            return self.step_id
        if self.uses is not None:
            return self.uses.raw
        if self.run_script:
            return self.run_script.strip().splitlines()[0] if self.run_script.strip() else "run"
        return f"step {self.index}"


@dataclass(frozen=True)
class JobModel:
    job_id: str
    line: int
    display_name: str | None = None
    permissions: PermissionDecl | None = None
    env: dict[str, str] = field(default_factory=dict)
    steps: tuple[StepModel, ...] = ()
    reusable_workflow: ActionRef | None = None
    uses_line: int = 0
    conditional: str | None = None

    @property
    def label(self) -> str:
        return self.job_id


@dataclass(frozen=True)
class WorkflowModel:
    source_path: str
    triggers: tuple[TriggerEvent, ...]
    jobs: dict[str, JobModel]
    raw_lines: tuple[str, ...]
    source: str = field(repr=False, default="")
    name: str | None = None
    permissions: PermissionDecl | None = None
    env: dict[str, str] = field(default_factory=dict)
    # YAML node tree, kept for expression extraction.
    root_node: Node | None = field(default=None, repr=False, compare=False)

    def line_text(self, line: int) -> str:
        if 1 <= line <= len(self.raw_lines):
            return self.raw_lines[line - 1]
        return ""

    @property
    def job_order(self) -> dict[str, int]:
        return {job_id: i for i, job_id in enumerate(self.jobs)}


class Site(enum.Enum):
    RUN_SCRIPT = "RunScript"
    ENV_VALUE = "EnvValue"
    WITH_INPUT = "WithInput"
    CONDITIONAL = "Conditional"
    OTHER = "Other"


@dataclass(frozen=True)
class ExpressionOccurrence:
    path: str | None
    site: Site
    job_id: str
    step_index: int
    line: int
    column: int
    offset: int
    raw: str
    composed: bool
    malformed: bool = False

    @property
    def is_context(self) -> bool:
        return self.path is not None and not self.malformed

    @property
    def context(self) -> str | None:
        return self.path.split(".", 1)[0].split("[", 1)[0] if self.path else None


class NormalizedPath(NamedTuple):
    path: str
    composed: bool


# --------------------------------------------------------------------------
# YAML node handling
# --------------------------------------------------------------------------

_MERGE_TAG = "tag:yaml.org,2002:merge"


class _NodeView:
    """Plain-Python view of a YAML node tree that keeps key order and merge semantics."""

    def __init__(self) -> None:
        self._constructor = yaml.constructor.SafeConstructor()

    def scalar(self, node: ScalarNode) -> Any:
        return self._constructor.construct_object(node, deep=True)

    def items(self, node: MappingNode) -> list[tuple[str, Node, Node]]:
        """Return ``(key, key_node, value_node)`` with merge keys expanded, explicit keys winning."""
        explicit: list[tuple[str, Node, Node]] = []
        merged: list[tuple[str, Node, Node]] = []
        for key_node, value_node in node.value:
            if key_node.tag == _MERGE_TAG:
                sources = value_node.value if isinstance(value_node, SequenceNode) else [value_node]
                for src in sources:
                    if isinstance(src, MappingNode):
                        merged.extend(self.items(src))
                continue
            key = key_node.value if isinstance(key_node, ScalarNode) else str(key_node.value)
            explicit.append((key, key_node, value_node))
        seen = {k for k, _, _ in explicit}
        out = list(explicit)
        for key, key_node, value_node in merged:
            if key not in seen:
                seen.add(key)
                out.append((key, key_node, value_node))
        return out

    def to_python(self, node: Node, _depth: int = 0) -> Any:
        if _depth > 100:
            raise NotAWorkflow("YAML nesting too deep (recursive alias?)")
        if isinstance(node, ScalarNode):
            return self.scalar(node)
        if isinstance(node, SequenceNode):
            return [self.to_python(child, _depth + 1) for child in node.value]
        if isinstance(node, MappingNode):
            return {k: self.to_python(v, _depth + 1) for k, _, v in self.items(node)}
        raise NotAWorkflow(f"unsupported YAML node {node!r}")


def _line_of(source: str, offset: int) -> int:
    return source.count("\n", 0, offset) + 1


def _as_str_map(value: Any, what: str, line: int) -> dict[str, str]:
    if value is None:
        return {}
    if not isinstance(value, dict):
        # `env: ${{ fromJSON(...) }}` is legal; keep it as a single opaque entry.
        if isinstance(value, str):
            return {"": value}
        raise NotAWorkflow(f"line {line}: {what} must be a mapping")
    return {str(k): _scalar_text(v) for k, v in value.items()}


def _scalar_text(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def _as_str_list(value: Any) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, list):
        return tuple(_scalar_text(v) for v in value)
    return (_scalar_text(value),)


# --------------------------------------------------------------------------
# Parsing
# --------------------------------------------------------------------------


def parse_triggers(on_value: Any) -> tuple[TriggerEvent, ...]:
    """Normalize the scalar, list and mapping spellings of ``on:`` to one event list."""
    if isinstance(on_value, str):
        names: list[tuple[str, Any]] = [(on_value, None)]
    elif isinstance(on_value, list):
        names = [(_scalar_text(v), None) for v in on_value]
    elif isinstance(on_value, dict):
        names = [(str(k), v) for k, v in on_value.items()]
    else:
        raise NotAWorkflow(f"unsupported `on` value {on_value!r}")

    events = []
    for name, config in names:
        event_name = name.strip().lower()
        if not event_name:
            raise NotAWorkflow("empty event name in `on`")
        types: tuple[str, ...] = ()
        filters: dict[str, tuple[str, ...]] = {}
        if isinstance(config, dict):
            types = tuple(t.lower() for t in _as_str_list(config.get("types")))
            filters = {k: _as_str_list(v) for k, v in config.items() if k in FILTER_KEYS}
        elif isinstance(config, list) and event_name == "schedule":
            filters = {
                "cron": tuple(_scalar_text(e.get("cron")) for e in config if isinstance(e, dict))
            }
        events.append(TriggerEvent(event_name, types, filters))
    if not events:
        raise NotAWorkflow("`on` declares no events")
    return tuple(events)


def _load_root(source: str) -> MappingNode:
    try:
        documents = list(yaml.compose_all(source, Loader=yaml.SafeLoader))
    except yaml.YAMLError as exc:
        raise MalformedYaml(str(exc)) from exc
    documents = [d for d in documents if d is not None]
    if not documents:
        raise NotAWorkflow("empty document")
    if len(documents) > 1:
        raise NotAWorkflow("multiple YAML documents in one workflow file")
    root = documents[0]
    if not isinstance(root, MappingNode):
        raise NotAWorkflow("top level is not a mapping")
    return root


def _parse_step(view: _NodeView, node: Node, index: int, source: str) -> StepModel:
    line = _line_of(source, node.start_mark.index)
    if not isinstance(node, MappingNode):
        raise NotAWorkflow(f"line {line}: step is not a mapping")
    entries = {k: (kn, vn) for k, kn, vn in view.items(node)}
    data = {k: view.to_python(vn) for k, (_, vn) in entries.items()}
    if "run" in data and "uses" in data:
        raise NotAWorkflow(f"line {line}: step has both `run` and `uses`")
    uses = None
    uses_line = 0
    if "uses" in data:
        uses = ActionRef.parse(_scalar_text(data["uses"]))
        uses_line = _line_of(source, entries["uses"][1].start_mark.index)
    return StepModel(
        index=index,
        line=line,
        display_name=_scalar_text(data["name"]) if data.get("name") is not None else None,
        step_id=_scalar_text(data["id"]) if data.get("id") is not None else None,
        run_script=_scalar_text(data["run"]) if "run" in data else None,
        uses=uses,
        uses_line=uses_line,
        env=_as_str_map(data.get("env"), "step env", line),
        with_inputs=_as_str_map(data.get("with"), "step with", line),
        conditional=_scalar_text(data["if"]) if data.get("if") is not None else None,
    )


def _parse_job(view: _NodeView, job_id: str, key_node: Node, node: Node, source: str) -> JobModel:
    line = _line_of(source, key_node.start_mark.index)
    if not isinstance(node, MappingNode):
        raise NotAWorkflow(f"line {line}: job {job_id!r} is not a mapping")
    entries = {k: (kn, vn) for k, kn, vn in view.items(node)}
    steps: list[StepModel] = []
    if "steps" in entries:
        steps_node = entries["steps"][1]
        if isinstance(steps_node, SequenceNode):
            steps = [
                _parse_step(view, child, i, source) for i, child in enumerate(steps_node.value, start=1)
            ]
        elif not (isinstance(steps_node, ScalarNode) and steps_node.value in ("", "~", "null")):
            raise NotAWorkflow(f"line {line}: steps of job {job_id!r} is not a list")
    reusable = None
    uses_line = 0
    if "uses" in entries:
        reusable = ActionRef.parse(_scalar_text(view.to_python(entries["uses"][1])))
        uses_line = _line_of(source, entries["uses"][1].start_mark.index)
    if bool(steps) == (reusable is not None):
        raise NotAWorkflow(f"line {line}: job {job_id!r} needs either steps or a reusable workflow")
    permissions = None
    if "permissions" in entries:
        pkey, pnode = entries["permissions"]
        permissions = PermissionDecl.from_value(
            view.to_python(pnode), _line_of(source, pkey.start_mark.index)
        )
    name = view.to_python(entries["name"][1]) if "name" in entries else None
    cond = view.to_python(entries["if"][1]) if "if" in entries else None
    return JobModel(
        job_id=job_id,
        line=line,
        display_name=_scalar_text(name) if name is not None else None,
        permissions=permissions,
        env=_as_str_map(view.to_python(entries["env"][1]) if "env" in entries else None, "job env", line),
        steps=tuple(steps),
        reusable_workflow=reusable,
        uses_line=uses_line,
        conditional=_scalar_text(cond) if cond is not None else None,
    )


def parse_workflow(source: str, source_path: str = "<workflow>") -> WorkflowModel:
    """Parse one workflow file.

    Raises MalformedYaml for text that is not YAML, NotAWorkflow when the
    document lacks ``on``/``jobs`` (or is structurally invalid) and EmptyJobs
    when the jobs mapping is empty.
    """
    try:
        return _parse(source, source_path)
    except (yaml.YAMLError, ValueError, TypeError, RecursionError) as exc:
        raise MalformedYaml(f"{type(exc).__name__}: {exc}") from exc


def _parse(source: str, source_path: str) -> WorkflowModel:
    root = _load_root(source)
    view = _NodeView()
    entries = {k: (kn, vn) for k, kn, vn in view.items(root)}
    # `on` is a YAML 1.1 boolean; keys are taken verbatim so it survives, but
    # a quoted "true" written by a converter is accepted too.
    on_key = next((k for k in ("on", "true", "True") if k in entries), None)
    if on_key is None or "jobs" not in entries:
        raise NotAWorkflow("workflow needs both `on` and `jobs`")
    triggers = parse_triggers(view.to_python(entries[on_key][1]))

    jobs_node = entries["jobs"][1]
    if isinstance(jobs_node, ScalarNode) and jobs_node.value in ("", "~", "null"):
        raise EmptyJobs("jobs is empty")
    if not isinstance(jobs_node, MappingNode):
        raise NotAWorkflow("jobs is not a mapping")
    job_items = view.items(jobs_node)
    if not job_items:
        raise EmptyJobs("jobs is empty")
    jobs = {
        job_id: _parse_job(view, job_id, key_node, value_node, source)
        for job_id, key_node, value_node in job_items
    }

    permissions = None
    if "permissions" in entries:
        pkey, pnode = entries["permissions"]
        permissions = PermissionDecl.from_value(
            view.to_python(pnode), _line_of(source, pkey.start_mark.index)
        )
    name = view.to_python(entries["name"][1]) if "name" in entries else None
    env = view.to_python(entries["env"][1]) if "env" in entries else None
    raw_lines = tuple(line.rstrip("\r") for line in source.split("\n"))
    return WorkflowModel(
        source_path=source_path,
        triggers=triggers,
        jobs=jobs,
        raw_lines=raw_lines,
        source=source,
        name=_scalar_text(name) if name is not None else None,
        permissions=permissions,
        env=_as_str_map(env, "workflow env", 1),
        root_node=root,
    )


# --------------------------------------------------------------------------
# Expressions
# --------------------------------------------------------------------------

_EXPR_TOKEN = re.compile(
    r"""
      (?P<string>'(?:[^']|'')*')
    | (?P<path>[A-Za-z_][\w-]*(?:\s*(?:\.\s*(?:[A-Za-z_][\w-]*|\*)|\[[^\]]*\]))*)
    | (?P<number>[-+]?(?:0x[0-9a-fA-F]+|\d+(?:\.\d+)?(?:[eE][-+]?\d+)?))
    | (?P<op>==|!=|<=|>=|&&|\|\||[!<>(),])
    | (?P<space>\s+)
    """,
    re.VERBOSE,
)
_LITERALS = frozenset({"true", "false", "null", "nan", "infinity"})
_CASE_INSENSITIVE_ROOTS = frozenset({"github", "runner", "job", "jobs", "strategy"})
_SEGMENT_RE = re.compile(r"\.\s*([A-Za-z_][\w-]*|\*)|\[([^\]]*)\]")
_PURE_PATH_RE = re.compile(r"^[A-Za-z_][\w-]*(?:\.(?:[A-Za-z_][\w-]*|\*)|\[[^\]]*\])*$")


def _canonical_path(text: str) -> str:
    head = re.match(r"[A-Za-z_][\w-]*", text)
    assert head is not None
    root = head.group(0).lower()
    parts = [root]
    for match in _SEGMENT_RE.finditer(text, head.end()):
        name, index = match.groups()
        if name is not None:
            parts.append("[*]" if name == "*" else "." + name)
            continue
        index = index.strip()
        if len(index) >= 2 and index[0] == index[-1] == "'":
            parts.append("." + index[1:-1].replace("''", "'"))
        else:
            parts.append("[*]")
    path = "".join(parts)
    if root in _CASE_INSENSITIVE_ROOTS:
        path = path.lower()
    return path


def normalize_context_path(raw_expression: str) -> NormalizedPath:
    """Reduce a template interior to the dotted path of its first context reference.

    ``composed`` is true when the interior is anything more than a bare path:
    a function call, an operator expression, or several references.
    """
    text = raw_expression.strip()
    if _PURE_PATH_RE.match(text) and text.lower() not in _LITERALS:
        return NormalizedPath(_canonical_path(text), False)

    paths: list[str] = []
    pos = 0
    tokens = list(_EXPR_TOKEN.finditer(text))
    for i, tok in enumerate(tokens):
        if tok.start() != pos:
            break  # untokenizable remainder; keep what was found so far
        pos = tok.end()
        if tok.lastgroup != "path":
            continue
        nxt = next((t for t in tokens[i + 1 :] if t.lastgroup != "space"), None)
        if nxt is not None and nxt.group(0) == "(":
            continue  # function name
        if tok.group(0).lower() in _LITERALS:
            continue
        paths.append(_canonical_path(tok.group(0)))
    if not paths:
        raise NotAContextPath(raw_expression)
    return NormalizedPath(paths[0], True)


def _site_for(path: tuple[Any, ...]) -> tuple[Site, str, int]:
    """Classify a key path from the document root into (site, job_id, step_index)."""
    if len(path) >= 2 and path[0] == "jobs":
        job_id = str(path[1])
        rest = path[2:]
        if len(rest) >= 2 and rest[0] == "steps" and isinstance(rest[1], int):
            step_index = rest[1] + 1
            key = rest[2] if len(rest) > 2 else None
            site = {
                "run": Site.RUN_SCRIPT,
                "env": Site.ENV_VALUE,
                "with": Site.WITH_INPUT,
                "if": Site.CONDITIONAL,
            }.get(key, Site.OTHER)
            return site, job_id, step_index
        key = rest[0] if rest else None
        if key == "if":
            return Site.CONDITIONAL, job_id, 0
        if key in ("with", "secrets"):
            return Site.WITH_INPUT, job_id, 0
        if "env" in rest:
            return Site.ENV_VALUE, job_id, 0
        return Site.OTHER, job_id, 0
    if path and path[0] == "env":
        return Site.ENV_VALUE, "", 0
    return Site.OTHER, "", 0


def _iter_scalars(
    view: _NodeView, node: Node, path: tuple[Any, ...], depth: int = 0
) -> Iterator[tuple[tuple[Any, ...], ScalarNode]]:
    if depth > 100:
        return
    if isinstance(node, ScalarNode):
        yield path, node
    elif isinstance(node, SequenceNode):
        for i, child in enumerate(node.value):
            yield from _iter_scalars(view, child, path + (i,), depth + 1)
    elif isinstance(node, MappingNode):
        for key, _, child in view.items(node):
            yield from _iter_scalars(view, child, path + (key,), depth + 1)


_SEPARATORS = frozenset(" \t\r\n\"'")


def find_templates(text: str, start: int = 0, end: int | None = None) -> list[tuple[int, int | None]]:
    """Locate ``${{ ... }}`` spans as ``(open, close)`` offsets; close is None when unterminated."""
    end = len(text) if end is None else end
    spans: list[tuple[int, int | None]] = []
    pos = start
    while True:
        open_at = text.find("${{", pos, end)
        if open_at < 0:
            return spans
        close_at = text.find("}}", open_at + 3, end)
        if close_at < 0:
            spans.append((open_at, None))
            return spans
        spans.append((open_at, close_at + 2))
        pos = close_at + 2


def extract_expressions(model: WorkflowModel) -> list[ExpressionOccurrence]:
    """Return every template occurrence in the workflow, ordered by (job, step, line, column)."""
    if model.root_node is None:
        return []
    view = _NodeView()
    source = model.source
    job_order = model.job_order
    found: list[ExpressionOccurrence] = []
    for path, node in _iter_scalars(view, model.root_node, ()):
        span_start, span_end = node.start_mark.index, node.end_mark.index
        site, job_id, step_index = _site_for(path)
        for open_at, close_at in find_templates(source, span_start, span_end):
            line = _line_of(source, open_at)
            column = open_at - (source.rfind("\n", 0, open_at) + 1) + 1
            if close_at is None:
                found.append(
                    ExpressionOccurrence(
                        None, Site.OTHER, job_id, step_index, line, column, open_at,
                        source[open_at:span_end], False, malformed=True,
                    )
                )
                continue
            raw = source[open_at:close_at]
            if site in (Site.ENV_VALUE, Site.WITH_INPUT):
                # The whole value is the datum: any extra text derives new data.
                adjacent = node.value.strip() != raw
            else:
                before = source[open_at - 1] if open_at > span_start else " "
                after = source[close_at] if close_at < span_end else " "
                adjacent = before not in _SEPARATORS or after not in _SEPARATORS
            try:
                normalized = normalize_context_path(raw[3:-2])
                expr_path, composed = normalized.path, normalized.composed or adjacent
            except NotAContextPath:
                expr_path, composed = None, adjacent
            found.append(
                ExpressionOccurrence(
                    expr_path, site, job_id, step_index, line, column, open_at, raw, composed
                )
            )
    found.sort(key=lambda o: (job_order.get(o.job_id, -1), o.step_index, o.line, o.column))
    return found
