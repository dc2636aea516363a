"""End-to-end scan: build the repository graph, harvest workflows, run checks, assemble a report."""

from __future__ import annotations

import enum
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .checks import run_all_checks
from .controllability import ControllabilityTable, load_controllability_table
from .errors import ConfigError, ForgeError, ResolverUnavailable, WorkflowError
from .exploitability import EventScoreTable, load_score_table
from .forge import WORKFLOW_DIR, ForgeClient, ForgeConfig, Mode
from .report import ScanReport, WorkflowResult, assemble_report
from .ssc_graph import (
    DEFAULT_MAX_DEPTH,
    PackageResolver,
    PyPIResolver,
    RepoNode,
    SscGraph,
    build_graph,
    graph_from_repo_list,
    read_repo_list,
    unique_repositories,
)
from .workflow_model import parse_workflow

logger = logging.getLogger(__name__)


class InputMode(enum.Enum):
    PROJECT = "project"
    REPOS = "repos"
    WORKFLOWS = "workflows"


@dataclass
class ScanConfig:
    input_path: Path
    mode: InputMode = InputMode.WORKFLOWS
    forge: ForgeConfig = field(default_factory=ForgeConfig.from_env)
    max_depth: int = DEFAULT_MAX_DEPTH
    score_table_path: Path | None = None
    controllability_table_path: Path | None = None
    output: Path | None = None
    output_format: str = "json"
    parallelism: int = field(default_factory=lambda: os.cpu_count() or 1)
    timestamp: bool = True

    def validate(self) -> None:
        if not Path(self.input_path).exists():
            raise ConfigError(f"input path does not exist: {self.input_path}")
        if self.mode is InputMode.REPOS and not Path(self.input_path).is_file():
            raise ConfigError("--mode repos expects a file listing repositories")
        if self.mode is not InputMode.REPOS and not Path(self.input_path).is_dir():
            raise ConfigError(f"--mode {self.mode.value} expects a directory")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be at least 1")
        if self.max_depth < 0:
            raise ConfigError("max depth must be non-negative")
        if self.output_format not in ("json", "text"):
            raise ConfigError(f"unknown format {self.output_format!r}")
        if self.forge.mode is Mode.RECORDED and self.forge.fixtures_dir is None:
            raise ConfigError("recorded mode needs a fixtures directory")

    @property
    def workers(self) -> int:
        return max(1, min(self.parallelism, self.forge.max_in_flight))


def _local_workflows(directory: Path, recursive: bool) -> list[tuple[str, str]]:
    if not directory.is_dir():
        return []
    pattern = "**/*" if recursive else "*"
    files = sorted(
        p for p in directory.glob(pattern) if p.is_file() and p.suffix in (".yml", ".yaml")
    )
    base = directory if recursive else directory.parent.parent
    return [(p.relative_to(base).as_posix(), p.read_text(encoding="utf-8")) for p in files]


@dataclass
class _Analyzer:
    controllability: ControllabilityTable
    score_table: EventScoreTable
    resolver: ForgeClient | None

    def analyze(self, key: str, source: str) -> WorkflowResult:
        model = parse_workflow(source, key)
        findings = run_all_checks(model, self.controllability, self.resolver, self.score_table)
        return WorkflowResult.from_model(key, model, findings, self.score_table)


def _scan_files(analyzer: _Analyzer, repo_slug: str, files: list[tuple[str, str]],
                results: list[WorkflowResult], errors: dict[str, str]) -> list[str]:
    keys = []
    for path, source in files:
        key = f"{repo_slug}:{path}"
        keys.append(path)
        try:
            results.append(analyzer.analyze(key, source))
        except WorkflowError as exc:
            errors[key] = f"{type(exc).__name__}: {exc}"
    return keys


def harvest(node: RepoNode, client: ForgeClient | None) -> list[tuple[str, str]]:
    """Workflow files of one repository: local checkout for the root, forge API otherwise."""
    if node.local_path is not None:
        return _local_workflows(Path(node.local_path) / WORKFLOW_DIR, recursive=False)
    if client is None:
        raise ResolverUnavailable("no forge client configured")
    if node.identity.host != "github.com":
        raise ForgeError(f"unsupported host {node.identity.host}")
    return client.list_workflows(node.identity.slug)


def scan(
    config: ScanConfig,
    *,
    client: ForgeClient | None = None,
    package_resolver: PackageResolver | None = None,
) -> ScanReport:
    """Run the pipeline; per-repository failures land in ``report.errors``."""
    config.validate()
    score_table = load_score_table(config.score_table_path)
    controllability = load_controllability_table(config.controllability_table_path)
    input_path = Path(config.input_path)

    if config.mode is InputMode.WORKFLOWS:
        # Offline: version checks only run against recorded fixtures.
        if client is None and config.forge.mode is Mode.RECORDED:
            client = ForgeClient(config.forge)
        analyzer = _Analyzer(controllability, score_table, client)
        results: list[WorkflowResult] = []
        errors: dict[str, str] = {}
        _scan_files(analyzer, f"local/{input_path.resolve().name}",
                    _local_workflows(input_path, recursive=True), results, errors)
        return assemble_report(None, results, errors=errors, timestamp=_now(config))

    if client is None:
        client = ForgeClient(config.forge)
    graph: SscGraph
    if config.mode is InputMode.PROJECT:
        resolver = package_resolver or PyPIResolver(config.forge)
        graph = build_graph(input_path, resolver, config.max_depth, parallelism=config.workers)
    else:
        graph = graph_from_repo_list(read_repo_list(input_path))

    analyzer = _Analyzer(controllability, score_table, client)

    def fetch(node: RepoNode):
        try:
            return node, harvest(node, client), None
        except (ForgeError, ResolverUnavailable) as exc:
            return node, [], exc

    results = []
    errors = {}
    nodes = unique_repositories(graph)
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        fetched = list(pool.map(fetch, nodes))
    for node, files, error in fetched:
        if error is not None:
            errors[node.identity.slug] = f"{type(error).__name__}: {error}"
            continue
        node.workflow_refs = _scan_files(analyzer, node.identity.slug, files, results, errors)
    for warning in graph.warnings:
        logger.warning(warning)
    return assemble_report(graph, results, errors=errors, timestamp=_now(config))


def _now(config: ScanConfig) -> str | None:
    if not config.timestamp:
        return None
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()
