"""Supply-chain graph of code repositories, built from Python dependency manifests."""

from __future__ import annotations

import configparser
import enum
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol

import tomli
from packaging.requirements import InvalidRequirement, Requirement
from packaging.utils import canonicalize_name

from .errors import ForgeError, NoManifestFound, ResolverUnavailable
from .forge import ForgeConfig, JsonFetcher

logger = logging.getLogger(__name__)

DEFAULT_MAX_DEPTH = 2

_FORGE_URL_RE = re.compile(
    r"^(?:git\+)?(?:https?://|ssh://git@|git@)(?P<host>github\.com|gitlab\.com|bitbucket\.org)"
    r"[/:](?P<owner>[\w.-]+)/(?P<name>[\w.-]+?)(?:\.git)?(?:[/#?].*)?$",
    re.IGNORECASE,
)


@dataclass(frozen=True, order=True)
class RepoIdentity:
    host: str
    owner: str
    name: str

    def __str__(self) -> str:
        return f"{self.host}/{self.owner}/{self.name}"

    @property
    def slug(self) -> str:
        return f"{self.owner}/{self.name}"

    @classmethod
    def from_url(cls, url: str) -> "RepoIdentity | None":
        match = _FORGE_URL_RE.match(url.strip())
        if not match:
            return None
        return cls(match["host"].lower(), match["owner"].lower(), match["name"].lower())

    @classmethod
    def parse(cls, text: str) -> "RepoIdentity":
        """``owner/name``, ``host/owner/name`` or a forge URL."""
        text = text.strip()
        from_url = cls.from_url(text)
        if from_url is not None:
            return from_url
        parts = [p for p in text.split("/") if p]
        if len(parts) == 2:
            return cls("github.com", parts[0].lower(), parts[1].lower())
        if len(parts) == 3:
            return cls(parts[0].lower(), parts[1].lower(), parts[2].lower())
        raise ValueError(f"not a repository identity: {text!r}")


class Discovery(enum.Enum):
    ROOT = "root"
    DEPENDENCY = "dependency"
    EXPLICIT = "explicit"


@dataclass
class RepoNode:
    identity: RepoIdentity
    discovered_via: Discovery
    parent: RepoIdentity | None = None
    package: str | None = None
    depth: int = 0
    local_path: Path | None = None
    workflow_refs: list[str] = field(default_factory=list)


@dataclass
class SscGraph:
    root: RepoNode
    nodes: dict[RepoIdentity, RepoNode]
    edges: set[tuple[RepoIdentity, RepoIdentity]] = field(default_factory=set)
    unresolved: set[str] = field(default_factory=set)
    warnings: list[str] = field(default_factory=list)
    partial: bool = False


class PackageResolver(Protocol):
    def repository_for(self, package: str) -> RepoIdentity | None: ...

    def dependencies_of(self, package: str) -> list[str]: ...


class MappingResolver:
    """Resolver over an in-memory ``{package: {"repository": ..., "requires": [...]}}`` table."""

    def __init__(self, table: Mapping[str, Mapping[str, Any]]):
        self._table = {canonicalize_name(k): v for k, v in table.items()}

    def repository_for(self, package: str) -> RepoIdentity | None:
        entry = self._table.get(canonicalize_name(package))
        if not entry or not entry.get("repository"):
            return None
        return RepoIdentity.parse(entry["repository"])

    def dependencies_of(self, package: str) -> list[str]:
        entry = self._table.get(canonicalize_name(package)) or {}
        return [str(canonicalize_name(p)) for p in entry.get("requires", ())]


_URL_KEY_PRIORITY = ("source", "repository", "code", "github", "homepage", "home")


class PyPIResolver:
    """Package-to-repository mapping from PyPI JSON metadata (live or recorded)."""

    def __init__(self, config: ForgeConfig | None = None, *, base_url: str = "https://pypi.org",
                 transport=None):
        self.http = JsonFetcher(base_url, "pypi", config or ForgeConfig(), transport=transport)

    def _info(self, package: str) -> dict[str, Any] | None:
        try:
            response = self.http.get(f"pypi/{canonicalize_name(package)}/json")
        except ForgeError as exc:
            raise ResolverUnavailable(f"registry lookup for {package}: {exc}") from exc
        if response.status == 404:
            return None
        if response.status != 200:
            raise ResolverUnavailable(f"registry lookup for {package}: HTTP {response.status}")
        return response.body.get("info") or {}

    def repository_for(self, package: str) -> RepoIdentity | None:
        info = self._info(package)
        if info is None:
            return None
        urls = dict(info.get("project_urls") or {})
        if info.get("home_page"):
            urls.setdefault("Home", info["home_page"])

        def rank(item: tuple[str, str]) -> int:
            key = item[0].lower()
            return next((i for i, k in enumerate(_URL_KEY_PRIORITY) if k in key),
                        len(_URL_KEY_PRIORITY))

        for _, url in sorted(urls.items(), key=rank):
            identity = RepoIdentity.from_url(str(url))
            if identity is not None:
                return identity
        return None

    def dependencies_of(self, package: str) -> list[str]:
        info = self._info(package)
        if not info:
            return []
        return _requirement_names(info.get("requires_dist") or (), skip_extras=True)


def _requirement_names(lines: Iterable[str], skip_extras: bool = False) -> list[str]:
    names: list[str] = []
    for line in lines:
        try:
            req = Requirement(line)
        except InvalidRequirement:
            logger.debug("skipping unparsable requirement %r", line)
            continue
        if skip_extras and req.marker is not None and "extra" in str(req.marker):
            continue
        name = str(canonicalize_name(req.name))
        if name not in names:
            names.append(name)
    return names


def _read_requirements(path: Path, seen: set[Path]) -> list[str]:
    path = path.resolve()
    if path in seen or not path.is_file():
        return []
    seen.add(path)
    lines: list[str] = []
    for raw in path.read_text(encoding="utf-8", errors="replace").splitlines():
        line = raw.split(" #", 1)[0].strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith(("-r ", "--requirement ")):
            include = line.split(None, 1)[1].strip()
            lines.extend(_read_requirements(path.parent / include, seen))
            continue
        if line.startswith("-") or "://" in line.split(";")[0] and "@" not in line:
            continue
        lines.append(line)
    return lines


def _load_toml(path: Path) -> dict[str, Any] | None:
    if not path.is_file():
        return None
    try:
        return tomli.loads(path.read_text(encoding="utf-8"))
    except tomli.TOMLDecodeError as exc:
        logger.warning("ignoring unparsable %s: %s", path, exc)
        return None


def read_manifests(project_dir: str | Path) -> tuple[list[str], list[Path]]:
    """Dependency names declared by ``project_dir`` and the manifest files read."""
    project_dir = Path(project_dir)
    lines: list[str] = []
    found: list[Path] = []
    seen: set[Path] = set()
    for req_file in sorted(project_dir.glob("requirements*.txt")):
        found.append(req_file)
        lines.extend(_read_requirements(req_file, seen))

    pyproject = project_dir / "pyproject.toml"
    data = _load_toml(pyproject)
    if data is not None:
        found.append(pyproject)
        lines.extend(data.get("project", {}).get("dependencies", []) or [])
        poetry = data.get("tool", {}).get("poetry", {}).get("dependencies", {}) or {}
        lines.extend(name for name in poetry if name.lower() != "python")

    setup_cfg = project_dir / "setup.cfg"
    if setup_cfg.is_file():
        parser = configparser.ConfigParser()
        parser.read(setup_cfg, encoding="utf-8")
        if parser.has_option("options", "install_requires"):
            found.append(setup_cfg)
            lines.extend(
                l.strip() for l in parser.get("options", "install_requires").splitlines() if l.strip()
            )
    return _requirement_names(lines), found


def root_identity(project_dir: str | Path) -> RepoIdentity:
    """Identity of the project under test: pyproject URLs, then git remote, then the directory name."""
    project_dir = Path(project_dir)
    data = _load_toml(project_dir / "pyproject.toml")
    if data is not None:
        urls = data.get("project", {}).get("urls", {})
        for url in (urls or {}).values():
            identity = RepoIdentity.from_url(str(url))
            if identity is not None:
                return identity
    git_config = project_dir / ".git" / "config"
    if git_config.is_file():
        for line in git_config.read_text(encoding="utf-8", errors="replace").splitlines():
            key, _, value = line.partition("=")
            if key.strip() == "url":
                identity = RepoIdentity.from_url(value.strip())
                if identity is not None:
                    return identity
    return RepoIdentity("local", "local", project_dir.resolve().name.lower())


def _resolve_all(resolver: PackageResolver, packages: list[str],
                 parallelism: int) -> list[tuple[str, RepoIdentity | None, Exception | None]]:
    def one(pkg: str):
        try:
            return pkg, resolver.repository_for(pkg), None
        except ResolverUnavailable as exc:
            return pkg, None, exc

    if parallelism <= 1 or len(packages) <= 1:
        return [one(p) for p in packages]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(one, packages))


def build_graph(
    project_dir: str | Path,
    resolver: PackageResolver,
    max_depth: int = DEFAULT_MAX_DEPTH,
    *,
    parallelism: int = 1,
    root: RepoIdentity | None = None,
) -> SscGraph:
    """Breadth-first expansion from the project's manifests.

    Traversal runs over packages, each resolved and expanded at most once, so
    cycles terminate. A repository's depth is the fewest dependency hops from
    the project to any package it hosts; nothing deeper than ``max_depth`` is
    added. A project without manifests yields a root-only graph carrying a
    warning. Registry outages leave a partial graph with ``partial`` set.
    """
    project_dir = Path(project_dir)
    root_id = root or root_identity(project_dir)
    root_node = RepoNode(root_id, Discovery.ROOT, local_path=project_dir)
    graph = SscGraph(root_node, {root_id: root_node})

    root_deps, manifests = read_manifests(project_dir)
    if not manifests:
        warning = str(NoManifestFound(f"no supported manifest in {project_dir}"))
        logger.warning(warning)
        graph.warnings.append(warning)

    repo_of: dict[str, RepoIdentity | None] = {}
    # (repository that requires it, package name) pairs at the current depth
    layer = {(root_id, str(canonicalize_name(p))) for p in root_deps}
    depth = 1
    while layer and depth <= max_depth:
        fresh = sorted({pkg for _, pkg in layer if pkg not in repo_of})
        for pkg, target, error in _resolve_all(resolver, fresh, parallelism):
            repo_of[pkg] = target
            if error is not None:
                graph.partial = True
                graph.warnings.append(str(error))
            elif target is None:
                graph.unresolved.add(pkg)
        for source, pkg in sorted(layer, key=lambda e: (e[0], e[1])):
            target = repo_of[pkg]
            if target is None or target == source:
                continue
            graph.edges.add((source, target))
            if target not in graph.nodes:
                graph.nodes[target] = RepoNode(target, Discovery.DEPENDENCY, parent=source,
                                               package=pkg, depth=depth)
        layer = set()
        if depth < max_depth:
            for pkg in fresh:
                target = repo_of[pkg]
                if target is None:
                    continue
                try:
                    children = resolver.dependencies_of(pkg)
                except ResolverUnavailable as exc:
                    graph.partial = True
                    graph.warnings.append(str(exc))
                    continue
                layer.update((target, str(canonicalize_name(c))) for c in children)
        depth += 1
    return graph


def graph_from_repo_list(identities: Iterable[str | RepoIdentity]) -> SscGraph:
    """Graph over an explicit repository list; the first entry serves as root."""
    nodes: dict[RepoIdentity, RepoNode] = {}
    for item in identities:
        identity = item if isinstance(item, RepoIdentity) else RepoIdentity.parse(item)
        nodes.setdefault(identity, RepoNode(identity, Discovery.EXPLICIT))
    if not nodes:
        raise ValueError("empty repository list")
    root = next(iter(nodes.values()))
    return SscGraph(root, nodes)


def read_repo_list(path: str | Path) -> list[RepoIdentity]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(RepoIdentity.parse(line))
    return out


def unique_repositories(graph: SscGraph) -> list[RepoNode]:
    return [graph.nodes[identity] for identity in sorted(graph.nodes)]
