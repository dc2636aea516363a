"""Builders for recorded-mode fixture trees.

These write exactly the responses :class:`~wfaudit.forge.ForgeClient` and
:class:`~wfaudit.ssc_graph.PyPIResolver` ask for, so a hermetic scan can be
staged without hand-writing JSON.
"""

from __future__ import annotations

import base64
import hashlib
from pathlib import Path
from typing import Iterable, Mapping

from .forge import WORKFLOW_DIR, write_fixture


def fake_sha(*parts: str) -> str:
    """Deterministic 40-hex commit id for fixture data."""
    return hashlib.sha1("\0".join(parts).encode()).hexdigest()


def record_repo(
    root: str | Path,
    repository: str,
    *,
    workflows: Mapping[str, str] | None = None,
    releases: Iterable[str] = (),
    tags: Mapping[str, str] | None = None,
    branches: Mapping[str, str] | None = None,
    default_branch: str = "main",
) -> None:
    """Record a repository.

    ``workflows`` maps file names (under the workflow directory) to contents;
    ``None`` means the directory does not exist. ``releases`` lists release
    tags oldest first, the last one being the latest release. ``tags`` and
    ``branches`` map names to commit shas; release tags missing from ``tags``
    get a generated sha.
    """
    root = Path(root)
    owner, name = repository.split("/")[-2:]
    releases = list(releases)
    tags = dict(tags or {})
    branches = dict(branches or {})
    for tag in releases:
        tags.setdefault(tag, fake_sha(repository, "tag", tag))
    branches.setdefault(default_branch, fake_sha(repository, "branch", default_branch))

    base = f"repos/{owner}/{name}"
    write_fixture(root, "github", base, {"full_name": f"{owner}/{name}",
                                         "default_branch": default_branch})
    if workflows is None:
        write_fixture(root, "github", f"{base}/contents/{WORKFLOW_DIR}",
                      {"message": "Not Found"}, status=404)
    else:
        listing = []
        for filename in sorted(workflows):
            path = f"{WORKFLOW_DIR}/{filename}"
            listing.append({"name": filename, "path": path, "type": "file"})
            encoded = base64.b64encode(workflows[filename].encode("utf-8")).decode("ascii")
            write_fixture(root, "github", f"{base}/contents/{path}",
                          {"path": path, "encoding": "base64", "content": encoded})
        write_fixture(root, "github", f"{base}/contents/{WORKFLOW_DIR}", listing)

    if releases:
        latest = releases[-1]
        write_fixture(root, "github", f"{base}/releases/latest",
                      {"tag_name": latest, "published_at": "2022-07-01T00:00:00Z"})
    else:
        write_fixture(root, "github", f"{base}/releases/latest", {"message": "Not Found"},
                      status=404)
    write_fixture(root, "github", f"{base}/tags",
                  [{"name": t, "commit": {"sha": s}} for t, s in tags.items()],
                  params={"per_page": 100})
    for ref, sha in {**branches, **tags}.items():
        write_fixture(root, "github", f"{base}/commits/{ref}", {"sha": sha})


def record_missing_repo(root: str | Path, repository: str) -> None:
    owner, name = repository.split("/")[-2:]
    write_fixture(Path(root), "github", f"repos/{owner}/{name}", {"message": "Not Found"},
                  status=404)


def record_package(
    root: str | Path,
    package: str,
    *,
    repository: str | None,
    requires: Iterable[str] = (),
) -> None:
    """Record registry metadata for ``package``; ``repository`` is ``owner/name`` or None."""
    urls = {"Source": f"https://github.com/{repository}"} if repository else {}
    write_fixture(
        Path(root),
        "pypi",
        f"pypi/{package}/json",
        {"info": {"name": package, "project_urls": urls, "home_page": "",
                  "requires_dist": list(requires) or None}},
    )
