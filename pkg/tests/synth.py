"""Random workflow and dependency fixtures with known issue counts."""

from __future__ import annotations

import random
from dataclasses import dataclass

from wfaudit.fixtures import fake_sha
from wfaudit.forge import LatestVersion

EVENTS = ["push", "pull_request", "issues", "issue_comment", "schedule", "workflow_dispatch",
          "fork", "watch", "release", "discussion"]

_SNIPPETS = {
    "CI_ACTOR": "      - run: echo ${{ github.actor }}\n",
    "CI_ISSUE_TITLE": "      - run: echo \"${{ github.event.issue.title }}\"\n",
    "SECRET_OUTSIDE_ENV": "      - run: deploy --token ${{ secrets.TOKEN }}\n",
    "UNPINNED_WF": "      - uses: actions/checkout@v4\n",
}


class UpToDateResolver:
    """Every ref resolves to the latest commit, so only pinning is judged."""

    def latest_version(self, repository: str) -> LatestVersion:
        return LatestVersion("v4", fake_sha(repository), None)

    def resolve_ref(self, repository: str, ref) -> str:
        return fake_sha(repository)


@dataclass
class SynthWorkflow:
    source: str
    triggers: int
    site_issues: int


def random_workflow(rng: random.Random) -> SynthWorkflow:
    k = rng.randint(1, 4)
    events = rng.sample(EVENTS, k)
    jobs = rng.randint(1, 3)
    m = 0
    body = []
    all_scoped = rng.random() < 0.5
    for j in range(jobs):
        body.append(f"  job{j}:\n    runs-on: ubuntu-latest\n")
        if all_scoped:
            body.append("    permissions:\n      contents: read\n")
        body.append("    steps:\n      - run: make\n")
        for _ in range(rng.randint(0, 4)):
            body.append(_SNIPPETS[rng.choice(sorted(_SNIPPETS))])
            m += 1
    if not all_scoped:
        m += 1  # one default-permissions finding per workflow
    source = "on: [" + ", ".join(events) + "]\njobs:\n" + "".join(body)
    return SynthWorkflow(source, k, m)


@dataclass
class SynthRegistry:
    table: dict
    roots: list[str]


def random_registry(rng: random.Random, size: int | None = None) -> SynthRegistry:
    """Packages ``p0..pn`` with random (possibly cyclic) dependencies and shared repositories."""
    n = size or rng.randint(2, 25)
    repos = [f"org{rng.randint(0, n)}/repo{i}" for i in range(n)]
    table = {}
    for i in range(n):
        deps = rng.sample(range(n), rng.randint(0, min(4, n)))
        repository = rng.choice(repos) if rng.random() < 0.9 else None
        table[f"p{i}"] = {"repository": repository, "requires": [f"p{d}" for d in deps]}
    roots = [f"p{i}" for i in rng.sample(range(n), rng.randint(1, min(3, n)))]
    return SynthRegistry(table, roots)
