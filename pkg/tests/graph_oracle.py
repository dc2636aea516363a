"""Set-union reference for dependency graphs over an in-memory registry table."""

from __future__ import annotations


def expected_graph(table: dict, roots: list[str], root: str, max_depth: int):
    """(nodes, edges, depth) by plain breadth-first search over packages.

    ``root`` and repositories are ``owner/name`` strings here.
    """
    repo = {p: entry["repository"] for p, entry in table.items()}
    dist: dict[str, int] = {}
    edges: set[tuple[str, str]] = set()
    layer = [(root, p) for p in roots]
    d = 1
    while layer and d <= max_depth:
        fresh = []
        for source, p in layer:
            if repo.get(p) and repo[p] != source:
                edges.add((source, repo[p]))
            if p not in dist:
                dist[p] = d
                fresh.append(p)
        layer = []
        if d < max_depth:
            for p in fresh:
                if repo.get(p):
                    layer.extend((repo[p], c) for c in table[p]["requires"])
        d += 1
    depth = {root: 0}
    for p, dp in sorted(dist.items(), key=lambda kv: kv[1]):
        if repo.get(p):
            depth.setdefault(repo[p], dp)
    return set(depth), edges, depth
