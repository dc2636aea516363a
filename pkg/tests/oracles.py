"""Independent reference implementations used to check the production code."""

from __future__ import annotations


def brute_force_templates(text: str) -> list[tuple[int, int, str]]:
    """Every terminated ``${{ ... }}`` as (offset, 1-based line, raw text).

    Walks the text one character at a time with an explicit two-state
    machine; deliberately shares nothing with the production scanner.
    """
    out = []
    i = 0
    n = len(text)
    line = 1
    start = -1
    start_line = 0
    while i < n:
        if start < 0:
            if text[i] == "$" and i + 2 < n and text[i + 1] == "{" and text[i + 2] == "{":
                start, start_line = i, line
                i += 3
                continue
        else:
            if text[i] == "}" and i + 1 < n and text[i + 1] == "}":
                out.append((start, start_line, text[start : i + 2]))
                start = -1
                i += 2
                continue
        if text[i] == "\n":
            line += 1
        i += 1
    return out


def adjacency_composed(line_text: str, raw: str, occurrence: int = 0) -> bool:
    """True when the n-th copy of ``raw`` on a line touches a non-separator character."""
    pos = -1
    for _ in range(occurrence + 1):
        pos = line_text.index(raw, pos + 1)
    left = line_text[pos - 1] if pos > 0 else " "
    right = line_text[pos + len(raw)] if pos + len(raw) < len(line_text) else " "
    return not (left.isspace() or left in "\"'") or not (right.isspace() or right in "\"'")
