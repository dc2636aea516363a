"""The committed corpus must match what the generator produces."""

from __future__ import annotations

import importlib.util

from conftest import CORPUS, FIXTURES, FORGE


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_generator_has_not_drifted(tmp_path, monkeypatch):
    loader = importlib.util.spec_from_file_location("generate_corpus", FIXTURES / "generate_corpus.py")
    gen = importlib.util.module_from_spec(loader)
    loader.loader.exec_module(gen)
    (tmp_path / "workflows").mkdir()
    monkeypatch.setattr(gen, "HERE", tmp_path)
    monkeypatch.setattr(gen, "CORPUS", tmp_path / "corpus")
    monkeypatch.setattr(gen, "FORGE", tmp_path / "forge")
    gen.main()
    assert _tree(tmp_path / "corpus") == _tree(CORPUS)
    assert _tree(tmp_path / "forge") == _tree(FORGE)
    assert (tmp_path / "workflows" / "work_test.yml").read_bytes() == \
        (FIXTURES / "workflows" / "work_test.yml").read_bytes()


def test_corpus_shape(corpus_manifest):
    seeded = {n: e for n, e in corpus_manifest.items() if "twin" in e}
    assert len(corpus_manifest) >= 60
    per_code: dict[str, int] = {}
    for entry in seeded.values():
        for code in entry["expected"]:
            per_code[code] = per_code.get(code, 0) + 1
        assert corpus_manifest[entry["twin"]]["expected"] == {}
    assert all(n >= 6 for n in per_code.values()), per_code
    for code in ("SECRET_OUTSIDE_ENV", "SECRET_DERIVED", "OUTDATED_WF", "UNPINNED_WF",
                 "MISCONF_PERM_GLOBAL", "MISCONF_PERM_DEFAULT"):
        assert per_code.get(code, 0) >= 6, code
