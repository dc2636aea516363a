from __future__ import annotations

import random

import pytest

from conftest import CORPUS, WORKFLOWS, read
from synth import UpToDateResolver, random_workflow
from wfaudit import checks
from wfaudit.checks import (
    Conditionality,
    Kind,
    check_injection,
    check_permissions,
    check_secrets,
    check_third_party,
    kind_of,
    run_all_checks,
)
from wfaudit.controllability import default_controllability_table
from wfaudit.errors import RefNotFound
from wfaudit.fixtures import fake_sha
from wfaudit.forge import LatestVersion
from wfaudit.workflow_model import parse_workflow

CI_CODES = {e.tag for e in default_controllability_table().entries.values() if e.tag}

MINIMAL = "on: push\njobs:\n  a:\n    runs-on: x\n    permissions: {}\n    steps:\n"


def wf(steps: str, head: str = MINIMAL):
    return parse_workflow(head + steps)


def codes(findings):
    return [f.code for f in findings]


def test_issue_title_injection(recorded_client):
    model = parse_workflow(read(WORKFLOWS / "issue_title_injection.yml"))
    (f,) = run_all_checks(model, resolver=recorded_client)
    assert (f.code, f.triggering_event, f.exploitability.level) == ("CI_ISSUE_TITLE", "issues", 3)
    assert f.conditionality is Conditionality.UNCONDITIONAL
    assert (f.job_name, f.step_name, f.step_position, f.issue_line.number) == (
        "check-title", "Print issue title", 1, 12)
    safe = parse_workflow(read(WORKFLOWS / "issue_title_via_env.yml"))
    assert run_all_checks(safe, resolver=recorded_client) == []


def test_pr_body_heredoc(recorded_client):
    model = parse_workflow(read(WORKFLOWS / "pr_body_heredoc.yml"))
    findings = run_all_checks(model, resolver=recorded_client)
    assert codes(findings) == ["MISCONF_PERM_DEFAULT", "OUTDATED_WF", "UNPINNED_WF", "CI_PR_BODY"]
    assert {f.triggering_event for f in findings} == {"pull_request"}
    assert {f.exploitability.level for f in findings} == {2}
    body = findings[-1]
    assert body.conditionality is Conditionality.UNCONDITIONAL
    assert body.issue_line.number == 18


def test_work_test_workflow(recorded_client):
    model = parse_workflow(read(WORKFLOWS / "work_test.yml"))
    findings = run_all_checks(model, resolver=recorded_client)
    got = [(f.code, f.job_name, f.step_position, f.issue_line.number) for f in findings]
    assert got == [
        ("MISCONF_PERM_GLOBAL", "job_A", 0, 3),
        ("OUTDATED_WF", "job_A", 1, 10),
        ("OUTDATED_WF", "job_A", 2, 12),
        ("OUTDATED_WF", "job_B", 1, 17),
        ("CI_ACTOR", "job_B", 2, 19),
    ]
    assert all(f.triggering_event == "issues" and f.exploitability.level == 3 for f in findings)


@pytest.mark.parametrize(
    "step, expected",
    [
        ('      - run: \'curl -H "Auth: ${{ secrets.TOKEN }}" x\'\n', ["SECRET_OUTSIDE_ENV"]),
        ('      - run: x\n        env:\n          TOKEN: "${{ secrets.TOKEN }}"\n', []),
        ('      - run: x\n        env:\n          URL: "https://x/${{ secrets.KEY }}/y"\n', ["SECRET_DERIVED"]),
        ('      - uses: o/a@' + "a" * 40 + '\n        with:\n          t: ${{ secrets.T }}\n', []),
        ('      - run: echo ${{ format(\'{0}\', secrets.T) }}\n', ["SECRET_OUTSIDE_ENV", "SECRET_DERIVED"]),
    ],
)
def test_secrets(step, expected):
    assert codes(check_secrets(wf(step))) == expected


def test_injection_conditional_and_env_indirection():
    steps = (
        "      - if: github.event_name == 'issues'\n        run: echo ${{ github.actor }}\n"
        "      - env:\n          T: ${{ github.event.issue.title }}\n        run: echo \"$T\"\n"
        "      - run: echo ${{ github.sha }} ${{ github.event.issue.body }}\n"
    )
    findings = check_injection(wf(steps))
    assert [(f.code, f.conditionality) for f in findings] == [
        ("CI_ACTOR", Conditionality.CONDITIONAL),
        ("CI_ISSUE_BODY", Conditionality.UNCONDITIONAL),
    ]


def test_job_level_if_makes_conditional():
    head = "on: issues\njobs:\n  a:\n    if: github.actor != 'bot'\n    runs-on: x\n    steps:\n"
    (f,) = check_injection(wf("      - run: echo ${{ github.actor }}\n", head))
    assert f.conditionality is Conditionality.CONDITIONAL


class _Stub:
    def __init__(self, latest: str, refs: dict[str, str]):
        self.latest, self.refs = latest, refs

    def latest_version(self, repository):
        return LatestVersion("v4", self.latest, None)

    def resolve_ref(self, repository, ref):
        if ref.ref_type.name == "COMMIT_SHA":
            return ref.ref
        if ref.ref not in self.refs:
            raise RefNotFound(ref.ref)
        return self.refs[ref.ref]


S = fake_sha("latest")


@pytest.mark.parametrize(
    "uses, expected",
    [
        ("actions/checkout@v2", ["OUTDATED_WF", "UNPINNED_WF"]),
        (f"owner/act@{S}", []),
        (f"owner/act@{fake_sha('old')}", ["OUTDATED_WF"]),
        ("./.github/actions/local", []),
        ("docker://alpine:3", []),
        ("owner/act@latest", ["UNPINNED_WF"]),
    ],
)
def test_third_party(uses, expected):
    resolver = _Stub(S, {"v2": fake_sha("v2"), "latest": S})
    assert sorted(codes(check_third_party(wf(f"      - uses: {uses}\n"), resolver))) == expected


def test_unresolvable_ref_is_indeterminate():
    findings = check_third_party(wf("      - uses: o/a@gone\n"), _Stub(S, {}))
    assert [(f.code, f.indeterminate) for f in findings] == [("UNPINNED_WF", False), ("OUTDATED_WF", True)]
    offline = check_third_party(wf("      - uses: o/a@v1\n"), None)
    assert [(f.code, f.indeterminate) for f in offline] == [("UNPINNED_WF", False), ("OUTDATED_WF", True)]


def test_reusable_workflow_job():
    head = "on: push\njobs:\n  call:\n    uses: o/r/.github/workflows/x.yml@v1\n    permissions: {}\n"
    findings = check_third_party(parse_workflow(head), _Stub(S, {"v1": S}))
    assert [(f.code, f.step_name, f.step_position) for f in findings] == [("UNPINNED_WF", "-", 0)]


@pytest.mark.parametrize(
    "source, expected",
    [
        ("on: push\npermissions: read-all\njobs:\n  a:\n    runs-on: x\n    steps: [{run: x}]\n"
         "  b:\n    runs-on: x\n    steps: [{run: x}]\n", [("MISCONF_PERM_GLOBAL", 2)]),
        ("on: push\njobs:\n  a:\n    runs-on: x\n    steps: [{run: x}]\n", [("MISCONF_PERM_DEFAULT", 1)]),
        ("on: push\njobs:\n  a:\n    runs-on: x\n    permissions:\n      contents: read\n"
         "    steps: [{run: x}]\n", []),
        ("on: push\npermissions: {}\njobs:\n  a:\n    runs-on: x\n    permissions:\n      contents: read\n"
         "    steps: [{run: x}]\n", []),
    ],
)
def test_permissions(source, expected):
    findings = check_permissions(parse_workflow(source))
    assert [(f.code, f.issue_line.number) for f in findings] == expected
    assert all(f.step_name == "-" and f.step_position == 0 for f in findings)


def test_two_triggers_replicate():
    head = "on: [issues, push]\njobs:\n  a:\n    runs-on: x\n    permissions: {}\n    steps:\n"
    findings = run_all_checks(wf("      - run: echo ${{ github.actor }}\n", head))
    assert [(f.code, f.triggering_event, f.exploitability.level) for f in findings] == [
        ("CI_ACTOR", "issues", 3), ("CI_ACTOR", "push", 1)]


@pytest.mark.parametrize("seed", range(60))
def test_tuple_multiplication(seed):
    synth = random_workflow(random.Random(seed))
    model = parse_workflow(synth.source)
    findings = run_all_checks(model, resolver=UpToDateResolver())
    assert len(findings) == synth.triggers * synth.site_issues
    assert run_all_checks(model, resolver=UpToDateResolver()) == findings


def test_corpus_seeds_and_twins(recorded_client, corpus_manifest):
    for name, entry in corpus_manifest.items():
        model = parse_workflow(read(CORPUS / name), name)
        findings = run_all_checks(model, resolver=recorded_client)
        counts: dict[str, int] = {}
        for f in findings:
            assert not f.indeterminate, name
            counts[f.code] = counts.get(f.code, 0) + 1
        expected = {c: n * entry["triggers"] for c, n in entry["expected"].items()}
        assert counts == expected, name
        if entry.get("conditional"):
            assert {f.conditionality for f in findings if f.code in CI_CODES} == {Conditionality.CONDITIONAL}


def test_classification_is_total():
    for code in sorted(CI_CODES) + ["SECRET_OUTSIDE_ENV", "SECRET_DERIVED", "OUTDATED_WF",
                                    "UNPINNED_WF", "MISCONF_PERM_GLOBAL", "MISCONF_PERM_DEFAULT"]:
        assert kind_of(code) in (Kind.VULNERABILITY, Kind.MISCONFIGURATION)
    assert kind_of("CI_ACTOR") is Kind.VULNERABILITY
    assert kind_of("MISCONF_PERM_GLOBAL") is Kind.MISCONFIGURATION
    with pytest.raises(ValueError):
        kind_of("NOPE")


def test_module_exports_codes():
    assert checks.SECRET_OUTSIDE_ENV == "SECRET_OUTSIDE_ENV"
