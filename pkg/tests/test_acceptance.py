"""Runs every acceptance criterion at its stated tolerance.

``verify("all")`` executes the full suite twice and compares the artifacts
byte for byte; one PASS/FAIL line is printed per criterion.
"""

import time

import pytest

from kdvb_delay.acceptance import CRITERIA, SUITE_BUDGET, verify


@pytest.fixture(scope="module")
def suite_results(tmp_path_factory):
    out = tmp_path_factory.mktemp("verify_all")
    lines = []
    t0 = time.perf_counter()
    results = verify("all", out, seed=0, echo=lines.append)
    elapsed = time.perf_counter() - t0
    print("\n" + "\n".join(lines))
    return {r.number: r for r in results}, elapsed


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(suite_results, number, capsys):
    results, _ = suite_results
    r = results[number]
    with capsys.disabled():
        print(f"\n{r.line()}")
    assert r.passed, r.line()


def test_suite_budget(suite_results):
    _, elapsed = suite_results
    assert elapsed < SUITE_BUDGET
