"""Acceptance criteria 1-9 at their stated tolerances and path counts.

The suite runs once per session; each criterion is reported as its own test and
as one PASS/FAIL line in the terminal summary.
"""

import os

import pytest

from ltbound.acceptance import run_all

CRITERIA = range(1, 10)
RESULTS = {}


@pytest.fixture(scope="session")
def acceptance_results():
    quick = os.environ.get("LTBOUND_QUICK_ACCEPTANCE") == "1"
    results = run_all(quick=quick, workers=os.cpu_count() or 1)
    RESULTS.update({r.number: r for r in results})
    return RESULTS


@pytest.mark.slow
@pytest.mark.parametrize("number", CRITERIA)
def test_criterion(acceptance_results, number):
    result = acceptance_results[number]
    print(result.line())
    assert result.passed, result.line()
