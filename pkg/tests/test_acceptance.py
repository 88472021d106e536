"""Acceptance gate: one test per criterion, each printing its pass/fail line.

The heavy Monte-Carlo criteria run minutes by design; their stated budgets
are asserted alongside the substance.
"""

import pytest

from fellerlab import acceptance

BUDGETS_S = {1: 1, 2: 10, 3: 30, 4: 30, 5: 300, 8: 300, 9: 900}


@pytest.mark.parametrize("cid,title", [(c, t) for c, t, _ in acceptance.CRITERIA])
def test_criterion(cid, title):
    result = acceptance.run_criterion(cid)
    print()
    print(acceptance.format_result(result))
    assert result.passed, f"criterion {cid} failed: {result.details}"
    if cid in BUDGETS_S:
        assert result.runtime_s < BUDGETS_S[cid], \
            f"criterion {cid} exceeded its runtime budget: {result.runtime_s:.1f}s"
