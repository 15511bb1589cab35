"""Acceptance gate: every criterion at its stated tolerance, one test each.

Two sub-checks fail at their pinned parameters and are asserted as stated
anyway (see the README and the acceptance module docstring): the two-class
interference measure at tau = 15 (criterion 5) and dm^2 against its quoted
leading-order constant (criterion 9). Their failures are real properties of
the pinned configurations, not loose tolerances.
"""

import pytest

from qarrival.acceptance import CRITERIA, run_criterion


@pytest.mark.parametrize("cid,title", [(num, title) for num, title, _ in CRITERIA])
def test_criterion(cid, title):
    result = run_criterion(cid)
    lines = "\n".join(f"  {check}" for check in result.checks)
    assert result.passed, f"criterion {cid} ({title}):\n{lines}"
