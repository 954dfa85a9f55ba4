"""The fourteen acceptance criteria at their stated tolerances.

Each test prints one [PASS]/[FAIL] line.  Criterion 12 cannot hold: f_plus at
C_beta + 0.1 is 2^-0.1, so the n = 50 error bound is 1 - 2^-5 = 0.96875, short
of 0.99.  It runs unchanged and is marked as an expected failure.
Run this file directly to print the lines without pytest.
"""
import sys

import pytest

from qcap import acceptance

UNATTAINABLE = {12: "f_plus(AD_0.5, 2^(C_beta+0.1)) = 2^-0.1 caps the n=50 bound at 0.96875 < 0.99"}


def criterion(k):
    marks = [pytest.mark.xfail(strict=True, reason=UNATTAINABLE[k])] if k in UNATTAINABLE else []
    return pytest.param(k, marks=marks, id=f"criterion-{k:02d}")


@pytest.mark.parametrize("number", [criterion(k) for k in range(1, len(acceptance.CRITERIA) + 1)])
def test_criterion(number, capsys):
    outcome = acceptance.run_one(number)
    with capsys.disabled():
        print("\n" + outcome.line())
    assert outcome.passed, outcome.detail


def test_fourteen_criteria():
    assert len(acceptance.CRITERIA) == 14


if __name__ == "__main__":
    results = acceptance.run()
    for o in results:
        print(o.line())
    sys.exit(0 if all(o.passed or o.number in UNATTAINABLE for o in results) else 1)
