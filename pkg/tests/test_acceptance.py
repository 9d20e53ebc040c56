"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines, or use
``mtbranch verify`` for the same suite with record files.
"""
import pytest

from mtbranch.harness import acceptance
from mtbranch.harness.records import all_passed

pytestmark = pytest.mark.slow


@pytest.mark.parametrize("cid", list(acceptance.CRITERIA))
def test_criterion(cid):
    records, _ = acceptance.run_criterion(cid, acceptance.MASTER_SEED)
    ok = all_passed(records)
    print(f"\n{cid} {'PASS' if ok else 'FAIL'}: {acceptance.CRITERIA[cid].title}")
    for r in records:
        print("    " + r.summary())
    assert records
    assert any(r.tol_kind is not None for r in records)
    assert ok, "\n".join(r.summary() for r in records if r.passed is False)
