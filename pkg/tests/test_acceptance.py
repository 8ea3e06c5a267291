"""The 18 acceptance criteria at their stated tolerances.

Each test prints one ``criterion N: PASS|FAIL`` line.  Tolerances and
instance sizes live in :mod:`concurv.acceptance`; runtime limits are
asserted here.
"""

import time

import pytest

from concurv.acceptance import ANCHORS, CRITERIA

RUNTIME_LIMITS = {1: 5 * 4, 3: 60, 5: 120, 8: 30, 18: 120}


def _summary(details, width=300):
    text = repr(details)
    return text if len(text) <= width else text[:width] + "..."


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    t0 = time.perf_counter()
    passed, details = CRITERIA[number](0)
    elapsed = time.perf_counter() - t0
    limit = RUNTIME_LIMITS.get(number)
    in_time = limit is None or elapsed < limit
    verdict = "PASS" if passed and in_time else "FAIL"
    with capsys.disabled():
        print(f"\ncriterion {number:2d}: {verdict}  ({ANCHORS[number]}; {elapsed:.1f}s)")
    assert in_time, f"runtime {elapsed:.1f}s exceeds {limit}s"
    assert passed, _summary(details)
