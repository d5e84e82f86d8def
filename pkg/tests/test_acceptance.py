"""Acceptance suite: every primary criterion at full scale and its stated tolerance.

Prints one PASS/FAIL line per criterion (also repeated in the pytest terminal summary).
Run directly with `python3 tests/test_acceptance.py` for the same lines without pytest.
"""
import sys
import time

import pytest

from tracial_lab.suite import CRITERIA

try:
    from conftest import record_acceptance
except ImportError:  # direct execution outside pytest
    def record_acceptance(line):
        pass

SEED = 0


def _line(index, res, elapsed):
    status = "PASS" if res.passed else "FAIL"
    return f"{status} criterion {index} ({res.key}): {res.title} | {res.summary} | {elapsed:.1f}s"


@pytest.mark.parametrize("index,key", list(enumerate(CRITERIA, start=1)), ids=list(CRITERIA))
def test_criterion(index, key):
    start = time.perf_counter()
    res = CRITERIA[key](SEED, "full")
    line = _line(index, res, time.perf_counter() - start)
    print(line)
    record_acceptance(line)
    failing = [r for r in res.rows if not r.passed][:5]
    assert res.passed, f"{line}\nfirst failing rows: {failing}"


if __name__ == "__main__":
    ok = True
    for index, key in enumerate(CRITERIA, start=1):
        start = time.perf_counter()
        res = CRITERIA[key](SEED, "full")
        print(_line(index, res, time.perf_counter() - start), flush=True)
        ok &= res.passed
    sys.exit(0 if ok else 1)
