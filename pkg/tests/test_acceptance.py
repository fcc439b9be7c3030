"""Acceptance gate: the full ``verify`` run judged criterion by criterion.

Criteria 1 to 12 pass when every gating assertion tagged with the criterion
passed; criterion 13 reruns the suite with another thread count and compares
every report byte for byte.
"""

import json

import pytest

import acceptance_log
from mcflab import cli
from mcflab.suites import SUITES

CRITERIA = {
    1: "kernel exactness",
    2: "euclidean entropy baseline",
    3: "small-t limit",
    4: "area growth",
    5: "flow exactness",
    6: "static minimal surfaces",
    7: "first variation",
    8: "monotonicity",
    9: "almost-monotonicity",
    10: "entropy / area-growth equivalence",
    11: "Li-Yau scan",
    12: "minimal-limit diagnostics",
    13: "determinism across thread counts",
}

pytestmark = pytest.mark.slow


def _verify(out_dir, threads):
    code = cli.main(["verify", "--suite", "all", "--seed", "0", "--threads", str(threads), "--out-dir", str(out_dir)])
    reports = {s: (out_dir / f"verify_{s}.jsonl").read_bytes() for s in SUITES}
    return code, reports


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    one = _verify(tmp_path_factory.mktemp("threads1"), 1)
    two = _verify(tmp_path_factory.mktemp("threads2"), 2)
    return one, two


@pytest.fixture(scope="module")
def assertions(runs):
    (_, reports), _ = runs
    return [json.loads(line) for data in reports.values() for line in data.decode().splitlines()]


def _report(n, ok, detail):
    line = f"criterion {n:2d} {CRITERIA[n]}: {'PASS' if ok else 'FAIL'} ({detail})"
    acceptance_log.LINES.append(line)
    print(line)


@pytest.mark.parametrize("n", range(1, 13))
def test_criterion(n, assertions):
    tagged = [a for a in assertions if a["criterion"] == n and a["gating"]]
    failed = [a["check"] for a in tagged if not a["passed"]]
    ok = bool(tagged) and not failed
    _report(n, ok, f"{len(tagged) - len(failed)}/{len(tagged)} checks" + (f"; failed: {', '.join(failed)}" if failed else ""))
    assert tagged, f"no checks tagged with criterion {n}"
    assert not failed, failed


def test_criterion_13_determinism(runs):
    (code1, rep1), (code2, rep2) = runs
    differing = [s for s in SUITES if rep1[s] != rep2[s]]
    _report(13, not differing, f"{len(SUITES)} reports compared" + (f"; differ: {', '.join(differing)}" if differing else ""))
    assert not differing
    assert code1 == code2


def test_full_verify_exit_code(runs, assertions):
    (code, _), _ = runs
    failed = [a["check"] for a in assertions if a["gating"] and not a["passed"]]
    assert code == (1 if failed else 0)
    assert not failed, failed
