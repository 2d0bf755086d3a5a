#!/usr/bin/env python3
"""Tests for the oracle verification suites."""

import pytest

from evaluation.oracle_suite import (
    codec_suite,
    gradient_suite,
    landmark_suite,
    planner_suite,
    run_oracles,
)
from planning import search_planner


def _failed(checks):
    return [f"{c.name}: {c.detail}" for c in checks if not c.passed]


def test_planner_suite_passes():
    checks = planner_suite()
    assert not _failed(checks)
    far_peg = next(c for c in checks if c.name == "hanoi34 far peg")
    assert far_peg.detail == "cost 5"


def test_landmark_suite_passes():
    checks = landmark_suite()
    assert {c.name for c in checks} >= {"chain", "fork", "hanoi34 far peg"}
    assert not _failed(checks)


def test_gradient_suite_reports_small_errors():
    checks = gradient_suite(n_seeds=5)
    assert len(checks) == 5
    assert not _failed(checks)
    assert max(c.value for c in checks) < 1e-4


def test_codec_suite_passes():
    checks = codec_suite(n_random=500, n_pairs=2000)
    assert not _failed(checks)
    assert next(c for c in checks if c.name == "hanoi34 exhaustive").detail == "64 states"


def test_dropped_delete_effects_are_caught(monkeypatch):
    # successor generation forgets delete effects; plans no longer replay
    monkeypatch.setattr(search_planner, "_progress", lambda facts, action: facts | action.add)
    assert _failed(planner_suite())


def test_run_oracles_collects_failures():
    results = run_oracles(["codec"])
    assert results['success']
    assert results['suites'] == ["codec"]
    assert not results['failures']
    with pytest.raises(ValueError):
        run_oracles(["fuzz"])


@pytest.mark.slow
def test_all_suites_pass():
    results = run_oracles(["all"])
    assert results['success'], [f"{c.suite}/{c.name}: {c.detail}" for c in results['failures']]


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-v"]))
