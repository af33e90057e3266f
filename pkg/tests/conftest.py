from __future__ import annotations

import time

import pytest

from helpers import FIXTURES, RESULTS
from mara.engine import MARA, MIRA, run
from mara.scenario import load_scenario

SEEDS = list(range(10))


@pytest.fixture(scope="session")
def paired_runs():
    """MARA and MIRA summaries on the 14-node scenario for ten seeds, plus wall time."""
    base = load_scenario(FIXTURES / "scenario14.json")
    start = time.perf_counter()
    out = {MARA: [], MIRA: []}
    for seed in SEEDS:
        for mode in (MARA, MIRA):
            sc = load_scenario(FIXTURES / "scenario14.json")
            sc.mode, sc.seed, sc.check_invariants = mode, seed, True
            out[mode].append(run(sc).summary)
    out["elapsed"] = time.perf_counter() - start
    out["scenario"] = base
    return out


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])
