"""Shared pytest plumbing.

The acceptance tests register one summary line each; the terminal-summary
hook prints them after the run so the gate status is visible even for
passing tests (whose stdout pytest would otherwise swallow).  The bridge
supremum Monte Carlo is session-scoped because two test modules compare
against the same reference distribution.
"""

import math

import numpy as np
import pytest

_acceptance_lines: list[str] = []

BRIDGE_PATHS = 200_000
BRIDGE_GRID = 2000


@pytest.fixture(scope="session")
def bridge_sup_samples():
    """Suprema of sqrt(sum_r B_r(t)^2) / sqrt(t(1-t)) over I_n = [h_n, 1-h_n].

    200000 independent paths of a 3-dimensional Brownian bridge on a
    2000-point grid; components accumulate progressively so d = 1, 2, 3
    share the same draws.  Returns {(d, n): array of 200000 suprema} for
    d in {1, 2, 3} and n in {100, 500} (h_n = (log n)^{3/2} / n).
    """
    t = np.linspace(0.0, 1.0, BRIDGE_GRID)
    inner = t[1:-1]
    weight = 1.0 / np.sqrt(inner * (1.0 - inner))
    masks = {}
    for n in (100, 500):
        hn = math.log(n) ** 1.5 / n
        masks[n] = (inner >= hn) & (inner <= 1.0 - hn)
    sqrt_dt = np.sqrt(np.diff(t))
    sups = {(d, n): [] for d in (1, 2, 3) for n in (100, 500)}
    rng = np.random.default_rng(20260814)
    chunk = 1000
    for _ in range(BRIDGE_PATHS // chunk):
        incr = rng.normal(size=(3, chunk, sqrt_dt.size)) * sqrt_dt
        wiener = np.cumsum(incr, axis=2)
        bridge = wiener - t[1:] * wiener[:, :, -1:]
        sq = bridge[:, :, :-1] ** 2
        total = np.zeros((chunk, inner.size))
        for d in (1, 2, 3):
            total = total + sq[d - 1]
            vals = np.sqrt(total) * weight
            for n in (100, 500):
                sups[(d, n)].append(vals[:, masks[n]].max(axis=1))
    return {key: np.concatenate(parts) for key, parts in sups.items()}


@pytest.fixture(scope="session")
def acceptance_report():
    def record(line: str) -> None:
        _acceptance_lines.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in _acceptance_lines:
        terminalreporter.write_line(line)
