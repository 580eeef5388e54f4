import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cyclekit.synthetic import random_multigraph
from helpers import graph_from

settings.register_profile("ci", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("ci")


@pytest.fixture
def triangle():
    # a -r0-> b -r1-> c, a -r2-> c
    return graph_from([("a", "r0", "b"), ("b", "r1", "c"), ("a", "r2", "c")])


@pytest.fixture
def small_graph():
    return random_multigraph(25, 60, 4, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    rows = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" in nodeid and rep.when in ("call", "setup"):
                name = nodeid.split("::")[-1][len("test_criterion_"):]
                num, _, what = name.partition("_")
                rows.append((int(num), what, "PASS" if status == "passed" else "FAIL"))
    if rows:
        terminalreporter.section("acceptance criteria")
        for num, what, verdict in sorted(rows):
            terminalreporter.write_line(f"criterion {num}: {verdict}  {what.replace('_', ' ')}")
