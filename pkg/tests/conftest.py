import numpy as np
import pytest

from gridmarket.netmodel import Generator, Line, Network, Node
from gridmarket.scenario_io import load_feeder, load_scenario
from gridmarket.simkernel import run_simulation


def chain(n_nodes, r=0.01, x=0.01, loads=None, cost=30.0, flow_limit=5000.0, export=False, **gen_kw):
    """Feeder 1-2-...-n with a root supply unit at node 1."""
    loads = loads if loads is not None else [0.0] + [100.0] * (n_nodes - 1)
    nodes = [Node(i + 1, float(p), 0.0) for i, p in enumerate(loads)]
    lines = [Line(i, i + 1, r, x, flow_limit, (flow_limit / 1e4) ** 2) for i in range(1, n_nodes)]
    gen = Generator("grid", 1, 10000.0, cost, "grid-root", -10000.0 if export else 0.0, -10000.0, 10000.0)
    return Network(nodes, lines, 1, generators=[gen], **gen_kw)


@pytest.fixture(scope="session")
def ieee33():
    return load_feeder("ieee33")


@pytest.fixture(scope="session")
def two_bus():
    return load_feeder("two_bus")


@pytest.fixture(scope="session")
def five_bus():
    return load_feeder("five_bus")


@pytest.fixture(scope="session")
def emergency():
    return load_scenario("paper-emergency")


@pytest.fixture(scope="session")
def emergency_runs(emergency):
    net, prof, cfg = emergency
    return run_simulation(net, prof, cfg.with_p2p(True)), run_simulation(net, prof, cfg.with_p2p(False))


@pytest.fixture(scope="session")
def normal_run(emergency):
    net, prof, cfg = emergency
    return run_simulation(net, prof, cfg.without_events())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record (and print) one acceptance verdict line, then assert it."""

    def report(number, name, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
