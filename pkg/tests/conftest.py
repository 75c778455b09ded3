import numpy as np
import pytest

from eqsynth.preprocess import preprocess
from eqsynth.problems import paper_instances
from eqsynth.solvers import run

PAPER_SEED = 42
PAPER_ITERS = 50_000

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    number, title = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        _ACCEPTANCE[number] = (title, rep.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, outcome = _ACCEPTANCE[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}")


@pytest.fixture(scope="session")
def paper_problems():
    return paper_instances(seed=PAPER_SEED)


@pytest.fixture(scope="session")
def paper_pre(paper_problems):
    return {name: preprocess(p) for name, p in paper_problems.items()}


@pytest.fixture(scope="session")
def paper_runs(paper_pre):
    """Full-scale runs of both algorithms on the three instances."""
    return {(algo, name): run(pre, algo, max_iter=PAPER_ITERS)
            for name, pre in paper_pre.items() for algo in ("synth", "gda-inc")}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
