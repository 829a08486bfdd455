import numpy as np
import pytest

from oracles import s1_network

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        prev = _criteria.get(n)
        passed = rep.passed and (prev is None or prev[1])
        _criteria[n] = (title, passed, detail if detail else (prev[2] if prev else ""))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        title, passed, detail = _criteria[n]
        line = f"criterion {n:>2} {'PASS' if passed else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))


@pytest.fixture
def s1():
    return s1_network()


@pytest.fixture
def detail(record_property):
    """Attach a short measurement string to the acceptance summary line."""
    def add(text):
        record_property("detail", text)
    return add


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
