import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")

_criteria: dict[str, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, title = marker.args
    outcome = "PASS" if call.excinfo is None else "FAIL"
    key = f"{number:02d}"
    prev = _criteria.get(key)
    if prev is None or prev[1] == "PASS":
        _criteria[key] = (title, outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_criteria):
        title, outcome = _criteria[key]
        terminalreporter.write_line(f"[{outcome}] criterion {int(key):2d}: {title}")


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(1234)
