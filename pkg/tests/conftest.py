import numpy as np
import pytest

from mcpdetect import DetectorProfile, ScoredInstance


@pytest.fixture
def profile():
    return DetectorProfile(name="test", k=1, tau=0.0, l_max=1024)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def labeled_instances(rng):
    lengths = rng.integers(0, 1200, size=400)
    raws = rng.normal(0.002 * lengths, 0.5)
    labels = ["human"] * 200 + ["machine"] * 200
    raws[200:] += 1.5
    return [ScoredInstance(f"x{i}", int(n), float(r), lab)
            for i, (n, r, lab) in enumerate(zip(lengths, raws, labels))]


_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, name): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number, name = marker.args
    detail = dict(item.user_properties).get("detail", "")
    _CRITERIA.append((number, name, call.excinfo is None, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(_CRITERIA):
        line = f"criterion {number:>2} {name}: {'PASS' if ok else 'FAIL'}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
