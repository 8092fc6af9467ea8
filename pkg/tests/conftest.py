from pathlib import Path

import numpy as np
import pytest

from neoseize.synth import make_fixtures

_ACCEPTANCE: dict[int, list[tuple[str, str]]] = {}


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory) -> Path:
    """The default synthetic corpus: 10 recordings x 288 s x 10 channels."""
    out = tmp_path_factory.mktemp("fixtures") / "data"
    make_fixtures(out)
    return out


@pytest.fixture(scope="session")
def small_fixture_dir(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("small") / "data"
    make_fixtures(out, n_recordings=4, duration_s=64, n_channels=4, seed=3)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[rep.outcome]
        _ACCEPTANCE.setdefault(marker.args[0], []).append((item.name, status))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        results = _ACCEPTANCE[number]
        statuses = {s for _, s in results}
        overall = "FAIL" if "FAIL" in statuses else "PASS" if "PASS" in statuses else "SKIP"
        detail = ", ".join(f"{name}={status}" for name, status in results)
        terminalreporter.write_line(f"criterion {number:2d}: {overall}  ({detail})")
