import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from spikeforce.synthgen import ForceProfileSpec, SynthConfig, build_dataset  # noqa: E402

# 3 s ramps, 6 s hold, 1 s rest either side: 14 s trials keep end-to-end tests quick
SHORT = ForceProfileSpec(hold_s=6.0, rest_before_s=1.0, rest_after_s=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset():
    cfg = SynthConfig(preset="S2", profile=SHORT, emg=True)
    return build_dataset(cfg, seed=3)


# ---------------------------------------------------------------- acceptance reporting

_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    n = marker.args[0]
    detail = dict(item.user_properties).get("detail", "")
    if report.failed:
        msg = str(report.longrepr.reprcrash.message) if hasattr(report.longrepr, "reprcrash") else "error"
        detail = (detail + "; " if detail else "") + msg.splitlines()[0][:160]
    _CRITERIA[n] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")
