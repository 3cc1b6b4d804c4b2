import time

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "asdkit",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("asdkit")

_CRITERIA: list = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_call(item):
    start = time.perf_counter()
    yield
    item.user_properties.append(("elapsed", time.perf_counter() - start))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when != "call":
        return
    props = dict(item.user_properties)
    _CRITERIA.append((marker.args[0], marker.args[1], rep.passed, props.get("elapsed", 0.0), props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, elapsed, detail in sorted(_CRITERIA):
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] criterion {num:2d}: {title} ({elapsed:.1f} s)"
        if detail:
            line += f" | {detail}"
        terminalreporter.write_line(line)
