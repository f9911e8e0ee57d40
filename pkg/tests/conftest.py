import pytest

# criterion number -> (title, PASS/FAIL, detail)
_ACCEPTANCE: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): numbered acceptance criterion")


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        number, title = props["criterion"]
        _ACCEPTANCE[number] = (title, "PASS" if report.passed else "FAIL", props.get("detail", ""))


@pytest.fixture
def criterion(request, record_property):
    """Tag the test with its acceptance number; returns a function recording a result summary."""
    mark = request.node.get_closest_marker("criterion")
    record_property("criterion", mark.args)

    def detail(text):
        request.node.user_properties[:] = [p for p in request.node.user_properties
                                           if p[0] != "detail"]
        record_property("detail", text)
        print(f"criterion {mark.args[0]}: {text}")

    return detail


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, status, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{status}] criterion {number:>2}: {title} | {detail}")
