_RESULTS: dict[int, tuple[str, str, float]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion reported in the summary")


def pytest_runtest_logreport(report):
    marker = dict(report.user_properties).get("criterion")
    if marker is None:
        return
    number, title = marker
    failed = report.failed
    if report.when == "call" or failed:
        previous = _RESULTS.get(number)
        if previous is None or previous[1] != "FAIL":
            _RESULTS[number] = (title, "FAIL" if failed else "PASS", report.duration)


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", tuple(mark.args)))


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, status, seconds = _RESULTS[number]
        terminalreporter.write_line(f"{status} criterion {number:2d}: {title} ({seconds:.2f} s)")
