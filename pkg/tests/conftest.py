CRITERIA = {
    1: "isotropic Gaussian radius recovery",
    2: "collective bounds never exceed exhaustive attacks",
    3: "bound ordering and quantization refinement",
    4: "1x1 grid run equals isotropic naive run",
    5: "masking distributions equal receptive-field certificate",
    6: "budget splitting: collective 1 vs naive 0",
    7: "likelihood-ratio and variance identities",
    8: "Monte Carlo coverage and Holm dominance",
    9: "LP and MILP match brute force",
    10: "ACR and certified-accuracy formulas",
    11: "byte-identical reruns",
}

_outcomes: dict = {}
_criterion_of: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number): acceptance criterion checked by this test")


def pytest_collection_modifyitems(items):
    for item in items:
        marker = item.get_closest_marker("criterion")
        if marker is not None:
            _criterion_of[item.nodeid] = marker.args[0]


def pytest_runtest_logreport(report):
    number = _criterion_of.get(report.nodeid)
    if number is None:
        return
    runs = _outcomes.setdefault(number, [])
    if report.failed or (report.when == "call" and report.skipped):
        runs.append(False)
    elif report.when == "call":
        runs.append(True)


def pytest_terminal_summary(terminalreporter):
    if not _criterion_of:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in CRITERIA.items():
        runs = _outcomes.get(number)
        if not runs:
            status = "NOT RUN"
        else:
            status = "PASS" if all(runs) else "FAIL"
        terminalreporter.write_line(f"{status:7s} criterion {number:2d}: {title} ({len(runs or [])} tests)")
