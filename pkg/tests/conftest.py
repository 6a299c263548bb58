import sys


def pytest_runtest_logreport(report):
    """Print one pass/fail line per acceptance criterion."""
    module = report.nodeid.split("::")[0].rsplit("/", 1)[-1]
    if report.when != "call" or module != "test_acceptance.py":
        return
    status = "PASS" if report.passed else ("FAIL" if report.failed else "SKIP")
    name = report.nodeid.split("::")[-1]
    print(f"[ACCEPTANCE] {status} {name}", file=sys.stderr)
