import pytest


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    """Emit a FAIL line for acceptance criteria (PASS lines print inline)."""
    outcome = yield
    report = outcome.get_result()
    if (
        report.when == "call"
        and report.failed
        and item.fspath.basename == "test_acceptance.py"
    ):
        name = item.name
        number = "".join(ch for ch in name.split("_")[2] if ch.isdigit())
        print(f"\nACCEPTANCE {number} FAIL: {name}")
