from hypothesis import HealthCheck, settings

from helpers import ACCEPTANCE

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, seconds, note in sorted(ACCEPTANCE):
        status = "PASS" if passed else "FAIL"
        extra = f"  [{note}]" if note else ""
        terminalreporter.write_line(f"criterion {number}: {status}  {title}  ({seconds:.1f} s){extra}")
