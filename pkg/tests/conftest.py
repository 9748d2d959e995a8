import os
from collections import defaultdict

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> [(check name, passed, detail)]
ACCEPTANCE = defaultdict(list)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[n]
        ok = all(c[1] for c in checks)
        parts = "; ".join(f"{name}: {'ok' if passed else 'FAILED'} ({detail})"
                          for name, passed, detail in checks)
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {parts}")
