from __future__ import annotations

import sys


def pytest_terminal_summary(terminalreporter):
    """Print every acceptance line, even when output capture hid it."""
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    results = getattr(mod, "_results", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for res in results.values():
        terminalreporter.write_line(res.line())
