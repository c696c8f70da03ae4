"""Shared pytest wiring.

The acceptance tests append one line per criterion to ``ACCEPTANCE_LINES``;
the terminal-summary hook prints them after the run so every criterion shows
a single PASS/FAIL line regardless of output capturing.
"""

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, name, passed, detail=""):
    status = "PASS" if passed else "FAIL"
    line = f"criterion {number} ({name}): {status}"
    if detail:
        line += f" -- {detail}"
    ACCEPTANCE_LINES.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
