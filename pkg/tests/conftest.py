"""Prints the acceptance pass/fail lines at the end of every pytest run."""

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[2].rstrip(":"))):
        terminalreporter.write_line(line)
