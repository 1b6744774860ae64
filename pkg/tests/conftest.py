"""Collects the one-line verdicts printed by the acceptance suite and
repeats them in the terminal summary."""

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=_criterion_order):
            terminalreporter.write_line(line)


def _criterion_order(line):
    key = line.split()[1]
    return (int("".join(c for c in key if c.isdigit()) or 0), key)
