import sys


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance-criteria verdict lines after the test summary."""
    for name, mod in list(sys.modules.items()):
        if name.rsplit(".", 1)[-1] == "test_acceptance":
            results = getattr(mod, "RESULTS", None)
            if results:
                terminalreporter.section("acceptance criteria")
                for line in results:
                    terminalreporter.write_line(line)
