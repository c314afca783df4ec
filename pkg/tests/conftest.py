def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(RESULTS, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
            terminalreporter.write_line(RESULTS[key])
