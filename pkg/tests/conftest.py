def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import LIMITS, RESULTS, format_line
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in LIMITS:
        if n in RESULTS:
            terminalreporter.write_line(format_line(n))
        else:
            terminalreporter.write_line(f"criterion {n:2d}: NOT RUN")
