"""Collects the acceptance verdicts and prints them after the run."""

ACCEPTANCE: dict[str, tuple[str, bool, str]] = {}


def record(key: str, title: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE[key] = (title, passed, detail)
    print(f"ACCEPTANCE {key} {'PASS' if passed else 'FAIL'}: {title} ({detail})")
    return passed


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("ab")), k)):
        title, passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}. {'PASS' if passed else 'FAIL'}  {title}: {detail}")
