import contextlib

import pytest

_ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion as PASS or FAIL, whatever the block raises."""

    @contextlib.contextmanager
    def record(number: int, title: str):
        try:
            yield
        except BaseException as e:
            _ACCEPTANCE[number] = (title, False, f"{type(e).__name__}: {str(e).splitlines()[0] if str(e) else ''}")
            print(f"FAIL criterion {number}: {title}")
            raise
        _ACCEPTANCE[number] = (title, True, "")
        print(f"PASS criterion {number}: {title}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, ok, why = _ACCEPTANCE[n]
        line = f"{'PASS' if ok else 'FAIL'} {n:>2}. {title}"
        terminalreporter.write_line(line + (f"  [{why[:160]}]" if why else ""))
