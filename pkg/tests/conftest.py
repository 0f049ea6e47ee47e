import contextlib

import pytest

_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """``with criterion(n, "text"):`` records PASS, or FAIL if the block raises."""

    @contextlib.contextmanager
    def record(number: int, text: str):
        try:
            yield
        except BaseException:
            _CRITERIA[number] = f"criterion {number}: FAIL  {text}"
            raise
        _CRITERIA[number] = f"criterion {number}: PASS  {text}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
