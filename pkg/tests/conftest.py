import pytest

_ACCEPTANCE: dict[int, str] = {}


class _Recorder:
    def __call__(self, number: int, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(_ACCEPTANCE[number])
        return ok


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion.

    A test that raises before recording still gets a FAIL line naming the error.
    """
    number = request.node.get_closest_marker("criterion").args[0]
    yield _Recorder()
    rep = getattr(request.node, "rep_call", None)
    if number not in _ACCEPTANCE and rep is not None and rep.failed:
        _ACCEPTANCE[number] = f"criterion {number:2d}: FAIL  {rep.longrepr.reprcrash.message}"


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    rep = yield
    if rep.when == "call":
        item.rep_call = rep
    return rep


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
