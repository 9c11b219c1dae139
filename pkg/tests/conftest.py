import pytest

from bucketeer import _purepy

try:
    from bucketeer import _core
except ImportError:  # extension not built
    _core = None

BACKENDS = [pytest.param(_purepy, id="python")]
if _core is not None:
    BACKENDS.append(pytest.param(_core, id="compiled"))
else:
    BACKENDS.append(pytest.param(None, id="compiled", marks=pytest.mark.skip("extension not built")))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


# acceptance criteria register (number, description, passed, detail) here
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, desc, passed, detail in ACCEPTANCE_RESULTS:
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] criterion {number}: {desc} -- {detail}")
