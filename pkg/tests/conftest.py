import pytest

from specpack import domains

_ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record the outcome of an acceptance criterion for the summary."""

    def record(key: str, ok: bool, detail: str = "") -> None:
        _ACCEPTANCE[key] = (bool(ok), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k.split()[1])):
        ok, detail = _ACCEPTANCE[key]
        terminalreporter.write_line(f"{key}: {'PASS' if ok else 'FAIL'}  {detail}")


# -- common spaces ------------------------------------------------------------------


@pytest.fixture
def path5():
    return domains.path(5, neumann_mass=False)


@pytest.fixture
def path10():
    return domains.path(10, neumann_mass=False)


@pytest.fixture
def path20():
    return domains.path(20, neumann_mass=False)
