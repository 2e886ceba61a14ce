import pytest

from l0attack.family import build_family


@pytest.fixture(scope="session")
def fam1():
    return build_family(1)


@pytest.fixture(scope="session")
def fam3():
    return build_family(3)


@pytest.fixture(scope="session")
def fam50():
    # K = ceil(ln 512 * 8), the family the n=512, r=8 integer attack uses
    return build_family(50)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """record(criterion, ok, detail): print and keep one pass/fail line, return ok."""
    def record(cid, ok, detail):
        line = f"{cid} {'PASS' if ok else 'FAIL'} {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
