import json
from pathlib import Path

import pytest

from qplasm import transduce

DATA = Path(__file__).parent / "data"
ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def oracle():
    return json.loads((DATA / "oracles.json").read_text())


@pytest.fixture(scope="session")
def materials():
    return transduce.default_materials()


@pytest.fixture(scope="session")
def sf14_gold(materials):
    return transduce.LayerStack(materials["sf14"], materials["gold"], 50.0, 1.32**2)


@pytest.fixture(scope="session")
def configs_dir():
    return ROOT / "configs"


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail summary line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
