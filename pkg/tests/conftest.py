import pytest

from vidstory.artifacts import RunStore
from vidstory.backends import Backends, SimBackend, SimEnvironment

PROMPT = ("Northwind builds the TrailFlask insulated bottle, targeting Female hikers aged 25-34 in Denver, CO "
          "who are interested in weekend trail running.")


@pytest.fixture
def env():
    return SimEnvironment(((45, 60, 82), (55, 80, 40), (35, 84, 50, 65)), noise_sigma=5.0, seed=3)


@pytest.fixture
def sim(env):
    return SimBackend(seed=3, env=env)


@pytest.fixture
def backends(sim):
    return Backends.uniform(sim)


@pytest.fixture
def store(tmp_path):
    return RunStore(tmp_path / "run")


@pytest.fixture
def prompt():
    return PROMPT


ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
