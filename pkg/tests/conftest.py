import os
from pathlib import Path

import pytest

# Filled by test_acceptance; echoed at the end of the session.
ACCEPTANCE_LINES: list[str] = []

CACHE_ENV = "POSETRACK_ACCEPTANCE_DIR"


@pytest.fixture(scope="session")
def acceptance_dir(tmp_path_factory) -> Path:
    """Where acceptance data and checkpoints live; reused across runs if the env var is set."""
    env = os.environ.get(CACHE_ENV)
    if env:
        path = Path(env)
        path.mkdir(parents=True, exist_ok=True)
        return path
    return tmp_path_factory.mktemp("acceptance")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
