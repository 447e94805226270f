import shutil
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def mini_corpus(tmp_path: Path) -> Path:
    """Fresh copy of the mini corpus (without golden outputs); returns its config path."""
    dst = tmp_path / "mini"
    shutil.copytree(FIXTURES / "mini", dst, ignore=shutil.ignore_patterns("golden", "work", "__pycache__"))
    return dst / "config.toml"


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
