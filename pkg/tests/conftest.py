"""Test configuration for pytest."""

import sys
from pathlib import Path

import pytest

# Ensure feed_repl module is importable
sys.path.insert(0, str(Path(__file__).parent.parent))

from feed_repl.ads import FourRecordFixture  # noqa: E402
from feed_repl.gas_model import GasSchedule  # noqa: E402
from feed_repl.sim import SimConfig  # noqa: E402

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def schedule():
    """Default gas schedule."""
    return GasSchedule()


@pytest.fixture
def config():
    """Default simulator configuration (E=60, B=15, F=6, Pt=1)."""
    return SimConfig()


@pytest.fixture
def four_records():
    """The four-record layout: w, y not replicated; x, z replicated."""
    return FourRecordFixture.create()


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture(autouse=True)
def isolated_output(tmp_path, monkeypatch):
    """Keep run indexes and CSVs out of the working tree."""
    monkeypatch.setenv("FEEDREPL_OUT_DIR", str(tmp_path / "results"))
    monkeypatch.setenv("HOME", str(tmp_path / "home"))
    yield
