import numpy as np
import pytest

from app.core.config import settings
from app.services.field_service import make_field


@pytest.fixture(scope="session")
def gf1():
    return make_field(1)


@pytest.fixture(scope="session")
def gf2():
    return make_field(2)


@pytest.fixture(scope="session")
def gf3():
    return make_field(3)


@pytest.fixture(scope="session")
def gf4():
    return make_field(4)


@pytest.fixture(scope="session")
def gf5():
    return make_field(5)


@pytest.fixture(scope="session")
def gf7():
    return make_field(7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def isolated_data_dirs(tmp_path, monkeypatch):
    """Keep caches and set files written by tests out of app/data."""
    monkeypatch.setattr(settings, "CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setattr(settings, "SETS_DIR", str(tmp_path / "sets"))
    monkeypatch.setattr(settings, "TABLES_DIR", str(tmp_path / "tables"))
