import pytest

from mdicke.config import SolverConfig


@pytest.fixture
def tight_config():
    """Solver settings tight enough for 1e-8 absolute comparisons."""
    return SolverConfig(energy_rtol=1e-11, lanczos_tol=1e-12)


@pytest.fixture
def clean_env(monkeypatch, tmp_path):
    """Isolate configuration tests from MDICKE_* variables and any local .env file."""
    for name in ("MDICKE_CACHE_DIR", "MDICKE_WIDTH", "MDICKE_SEED"):
        # setenv first so values loaded from a .env during the test are undone too
        monkeypatch.setenv(name, "")
        monkeypatch.delenv(name)
    monkeypatch.chdir(tmp_path)
    return tmp_path
