import os
import warnings

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", max_examples=40, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.delenv("ADDFUNC_CACHE_DIR", raising=False)
    with warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="2 Delta")
        yield
