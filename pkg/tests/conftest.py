import os

import pytest

from selfsim.classify import find_beta_star
from selfsim.params import make_params


@pytest.fixture(scope="session", autouse=True)
def _isolated_cache(tmp_path_factory):
    # keep test runs from touching the user's real cache directory
    path = tmp_path_factory.mktemp("cache")
    old = os.environ.get("SELFSIM_CACHE_DIR")
    os.environ["SELFSIM_CACHE_DIR"] = str(path)
    yield
    if old is None:
        os.environ.pop("SELFSIM_CACHE_DIR", None)
    else:
        os.environ["SELFSIM_CACHE_DIR"] = old


@pytest.fixture(scope="session")
def p21():
    return make_params(2, 1.6)


@pytest.fixture(scope="session")
def p11():
    return make_params(1, 1.5)


@pytest.fixture(scope="session")
def bisect21(p21):
    return find_beta_star(p21)


@pytest.fixture(scope="session")
def bisect11(p11):
    return find_beta_star(p11)
