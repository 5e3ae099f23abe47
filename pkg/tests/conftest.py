import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from goai import fixtures


@pytest.fixture(scope="session")
def fig2_store():
    return fixtures.fig2_store()


@pytest.fixture(scope="session")
def fig2_gateway():
    return fixtures.fig2_gateway()


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    target = tmp_path_factory.mktemp("fixtures")
    fixtures.write_fixture_dir(target)
    return target
