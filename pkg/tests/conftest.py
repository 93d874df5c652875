import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hometrend.fixtures import make_demo_dataset  # noqa: E402


@pytest.fixture(scope="session")
def demo_dataset(tmp_path_factory):
    """One shared copy of the bundled 3-station synthetic dataset."""
    root = tmp_path_factory.mktemp("demo")
    config_path = make_demo_dataset(root)
    return root, config_path
