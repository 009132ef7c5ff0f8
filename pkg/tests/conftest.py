from importlib import resources

import pytest


@pytest.fixture(scope="session")
def scenario_dir():
    """Directory of the configs bundled with the installed package."""
    return resources.files("multiobserver") / "scenarios"
