import pytest
from hypothesis import settings

from app import config

# numerical examples are slow to shrink and some settle a plant, no per-example deadline
settings.register_profile('servo', deadline=None, max_examples=50)
settings.load_profile('servo')


@pytest.fixture(scope="session", autouse=True)
def setup_before_tests():
    # every test runs against the test-mode config
    previous = config.cli_config
    config.cli_config = config.Config('test')

    yield  # Tests will be executed

    config.cli_config = previous
