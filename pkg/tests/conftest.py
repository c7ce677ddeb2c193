import pytest

from edgelab.content import generate_posts
from edgelab.edge import EdgeWorker, Strategy, StrategyConfig
from edgelab.ssg import build_site


@pytest.fixture(scope="session")
def posts10():
    return generate_posts(7, 10)


@pytest.fixture(scope="session")
def build10(posts10):
    return build_site(posts10, built_at=0.0)


@pytest.fixture
def worker_factory(posts10, build10):
    """Deployed worker for a strategy; kwargs override StrategyConfig fields."""

    def make(strategy, scheduler=None, **overrides):
        overrides.setdefault("upstream_delay", 0.1)
        worker = EdgeWorker(StrategyConfig(strategy=strategy, **overrides), scheduler)
        worker.deploy(build10, posts10)
        return worker

    return make


def pytest_configure(config):
    config.addinivalue_line("markers", "wallclock: test measures real elapsed time")
