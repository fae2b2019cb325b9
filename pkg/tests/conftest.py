import pytest


def pytest_addoption(parser):
    parser.addoption(
        "--slow",
        action="store_true",
        default=False,
        help="run the long training and full-scale tests",
    )


@pytest.fixture(scope="session", autouse=True)
def configure_slow(request):
    seen = {None}
    session = request.node
    slow = request.config.getoption("--slow")
    for item in session.items:
        cls = item.getparent(pytest.Class)
        if cls not in seen:
            if hasattr(cls.obj, "slow"):
                cls.obj.slow = slow
            seen.add(cls)
