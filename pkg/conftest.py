"""conftest.py.

`pytest` configuration file. Used to gate the expensive symbolic and
continuation checks behind a flag.
Reworked example from pytest docs:
https://docs.pytest.org/en/latest/example/simple.html.
"""

import pytest


def pytest_addoption(parser):
    """Adapt pytest cli args, and give more info when -h flag is used."""
    parser.addoption(
        "--runexpensive",
        action="store_true",
        default=False,
        help="run expensive tests (D = 4 symbolic, d = 2 continuation)",
    )


def pytest_configure(config):
    """Add ini value line."""
    config.addinivalue_line(
        "markers", "runexpensive: mark test to run expensive tests"
    )


def pytest_collection_modifyitems(config, items):
    """Skip expensive tests unless the runexpensive flag is given."""
    if config.getoption("--runexpensive"):
        return
    skip_runexpensive = pytest.mark.skip(
        reason="need --runexpensive option to run"
    )
    for item in items:
        if "runexpensive" in item.keywords:
            item.add_marker(skip_runexpensive)
