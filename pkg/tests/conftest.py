import django
import pytest
from django.conf import settings

from structsplat.cli import logging_config


def pytest_configure():
    settings.configure(INSTALLED_APPS=["structsplat"], LOGGING=logging_config())
    django.setup()


@pytest.fixture
def out_dir(tmp_path):
    path = tmp_path / "out"
    path.mkdir()
    return str(path)
