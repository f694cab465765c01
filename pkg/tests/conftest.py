import pytest

from cqbandit.experiment import preset_instance


@pytest.fixture(scope="session")
def mab():
    return preset_instance("mab", 2000)


@pytest.fixture(scope="session")
def ward():
    return preset_instance("ward", 500)
