import pytest

from perctopo.groups import GroupModel


@pytest.fixture
def z1():
    return GroupModel.Zd(1)


@pytest.fixture
def z2():
    return GroupModel.Zd(2)


@pytest.fixture
def zc2():
    return GroupModel.ZdTimesCyclic(1, 2)


@pytest.fixture
def heis():
    return GroupModel.Heisenberg()


ALL_MODELS = [GroupModel.Zd(2), GroupModel.ZdTimesCyclic(1, 2), GroupModel.Heisenberg()]
