import pytest

from oscibath.cli import cmd_demo


@pytest.fixture(scope="session")
def fig2_demo_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig2_demo")
    assert cmd_demo("fig2", str(out)) == 0
    return out


@pytest.fixture(scope="session")
def fig4_demo_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fig4_demo")
    assert cmd_demo("fig4", str(out)) == 0
    return out
