import os

import pytest

from common.config import ExperimentConfig, parse_config
from common.models import CheckResult, ProfileParams


@pytest.fixture
def default_params():
    return ProfileParams()


@pytest.fixture
def make_params():
    def _create_params(**overrides):
        return ProfileParams(**overrides)

    return _create_params


@pytest.fixture
def make_config():
    def _create_config(text: str = "") -> ExperimentConfig:
        return parse_config(text)

    return _create_config


@pytest.fixture
def write_config(tmp_path):
    def _create_file(text: str, name: str = "lab.toml"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _create_file


@pytest.fixture
def make_check():
    def _create_check(name="check", passed=True, required=True):
        return CheckResult(name=name, passed=passed, required=required)

    return _create_check


@pytest.fixture(autouse=True)
def _clear_lab_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith("LAB_"):
            monkeypatch.delenv(key)
