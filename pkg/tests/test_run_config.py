import numpy as np
import pytest
from pydantic import ValidationError

from env_settings import ENV_SETTINGS, use_settings
from utils.models.run_config import RunConfig, parse_grid


def test_parse_linear_grid():
    np.testing.assert_allclose(parse_grid("0:1:5"), [0.0, 0.25, 0.5, 0.75, 1.0])


def test_parse_log_grid():
    np.testing.assert_allclose(parse_grid("1e-3:1e-1:3:log"), [1e-3, 1e-2, 1e-1])


def test_parse_list_grid():
    assert parse_grid("0.01, 0.1,1") == [0.01, 0.1, 1.0]


@pytest.mark.parametrize("text", ["1:2", "1:2:3:lin", "a:b:3", "0:1:0", "0:1:3:log", "1,x"])
def test_parse_grid_rejects(text):
    with pytest.raises(ValueError):
        parse_grid(text)


def test_preset_config_defaults():
    config = RunConfig(subcommand="steady", preset="three-qubit", g=0.01)
    assert config.g_values == [0.01]
    assert config.format == "json"
    assert config.order >= 0


def test_g_grid_takes_precedence():
    config = RunConfig(subcommand="spectrum", preset="three-qubit", g=0.5, g_grid=[0.1, 0.2])
    assert config.g_values == [0.1, 0.2]


@pytest.mark.parametrize("grid", [[], [0.1, 0.1], [0.2, 0.1], [0.1, float("inf")]])
def test_grids_must_increase(grid):
    with pytest.raises(ValidationError):
        RunConfig(subcommand="spectrum", preset="three-qubit", g_grid=grid)


def test_order_must_be_non_negative():
    with pytest.raises(ValidationError):
        RunConfig(subcommand="steady", preset="three-qubit", order=-1)


def test_tolerances_are_checked():
    RunConfig(subcommand="steady", preset="three-qubit", tolerances={"residual_tol": 1e-8})
    with pytest.raises(ValidationError, match="unknown tolerance"):
        RunConfig(subcommand="steady", preset="three-qubit", tolerances={"fuzz": 1e-8})
    with pytest.raises(ValidationError, match="positive"):
        RunConfig(subcommand="steady", preset="three-qubit", tolerances={"null_tol": 0.0})


def test_exactly_one_model_source(tmp_path):
    with pytest.raises(ValidationError, match="exactly one"):
        RunConfig(subcommand="coup")
    with pytest.raises(ValidationError, match="exactly one"):
        RunConfig(subcommand="coup", preset="three-qubit", model_path=tmp_path / "m.json")
    RunConfig(subcommand="verify")


def test_example_needs_a_preset(tmp_path):
    with pytest.raises(ValidationError, match="example needs"):
        RunConfig(subcommand="example", model_path=tmp_path / "m.json")


def test_overrides_need_a_preset(tmp_path):
    with pytest.raises(ValidationError, match="--set"):
        RunConfig(subcommand="coup", model_path=tmp_path / "m.json", overrides={"u": "1"})


def test_settings_overrides_are_scoped():
    default = ENV_SETTINGS.residual_tol
    with use_settings(ENV_SETTINGS.model_copy(update={"residual_tol": 1e-3})):
        assert ENV_SETTINGS.residual_tol == 1e-3
        with use_settings(ENV_SETTINGS.model_copy(update={"null_tol": 1e-4})):
            assert (ENV_SETTINGS.residual_tol, ENV_SETTINGS.null_tol) == (1e-3, 1e-4)
        assert ENV_SETTINGS.null_tol != 1e-4
    assert ENV_SETTINGS.residual_tol == default


def test_settings_cannot_be_assigned():
    with pytest.raises(AttributeError):
        ENV_SETTINGS.residual_tol = 1.0
