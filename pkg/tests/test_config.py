"""
Tests for settings loading and the derived run configurations.
"""
import pytest
from pydantic import ValidationError

from app.config import Settings, load_settings, parse_floats, parse_ints, parse_names
from app.dependencies import get_imputer


def test_parse_helpers():
    assert parse_floats("0.2, 0.4,") == [0.2, 0.4]
    assert parse_floats("") == []
    assert parse_ints("1,2,3") == [1, 2, 3]
    assert parse_names(" x , lr ,") == ["x", "lr"]


def test_defaults_validate():
    settings = Settings()
    assert settings.validate_configuration()
    assert settings.impute_config().h_grid == "auto"
    assert settings.baseline_config().rank_grid == [1, 2, 3, 4, 5, 6]


def test_flags_override_config_file(tmp_path):
    config = tmp_path / "run.conf"
    config.write_text("# comment\nseed=9\nmethod=lr\nh_grid=0.3,0.1\n")

    settings = load_settings(str(config), {"method": "x-ltwfe-sp", "seed": None})

    assert settings.seed == 9
    assert settings.method == "x-ltwfe-sp"
    impute = settings.impute_config()
    assert impute.h_grid == [0.1, 0.3]
    assert impute.split is True


def test_unknown_key_is_rejected(tmp_path):
    config = tmp_path / "run.conf"
    config.write_text("bandwith=0.2\n")
    with pytest.raises(ValidationError):
        load_settings(str(config))


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_settings(str(tmp_path / "absent.conf"))


def test_environment_variables(monkeypatch):
    monkeypatch.setenv("EGONET_SEED", "17")
    monkeypatch.setenv("EGONET_METHODS", "x,sampled")
    settings = load_settings()
    assert settings.seed == 17
    assert settings.experiment_config().methods == ["x", "sampled"]

    assert load_settings(overrides={"seed": 3}).seed == 3


def test_undersmoothing_multipliers():
    assert Settings(undersmooth=0.7).undersmooth_multipliers() == [0.7]
    assert Settings(undersmooth_sweep="1, 0.5").undersmooth_multipliers() == [1.0, 0.5]
    with pytest.raises(ValueError):
        Settings(undersmooth_sweep="1,1.5").validate_configuration()


@pytest.mark.parametrize(
    "overrides",
    [
        {"threads": 0},
        {"seed": -1},
        {"kernel": "gaussian"},
        {"rank_grid": ""},
    ],
)
def test_invalid_settings(overrides):
    with pytest.raises(ValueError):
        load_settings(overrides=overrides)


def test_experiment_config_from_settings():
    settings = Settings(
        experiment="peer-effects",
        n_nodes=50,
        phi_list="0.2,0.4",
        methods="x,sampled",
        threads=2,
        peer_alpha_ybar=0.3,
        noiseless=True,
    )
    cfg = settings.experiment_config()
    assert cfg.experiment == "peer-effects"
    assert cfg.phi_list == [0.2, 0.4]
    assert cfg.max_workers == 2
    assert cfg.peer.alpha_ybar == 0.3
    assert cfg.noiseless is True
    assert cfg.sampled_count(0.2) == 10


def test_imputer_factory():
    settings = Settings(method="x-ltwfe", undersmooth=0.9, seed=6)
    imputer = get_imputer(settings)
    assert imputer.method == "x-ltwfe"
    assert imputer.config.undersmooth_multiplier == 0.9
    assert imputer.config.seed == 6

    swept = get_imputer(settings, method="x-ltwfe-sp", undersmooth=0.5)
    assert swept.method == "x-ltwfe-sp"
    assert swept.config.split is True
    assert swept.config.undersmooth_multiplier == 0.5
