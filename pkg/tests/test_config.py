import math

import pytest

from rmfchaos.config import ExperimentConfig, load_config, parse_config_text, validate
from rmfchaos.errors import ConfigError


def test_parse_roundtrip(tmp_path):
    text = """
    # comment
    experiment = clt
    x = 2e4          # trailing comment
    q_list = 0, 0.5, 1
    t = inf
    n_mc = 1_000
    """
    cfg = parse_config_text(text)
    assert cfg.experiment == "clt"
    assert cfg.x == 2e4
    assert cfg.q_list == (0.0, 0.5, 1.0)
    assert math.isinf(cfg.t)
    assert cfg.n_mc == 1000
    path = tmp_path / "c.cfg"
    path.write_text(text)
    assert load_config(path) == cfg
    assert cfg.to_dict()["t"] == "inf"


@pytest.mark.parametrize(
    "text,match",
    [
        ("bogus = 1", "unknown key"),
        ("x = 1\nx = 2", "duplicate"),
        ("x 1", "expected"),
        ("n_mc = 2.5", "n_mc"),
        ("theta = 1.2\nfamily = divisor", "theta"),
        ("theta = 0\nfamily = divisor", "theta"),
        ("eps = 0.6\ndelta = 0.5", "eps \\+ delta"),
        ("experiment = clt\ngrid_spacing = 0.5", "1/\\(2 log y\\)"),
        ("experiment = chaos-convergence\nchaos_spacing = 0.5", "1/\\(2 log y\\)"),
        ("experiment = clt\nq_list = 0.5, 1.5", "q_list"),
        ("experiment = multifractal\nq_prime = 1", "q_prime"),
        ("experiment = coupling\na_list = 5", "a_list"),
        ("experiment = nope", "experiment"),
        ("family = two_squares\ntheta = 0.3", "two_squares"),
        ("experiment = clt\nx = 1e7", "table_limit"),
        ("experiment = clt\ngrid_lo = -20\ngrid_hi = 20", "grid_hi"),
    ],
)
def test_validation_messages(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config_text(text)


def test_missing_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/config.cfg")


def test_with_overrides_validates():
    cfg = ExperimentConfig()
    assert cfg.with_overrides(seed=5).seed == 5
    with pytest.raises(ConfigError):
        cfg.with_overrides(workers=0)
    validate(cfg)


def test_shipped_configs_parse():
    from pathlib import Path

    paths = sorted((Path(__file__).resolve().parents[1] / "scripts" / "configs").glob("*.cfg"))
    assert len(paths) == 6
    for p in paths:
        load_config(p)
