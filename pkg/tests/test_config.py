import pytest

from d2ea import config
from d2ea.errors import ConfigError
from d2ea.gbrt import STAGE_TWO, GbrtParams
from d2ea.oracle import OracleParams


def test_sections_and_root():
    cfg = config.parse_config(
        "population = 20  # swarm size\n"
        "[pso]\n"
        "iterations = 30\n"
        "\n"
        "# a comment\n"
        "[stage2]\n"
        "num_trees = 12\n"
    )
    assert cfg[""] == {"population": "20"}
    assert cfg["pso"] == {"iterations": "30"}
    assert config.section(cfg, "pso", fallback_root=True) == {"population": "20", "iterations": "30"}
    assert config.section(cfg, "pso") == {"iterations": "30"}


def test_section_overrides_root():
    cfg = config.parse_config("seed = 1\n[pso]\nseed = 2\n")
    assert config.section(cfg, "pso", fallback_root=True)["seed"] == "2"


def test_unknown_section():
    with pytest.raises(ConfigError, match="unknown section"):
        config.parse_config("[nope]\na = 1\n")


def test_syntax_error_reports_line():
    with pytest.raises(ConfigError, match="line  3"):
        config.parse_config("a = 1\nb = 2\nnot a pair\n", source="x.cfg")


def test_keys_case_preserved():
    assert config.parse_config("[oracle]\nv1 = 300\nl_k = 1e-4\n")["oracle"] == {"v1": "300", "l_k": "1e-4"}


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        config.load_config(tmp_path / "missing.cfg")


def test_digest_is_order_free():
    a = config.parse_config("[pso]\na = 1\nb = 2\n")
    b = config.parse_config("[pso]\nb = 2\na = 1\n")
    assert config.digest(a) == config.digest(b)
    assert config.digest(a) != config.digest(config.parse_config("[pso]\na = 1\nb = 3\n"))


def test_feeds_params():
    cfg = config.parse_config("[stage2]\nnum_trees = 12\n[oracle]\nnoise_sigma = 0\n")
    hp = GbrtParams.from_mapping(cfg["stage2"], base=STAGE_TWO)
    assert (hp.num_trees, hp.max_height, hp.l2_lambda) == (12, 9, 0.01)
    assert OracleParams.from_mapping(cfg["oracle"]).noise_sigma == 0.0
    with pytest.raises(ConfigError):
        OracleParams.from_mapping({"warp_factor": "9"})
