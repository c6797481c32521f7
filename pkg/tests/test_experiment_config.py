import pytest

from errors import ConfigError
from experiment_config import (SCHEMA, default_config, load_config, parse_config, render_config,
                               write_config)


def test_schema_tag_alone_is_a_complete_config():
    cfg = parse_config(f"[meta]\nschema = {SCHEMA}\n")
    assert cfg == default_config()
    assert cfg.walk.num_guides == 13
    assert cfg.acquisition.overhead_per_mask == 0.34


def test_values_are_parsed_into_typed_fields():
    cfg = parse_config(f"""
[meta]
schema = {SCHEMA}

[walk]
gamma = 0.0085
length = 9

[acquisition]
ordering = russian_dolls
fractions = 0.5, 0.125, 1.0
noise = off

[run]
seed = 42
input_guides = 5, 7
""")
    assert cfg.walk.gamma == 0.0085
    assert cfg.walk.length == 9.0
    assert cfg.acquisition.ordering == "russian_dolls"
    assert cfg.acquisition.fractions == (0.125, 0.5, 1.0)
    assert cfg.acquisition.noise is False
    assert cfg.run.seed == 42
    assert cfg.run.input_guides == (5, 7)
    assert cfg.model.include_accidentals is False


@pytest.mark.parametrize("text", [
    "[walk]\ngamma = 0.3\n",
    "[meta]\nschema = spi-walk/0\n",
    f"[meta]\nschema = {SCHEMA}\n[walk]\ncolour = red\n",
    f"[meta]\nschema = {SCHEMA}\n[camera]\nexposure = 1\n",
    f"[meta]\nschema = {SCHEMA}\n[run]\nseed = many\n",
    f"[meta]\nschema = {SCHEMA}\n[acquisition]\nnoise = sometimes\n",
    f"[meta]\nschema = {SCHEMA}\n[acquisition]\nordering = spiral\n",
    f"[meta]\nschema = {SCHEMA}\n[walk]\ngamma = -1\n",
    f"[meta]\nschema = {SCHEMA}\n[geometry]\nnum_modes = 12\n",
    "not an ini file",
])
def test_invalid_configs_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_render_round_trip():
    cfg = default_config().with_overrides(seed=9, noise=False)
    assert parse_config(render_config(cfg)) == cfg


def test_auto_rates_come_from_the_source_chain():
    cfg = parse_config(f"[meta]\nschema = {SCHEMA}\n[source]\ncoincidence_rate = auto\npair_rate = 6e5\n")
    assert cfg.source.coincidence_rate is None
    assert cfg.source.true_rate == pytest.approx(0.25 * 4500.0)
    assert "coincidence_rate = auto" in render_config(cfg)
    assert parse_config(render_config(cfg)) == cfg


def test_source_chain_violation_is_a_config_error():
    with pytest.raises(ConfigError, match="source chain"):
        parse_config(f"[meta]\nschema = {SCHEMA}\n[source]\npair_rate = 1\n")


def test_write_and_load(tmp_path):
    path = tmp_path / "experiment.ini"
    cfg = default_config().with_overrides(output_dir=str(tmp_path / "out"))
    write_config(path, cfg)
    assert load_config(path) == cfg
    first = path.read_bytes()
    write_config(path, load_config(path))
    assert path.read_bytes() == first


def test_missing_file_is_a_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.ini")


def test_overrides_leave_other_fields_alone():
    cfg = default_config().with_overrides(seed=3, output_dir="elsewhere", noise=False, workers=2)
    assert cfg.run.seed == 3
    assert cfg.run.output_dir == "elsewhere"
    assert cfg.acquisition.noise is False
    assert cfg.acquisition.workers == 2
    assert cfg.walk == default_config().walk


def test_sweep_seeds_default_to_master_seed():
    assert default_config().with_overrides(seed=5).run.seeds == (5,)
