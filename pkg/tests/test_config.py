import pytest

from tourmap.config import PipelineConfig, parse_point, parse_text
from tourmap.errors import ConfigError


def test_parse_text_comments_and_errors():
    assert parse_text("# c\nk = v  # trailing\n\nx=1") == {"k": "v", "x": "1"}
    with pytest.raises(ConfigError, match="duplicate"):
        parse_text("a = 1\na = 2")
    with pytest.raises(ConfigError, match="key = value"):
        parse_text("just words")


def test_load_resolves_relative_paths(tmp_path):
    (tmp_path / "zones.geojson").write_text("{}")
    (tmp_path / "p.ndjson").write_text("")
    conf = tmp_path / "run.conf"
    conf.write_text("zones = zones.geojson\nphoto = p.ndjson\nk = 4\nrescale = no\n"
                    "center = 1.5, -2\nname.photo = Panoramio\n")
    cfg = PipelineConfig.load(conf, {"seed": 9})
    assert cfg.zones == str(tmp_path / "zones.geojson")
    assert (cfg.k, cfg.rescale, cfg.center, cfg.seed) == (4, False, (1.5, -2.0), 9)
    assert cfg.names == {"photo": "Panoramio"}
    cfg.validate()


def test_validation_errors(tmp_path):
    with pytest.raises(ConfigError, match="zones"):
        PipelineConfig(photo="x").validate(check_files=False)
    with pytest.raises(ConfigError, match="alpha"):
        PipelineConfig(zones="z", photo="p", alpha=1.5).validate(check_files=False)
    with pytest.raises(ConfigError, match="not found"):
        PipelineConfig(zones=str(tmp_path / "nope"), photo="p").validate()
    with pytest.raises(ConfigError, match="unknown"):
        PipelineConfig.from_mapping({"colour": "red"})
    with pytest.raises(ConfigError):
        PipelineConfig.from_mapping({"k": "six"})
    with pytest.raises(ConfigError):
        parse_point("1;2")


def test_hash_ignores_out_and_jobs():
    a = PipelineConfig(zones="/a/z.geojson", photo="/a/p.ndjson", out="x", jobs=1)
    b = PipelineConfig(zones="/b/z.geojson", photo="/b/p.ndjson", out="y", jobs=4)
    assert a.hash({"zones": "1"}) == b.hash({"zones": "1"})
    assert a.hash({"zones": "1"}) != a.hash({"zones": "2"})
    assert a.hash() != PipelineConfig(zones="/a/z.geojson", photo="/a/p.ndjson", seed=1).hash()
