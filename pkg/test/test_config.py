import pytest

from nilheat.config import RunConfig, load_config, parse_config
from nilheat.errors import ConfigError, ParseError


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert (cfg.n, cfg.k, cfg.t, cfg.seed) == (1, 1, 0.1, 42)
    assert cfg.convention == "thm410"


def test_parse_coerces_types_and_skips_comments():
    cfg = parse_config(
        """
        # verification run
        n = 2
        t = 0.25     # heat time
        timings = yes
        out =
        convention = prop44
        """
    )
    assert cfg.n == 2 and isinstance(cfg.n, int)
    assert cfg.t == 0.25
    assert cfg.timings is True
    assert cfg.out is None
    assert cfg.convention == "prop44"


def test_parse_reports_line_of_malformed_entry():
    with pytest.raises(ParseError) as info:
        parse_config("n = 1\n\nthis line has no equals sign\n", "run.conf")
    assert info.value.line == 3
    assert "run.conf:3" in str(info.value)


def test_parse_rejects_unknown_key():
    with pytest.raises(ConfigError) as info:
        parse_config("n = 1\nwidth = 3\n")
    assert info.value.field == "width"
    assert "line 2" in str(info.value)


def test_parse_rejects_uncoercible_value():
    with pytest.raises(ConfigError) as info:
        parse_config("grid = many\n")
    assert info.value.field == "grid"
    with pytest.raises(ConfigError):
        parse_config("timings = perhaps\n")


@pytest.mark.parametrize(
    "change, name",
    [
        ({"n": 3}, "n"),
        ({"k": 0}, "k"),
        ({"t": 0.0}, "t"),
        ({"grid": 1}, "grid"),
        ({"radius": -1.0}, "radius"),
        ({"tol": 0.0}, "tol"),
        ({"convention": "other"}, "convention"),
        ({"workers": 0}, "workers"),
        ({"lambda_nodes": 8}, "lambda_nodes"),
    ],
)
def test_validate_names_the_field(change, name):
    with pytest.raises(ConfigError) as info:
        RunConfig().with_overrides(change).validate()
    assert info.value.field == name


def test_overrides_skip_none_and_coerce_strings():
    cfg = RunConfig().with_overrides({"k": "3", "t": None, "seed": 7, "timings": "off"})
    assert cfg.k == 3 and cfg.t == 0.1 and cfg.seed == 7 and cfg.timings is False
    with pytest.raises(ConfigError):
        RunConfig().with_overrides({"colour": "blue"})


def test_load_config_from_file(tmp_path):
    path = tmp_path / "verify.conf"
    path.write_text("k = 2\nseed = 5\n", encoding="utf-8")
    cfg = load_config(path)
    assert cfg.k == 2 and cfg.seed == 5
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.conf")
