import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from membrane_lab.config import EXPERIMENTS, SCHEMA, ConfigError, apply_override, parse_config


def test_empty_text_gives_defaults():
    cfg = parse_config("")
    for section, keys in SCHEMA.items():
        for key, (_, default) in keys.items():
            assert cfg[f"{section}.{key}"] == default
    assert cfg.slope == (1.0,)


def test_experiment_defaults():
    assert parse_config("", "stability")["grid.dim"] == 2
    assert parse_config("", "stability").slope == (1.0, 0.0)
    assert parse_config("", "linear-decay")["solver.t_end"] == 160.0
    # explicit values still win
    assert parse_config("[grid]\ndim = 1\n", "stability")["grid.dim"] == 1


def test_typed_values_and_comments():
    text = """# a comment
[physics]
slope = 1.0, 0.5   ; two components
p = 0.75
[grid]
dim = 2
[solver]
sponge = false
"""
    cfg = parse_config(text)
    assert cfg["physics.slope"] == (1.0, 0.5)
    assert cfg["physics.p"] == 0.75
    assert cfg["solver.sponge"] is False


@pytest.mark.parametrize(
    "text,line,fragment",
    [
        ("[physics]\np = 0.4\n", 2, "p must exceed 1/2"),
        ("[physics]\nfoo = 1\n", 2, "unknown key 'foo'"),
        ("\n[bogus]\nx = 1\n", 2, "unknown section"),
        ("p = 1\n", 1, "outside of any section"),
        ("[grid]\ndim = two\n", 2, "bad value for dim"),
        ("[grid]\ndim = 4\n", 2, "dim must be"),
        ("[grid]\n\n\npoints = 64\nsponge_width = 20\n", 5, "sponge_width"),
        ("[physics]\nslope = 1, 2\n", 2, "slope needs 1 components"),
        ("[physics]\neps = 1.5\n", 2, "eps must lie"),
        ("[physics]\nc = nan\n", 2, "c must"),
        ("[grid]\ndim = 1\ndim = 2\n", 3, "dim"),
    ],
)
def test_errors_name_the_line(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert str(exc.value).startswith(f"line {line}:")
    assert fragment in str(exc.value)


def test_unknown_experiment():
    with pytest.raises(ConfigError):
        parse_config("", "warp-drive")
    assert len(EXPERIMENTS) == 5


def test_override():
    cfg = parse_config("")
    new = apply_override(cfg, "physics.eps=0.02")
    assert new["physics.eps"] == 0.02 and cfg["physics.eps"] == 1e-2
    with pytest.raises(ConfigError):
        apply_override(cfg, "physics.eps")
    with pytest.raises(ConfigError):
        apply_override(cfg, "physics.nope=1")
    with pytest.raises(ConfigError):
        apply_override(cfg, "physics.p=0.2")


overrides = st.fixed_dictionaries(
    {
        "grid.points": st.integers(65, 512),
        "grid.half_width": st.floats(0.5, 100.0),
        "physics.p": st.floats(0.51, 5.0),
        "physics.eps": st.floats(0.0, 0.99),
        "physics.offset": st.floats(-1e6, 1e6),
        "solver.cfl": st.floats(0.01, 0.99),
        "solver.sponge": st.booleans(),
        "nash_moser.m_max": st.integers(0, 10),
        "nash_moser.norm_rounding": st.sampled_from(["floor", "ceil"]),
        "output.seed": st.integers(0, 2**63),
        "output.dir": st.from_regex(r"[a-z][a-z0-9_-]{0,12}", fullmatch=True),
    }
)


@settings(max_examples=60, deadline=None)
@given(overrides, st.sampled_from(EXPERIMENTS))
def test_serialize_parse_round_trip(ov, experiment):
    cfg = parse_config("", experiment)
    for key, value in ov.items():
        v = ("true" if value else "false") if isinstance(value, bool) else repr(value) if isinstance(value, float) else str(value)
        cfg = apply_override(cfg, f"{key}={v}")
    again = parse_config(cfg.serialize(), experiment)
    assert again == cfg
    assert again.serialize() == cfg.serialize()
