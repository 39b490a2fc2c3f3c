import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emloc.config import KINDS, dump_config, load_config, parse_config
from emloc.errors import ConfigError

MINIMAL = "[mesh]\ndivisions = 4\n[physics]\nk = 1.0\n"


def problems_of(text):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    return info.value.problems


def test_minimal_config_fills_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.divisions() == (4, 4, 4)
    assert cfg["physics"]["k"] == 1.0
    assert cfg["localize"]["L"] == 10
    assert cfg["runge"]["alpha_start"] == 1e-2
    assert cfg.kind == "localize"
    np.testing.assert_array_equal(cfg.bounds(), [[0, 0, 0], [1, 1, 1]])


def test_comments_and_strings():
    cfg = parse_config(MINIMAL + "[output]\ndir = \"a#b\"  # trailing comment\n")
    assert cfg["output"]["dir"] == "a#b"


def test_negative_k_names_the_key():
    probs = problems_of("[mesh]\ndivisions = 4\n[physics]\nk = -1\n")
    assert len(probs) == 1 and "physics.k" in probs[0] and "line 4" in probs[0]


def test_duplicate_section_reports_both_lines():
    probs = problems_of(MINIMAL + "[mesh]\nbounds = [[0,0,0],[1,1,1]]\n")
    dup = [p for p in probs if "duplicate section" in p]
    assert len(dup) == 1 and "line 5" in dup[0] and "line 1" in dup[0]


def test_duplicate_key():
    probs = problems_of("[mesh]\ndivisions = 4\ndivisions = 5\n[physics]\nk = 1\n")
    assert any("duplicate key" in p and "line 3" in p and "line 2" in p for p in probs)


def test_all_problems_reported_together():
    text = "[mesh]\ndivisions = 0\ncolour = 1\n[nonsense]\nx = 1\n[physics]\n"
    probs = problems_of(text)
    assert any("mesh.divisions" in p for p in probs)
    assert any("mesh.colour" in p and "unknown key" in p for p in probs)
    assert any("unknown section [nonsense]" in p for p in probs)
    assert any("missing required key physics.k" in p for p in probs)


def test_key_outside_section():
    probs = problems_of("k = 1\n" + MINIMAL)
    assert any("outside any section" in p for p in probs)


@pytest.mark.parametrize("section,key,bad", [
    ("physics", "k", "NaN"), ("physics", "k", "Infinity"), ("physics", "k", "-Infinity"),
    ("gamma", "lower", "[0, NaN, 0]"),
])
def test_non_finite_rejected(section, key, bad):
    text = MINIMAL.replace("k = 1.0", "") if key == "k" else MINIMAL
    probs = problems_of(text + f"[{section}]\n{key} = {bad}\n" if section != "physics" else
                        text.replace("[physics]\n", f"[physics]\n{key} = {bad}\n"))
    assert any(f"{section}.{key}" in p for p in probs)


def test_semantic_checks():
    probs = problems_of(MINIMAL + "[runge]\nalpha_start = 1e-8\nalpha_stop = 1e-2\n")
    assert any("alpha_stop" in p for p in probs)
    probs = problems_of(MINIMAL + "[regions]\nM_lower = [0.5, 0.5, 0.5]\nM_upper = [0.2, 0.9, 0.9]\n")
    assert any("regions.M" in p for p in probs)


def test_overrides():
    cfg = parse_config(MINIMAL).with_overrides(["physics.k=2.5", "localize.L=3", "output.dir=results"])
    assert cfg["physics"]["k"] == 2.5 and cfg["localize"]["L"] == 3
    assert cfg["output"]["dir"] == "results"
    for bad in (["physics.k=-2"], ["nope.k=1"], ["physics.k"], ["k=1"]):
        with pytest.raises(ConfigError):
            parse_config(MINIMAL).with_overrides(bad)


def test_shipped_configs_load():
    from pathlib import Path

    for path in sorted((Path(__file__).parent.parent / "configs").glob("*.cfg")):
        load_config(path)


finite = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


@given(k=finite, n=st.integers(1, 20), L=st.integers(1, 50), vtk=st.booleans(),
       d=st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3),
       kind=st.sampled_from(KINDS))
def test_round_trip(k, n, L, vtk, d, kind):
    text = (f"[experiment]\nkind = \"{kind}\"\n[mesh]\ndivisions = {n}\n[physics]\nk = {k!r}\n"
            f"[localize]\nL = {L}\n[runge]\ndirection = {d!r}\n[output]\nvtk = {str(vtk).lower()}\n")
    cfg = parse_config(text)
    again = parse_config(dump_config(cfg))
    assert again == cfg
    assert dump_config(again) == dump_config(cfg)
