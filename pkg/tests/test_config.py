import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stacktherm import (Block, ConfigError, Floorplan, builtin_materials, lookup_material,
                        parse_floorplan, parse_power_trace, parse_stack_config)
from stacktherm.config import find_overlap, format_floorplan, format_power_trace, overlap_area

FILES = {
    "one.flp": "A 0.002 0.002 0.0 0.0\n",
    "one.ptrace": "A\n1.0\n",
    "core.flp": "L 0.001 0.002 0 0\nR 0.001 0.002 0.001 0\n",
    "core.ptrace": "L R\n3.0 1.0\n",
    "mem.flp": "M 0.002 0.002 0 0\n",
    "mem.ptrace": "M\n0.5\n",
}


def resolver(name):
    return FILES[name]


# ---------------------------------------------------------------- floorplans

def test_single_block_floorplan():
    fp = parse_floorplan("A 0.002 0.002 0.0 0.0")
    assert fp.names == ("A",)
    assert fp.die_width == pytest.approx(2e-3)
    assert fp.die_height == pytest.approx(2e-3)


def test_two_halves_tile_the_die():
    fp = parse_floorplan("L 0.001 0.002 0 0\nR 0.001 0.002 0.001 0\n")
    assert (fp.die_width, fp.die_height) == (pytest.approx(2e-3), pytest.approx(2e-3))
    assert overlap_area(fp.block("L"), fp.block("R")) == 0.0


def test_overlap_rejected_with_line():
    with pytest.raises(ConfigError, match="overlap") as info:
        parse_floorplan("L 0.0015 0.002 0 0\nR 0.001 0.002 0.001 0\n", source="x.flp")
    assert info.value.line == 2
    assert info.value.source == "x.flp"
    # shared area is 0.5 mm x 2 mm
    a, b = Block("L", 0.0015, 0.002, 0, 0), Block("R", 0.001, 0.002, 0.001, 0)
    assert overlap_area(a, b) == pytest.approx(0.5e-3 * 2e-3)


@pytest.mark.parametrize("text, needle", [
    ("A 0.001 0.001 0", "expected"),
    ("A 0.001 x 0 0", "not a number"),
    ("A 0 0.001 0 0", "positive"),
    ("A 0.001 0.001 -1e-4 0", "negative"),
    ("A 0.001 0.001 0 0\nA 0.001 0.001 0.001 0", "duplicate"),
    ("# only a comment\n", "no blocks"),
    ("A nan 0.001 0 0", "finite"),
])
def test_floorplan_errors(text, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_floorplan(text)


def test_comments_and_blank_lines():
    fp = parse_floorplan("# header\n\nA 0.001 0.001 0 0  # trailing\n")
    assert fp.names == ("A",)


rects = st.tuples(st.integers(0, 7), st.integers(0, 7), st.integers(1, 4), st.integers(1, 4))


def _grid_overlap(a, b):
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return max(0, min(ax + aw, bx + bw) - max(ax, bx)) * max(0, min(ay + ah, by + bh) - max(ay, by))


@given(st.lists(rects, min_size=1, max_size=8))
@settings(max_examples=200, deadline=None)
def test_find_overlap_matches_pairwise_oracle(raw):
    unit = 1e-4
    blocks = [Block(f"b{i}", w * unit, h * unit, x * unit, y * unit)
              for i, (x, y, w, h) in enumerate(raw)]
    expect = any(_grid_overlap(raw[i], raw[j]) > 0
                 for i in range(len(raw)) for j in range(i + 1, len(raw)))
    assert (find_overlap(blocks) is not None) == expect


@given(st.lists(st.tuples(st.integers(1, 40), st.integers(1, 40)), min_size=1, max_size=6))
@settings(max_examples=100, deadline=None)
def test_floorplan_round_trip(sizes):
    # a row of disjoint blocks with awkward float sizes
    blocks, x = [], 0.0
    for i, (w, h) in enumerate(sizes):
        blocks.append(Block(f"blk{i}", w * 1.37e-5, h * 2.9e-5, x, 0.0))
        x += w * 1.37e-5
    fp = Floorplan(tuple(blocks))
    assert parse_floorplan(format_floorplan(fp)) == fp


# -------------------------------------------------------------------- traces

def test_trace_single_row():
    tr = parse_power_trace("A B\n1.0 2.0\n", 1e-3)
    assert tr.num_steps == 1
    assert tr.sample(0) == {"A": 1.0, "B": 2.0}


def test_trace_zero_rows():
    tr = parse_power_trace("A\n0.0\n0.0\n0.0\n", 1e-3)
    assert tr.num_steps == 3
    assert not tr.samples.any()


def test_trace_column_mismatch():
    with pytest.raises(ConfigError, match="columns") as info:
        parse_power_trace("A B\n1.0\n", 1e-3)
    assert info.value.line == 2


@pytest.mark.parametrize("text, interval, needle", [
    ("A\n-1.0\n", 1e-3, "negative"),
    ("A\n", 1e-3, "empty"),
    ("A A\n1 1\n", 1e-3, "duplicate"),
    ("A\n1.0\n", 0.0, "interval"),
    ("A\nfoo\n", 1e-3, "not a number"),
])
def test_trace_errors(text, interval, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_power_trace(text, interval)


def test_trace_is_read_only():
    tr = parse_power_trace("A\n1\n", 1e-3)
    with pytest.raises(ValueError):
        tr.samples[0, 0] = 5.0


@given(st.lists(st.lists(st.floats(0, 1e3, allow_nan=False), min_size=2, max_size=2),
                min_size=1, max_size=10))
@settings(max_examples=100, deadline=None)
def test_trace_round_trip(rows):
    tr = parse_power_trace("A B\n" + "\n".join(" ".join(repr(v) for v in r) for r in rows),
                           1e-3)
    again = parse_power_trace(format_power_trace(tr), 1e-3)
    assert again.block_names == tr.block_names
    assert np.array_equal(again.samples, tr.samples)


def test_trace_reduce():
    tr = parse_power_trace("A B\n1 4\n3 0\n", 1e-3)
    assert tr.reduce("max") == {"A": 3.0, "B": 4.0}
    assert tr.reduce("mean") == {"A": 2.0, "B": 2.0}


# ----------------------------------------------------------------- materials

def test_builtin_silicon():
    assert lookup_material("silicon").conductivity == 130.0


def test_builtin_water_heat_capacity():
    assert lookup_material("water").volumetric_heat_capacity == pytest.approx(998 * 4184)


def test_unknown_material():
    with pytest.raises(ConfigError, match="unknown material"):
        lookup_material("unobtanium")


def test_builtin_table_is_immutable():
    table = builtin_materials()
    with pytest.raises(TypeError):
        table["silicon"] = None


# -------------------------------------------------------------- stack config

ONE_LAYER = """
[stack]
ambient = 318.15
grid_rows = 1
grid_cols = 1
sink_resistance_top = 0.5

[layer.0]
kind = active
thickness = 150e-6
material = silicon
floorplan = one.flp
power = one.ptrace
interval = 1e-3
"""

FOUR_LAYER = """
[stack]
ambient = 318.15
grid_rows = 40
grid_cols = 40
sink_resistance_top = 2.0
boundary_bottom = adiabatic

[layer.0]
name = core
kind = active
thickness = 150e-6
material = silicon
floorplan = core.flp
power = core.ptrace
interval = 1e-3

[layer.1]
kind = tim
thickness = 20e-6
material = tim

[layer.2]
kind = microchannel
thickness = 200e-6
material = silicon
channel_width = 100e-6
wall_width = 100e-6
num_channels = {n}
flow_rate = 1e-7

[layer.3]
name = memory
kind = active
thickness = 100e-6
material = silicon
floorplan = mem.flp
power = mem.ptrace
interval = 1e-3
"""


def test_one_layer_stack():
    spec = parse_stack_config(ONE_LAYER, resolver)
    assert spec.num_layers == 1
    assert spec.sink_resistance_top == 0.5
    assert spec.boundary_bottom is None


def test_four_layer_ordering():
    spec = parse_stack_config(FOUR_LAYER.format(n=9), resolver)
    assert [l.kind for l in spec.layers] == ["active", "tim", "microchannel", "active"]
    assert spec.layers[0].name == "core" and spec.layers[3].name == "memory"
    cool = spec.layers[2].cooling
    assert cool.coolant.name == "water"
    assert cool.inlet_temp == spec.ambient
    assert spec.die_width == pytest.approx(2e-3)


def test_channel_pattern_wider_than_die():
    # 32 channels and 33 walls of 100 um need 6.5 mm
    with pytest.raises(ConfigError, match="die height") as info:
        parse_stack_config(FOUR_LAYER.format(n=32), resolver)
    assert "layer.2" in str(info.value)


def test_all_adiabatic_rejected():
    text = ONE_LAYER.replace("sink_resistance_top = 0.5", "sink_resistance_top = adiabatic")
    with pytest.raises(ConfigError, match="ill-posed"):
        parse_stack_config(text, resolver)


@pytest.mark.parametrize("edit, needle", [
    (("thickness = 150e-6", "thickness = -1"), "layer.0.thickness"),
    (("material = silicon", "material = unobtanium"), "unknown material"),
    (("kind = active", "kind = bogus"), "kind"),
    (("interval = 1e-3", "interval = 1e-3\ncolour = red"), "unknown key"),
    (("[layer.0]", "[layer.1]"), "contiguous"),
    (("ambient = 318.15", "ambient = warm"), "stack.ambient"),
    (("grid_rows = 1", "grid_rows = 0"), "grid_rows"),
    (("floorplan = one.flp", "floorplan = nope.flp"), "cannot read"),
])
def test_stack_config_errors(edit, needle):
    with pytest.raises(ConfigError, match=needle):
        parse_stack_config(ONE_LAYER.replace(*edit), resolver)


def test_malformed_ini_line_number():
    with pytest.raises(ConfigError) as info:
        parse_stack_config("[stack]\nambient 318\n", resolver, source="bad.ini")
    assert info.value.line == 2
    assert str(info.value).startswith("bad.ini: line 2")


def test_unknown_section():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_stack_config(ONE_LAYER + "\n[extras]\nx = 1\n", resolver)


def test_trace_must_match_floorplan():
    files = dict(FILES, **{"one.ptrace": "B\n1.0\n"})
    with pytest.raises(ConfigError, match="do not match"):
        parse_stack_config(ONE_LAYER, files.__getitem__)


def test_material_override():
    text = ONE_LAYER.replace("material = silicon", "material = diamond") + """
[material.diamond]
conductivity = 2000
volumetric_heat_capacity = 1.8e6
"""
    spec = parse_stack_config(text, resolver)
    assert spec.layers[0].material.conductivity == 2000.0


def test_mismatched_outlines():
    files = dict(FILES, **{"mem.flp": "M 0.003 0.002 0 0\n"})
    with pytest.raises(ConfigError, match="outline"):
        parse_stack_config(FOUR_LAYER.format(n=9), files.__getitem__)


def test_cooling_keys_on_solid_layer():
    text = ONE_LAYER.replace("interval = 1e-3", "interval = 1e-3\nflow_rate = 1e-7")
    with pytest.raises(ConfigError, match="microchannel"):
        parse_stack_config(text, resolver)


def test_error_message_format():
    err = ConfigError("bad", source="a.ini", line=3, field="layer.1.thickness")
    assert str(err) == "a.ini: line 3: layer.1.thickness: bad"
    assert isinstance(err, ValueError)
