"""Parsers and validated types for floorplans, power traces and stack configs.

Three text formats are understood, all SI units and all allowing ``#``
comments:

* floorplan: ``name width height left bottom`` per line (meters)
* power trace: a header of block names, then one row of watts per interval
* stack config: INI-style ``[stack]``, ``[layer.N]``, ``[material.NAME]``
  and ``[dtm]`` sections (``[sweep]``/``[die.NAME]`` are read by
  :mod:`stacktherm.sweep`)
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Callable, Iterable, Mapping

import numpy as np

from .dtm import DtmPolicy
from .errors import ConfigError

OUTLINE_TOL = 1e-9  # m
OVERLAP_TOL = 1e-12  # m^2
DEFAULT_NUSSELT = 3.66
DEFAULT_GRID = 64

LAYER_KINDS = ("active", "tim", "microchannel")
FLOW_DIRS = ("+x", "-x")

Resolver = Callable[[str], str]


# --------------------------------------------------------------------------
# floorplans

@dataclass(frozen=True)
class Block:
    name: str
    width: float
    height: float
    left: float
    bottom: float

    def __post_init__(self):
        vals = (self.width, self.height, self.left, self.bottom)
        if not all(math.isfinite(v) for v in vals):
            raise ConfigError(f"block {self.name!r} has a non-finite dimension")
        if self.width <= 0 or self.height <= 0:
            raise ConfigError(f"block {self.name!r} needs positive width and height")
        if self.left < 0 or self.bottom < 0:
            raise ConfigError(f"block {self.name!r} has a negative origin")

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def top(self) -> float:
        return self.bottom + self.height

    @property
    def area(self) -> float:
        return self.width * self.height


def overlap_area(a: Block, b: Block) -> float:
    dx = min(a.right, b.right) - max(a.left, b.left)
    dy = min(a.top, b.top) - max(a.bottom, b.bottom)
    if dx <= 0 or dy <= 0:
        return 0.0
    return dx * dy


def find_overlap(blocks: Iterable[Block]) -> tuple[int, int] | None:
    """Index pair of the first two overlapping blocks, or None.

    Sweeps blocks in order of their left edge so only x-intersecting
    candidates are compared.
    """
    blocks = list(blocks)
    order = sorted(range(len(blocks)), key=lambda i: (blocks[i].left, i))
    active: list[int] = []
    hits = []
    for i in order:
        b = blocks[i]
        active = [j for j in active if blocks[j].right > b.left]
        for j in active:
            if overlap_area(blocks[j], b) > OVERLAP_TOL:
                hits.append((min(i, j), max(i, j)))
        active.append(i)
    return min(hits, key=lambda p: (p[1], p[0])) if hits else None


@dataclass(frozen=True)
class Floorplan:
    blocks: tuple[Block, ...]
    die_width: float = field(init=False)
    die_height: float = field(init=False)

    def __post_init__(self):
        blocks = tuple(self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            raise ConfigError("floorplan has no blocks")
        seen = set()
        for b in blocks:
            if b.name in seen:
                raise ConfigError(f"duplicate block name {b.name!r}")
            seen.add(b.name)
        pair = find_overlap(blocks)
        if pair is not None:
            a, b = blocks[pair[0]], blocks[pair[1]]
            raise ConfigError(f"blocks {a.name!r} and {b.name!r} overlap "
                              f"({overlap_area(a, b):.3e} m^2)")
        object.__setattr__(self, "die_width", max(b.right for b in blocks))
        object.__setattr__(self, "die_height", max(b.top for b in blocks))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(b.name for b in self.blocks)

    def block(self, name: str) -> Block:
        for b in self.blocks:
            if b.name == name:
                return b
        raise KeyError(name)


def _strip_comment(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _parse_float(tok: str, what: str, *, source, line) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise ConfigError(f"{what}: {tok!r} is not a number",
                          source=source, line=line) from None
    if not math.isfinite(val):
        raise ConfigError(f"{what}: {tok!r} is not finite", source=source, line=line)
    return val


def parse_floorplan(text: str, source: str | None = None) -> Floorplan:
    blocks: list[Block] = []
    lines: list[int] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        toks = line.split()
        if len(toks) != 5:
            raise ConfigError(f"expected 'name width height left bottom', "
                              f"got {len(toks)} fields", source=source, line=lineno)
        name = toks[0]
        w, h, x, y = (_parse_float(t, f"block {name!r}", source=source, line=lineno)
                      for t in toks[1:])
        if any(b.name == name for b in blocks):
            raise ConfigError(f"duplicate block name {name!r}", source=source, line=lineno)
        try:
            blocks.append(Block(name, w, h, x, y))
        except ConfigError as exc:
            raise ConfigError(exc.message, source=source, line=lineno) from None
        lines.append(lineno)
    if not blocks:
        raise ConfigError("floorplan has no blocks", source=source)
    pair = find_overlap(blocks)
    if pair is not None:
        a, b = blocks[pair[0]], blocks[pair[1]]
        raise ConfigError(f"block {b.name!r} overlaps block {a.name!r} "
                          f"(line {lines[pair[0]]}, {overlap_area(a, b):.3e} m^2)",
                          source=source, line=lines[pair[1]])
    return Floorplan(tuple(blocks))


def format_floorplan(fp: Floorplan) -> str:
    return "".join(f"{b.name} {b.width!r} {b.height!r} {b.left!r} {b.bottom!r}\n"
                   for b in fp.blocks)


# --------------------------------------------------------------------------
# power traces

@dataclass(frozen=True, eq=False)
class PowerTrace:
    block_names: tuple[str, ...]
    interval: float
    samples: np.ndarray  # [step, block] watts

    def __post_init__(self):
        names = tuple(self.block_names)
        object.__setattr__(self, "block_names", names)
        if len(set(names)) != len(names):
            raise ConfigError("duplicate block name in power trace header")
        if not (math.isfinite(self.interval) and self.interval > 0):
            raise ConfigError("trace interval must be positive")
        samples = np.array(self.samples, dtype=float, copy=True)
        if samples.ndim != 2 or samples.shape[1] != len(names):
            raise ConfigError("samples must be a [step, block] matrix")
        if samples.shape[0] == 0:
            raise ConfigError("power trace is empty")
        if not np.all(np.isfinite(samples)) or np.any(samples < 0):
            raise ConfigError("power samples must be finite and non-negative")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)

    @property
    def num_steps(self) -> int:
        return self.samples.shape[0]

    def sample(self, step: int) -> dict[str, float]:
        return dict(zip(self.block_names, self.samples[step].tolist()))

    def reduce(self, statistic: str = "max") -> dict[str, float]:
        """Per-block max or mean over the whole trace."""
        if statistic == "max":
            vals = self.samples.max(axis=0)
        elif statistic == "mean":
            vals = self.samples.mean(axis=0)
        else:
            raise ValueError(f"unknown statistic {statistic!r}")
        return dict(zip(self.block_names, vals.tolist()))


def parse_power_trace(text: str, interval: float, source: str | None = None) -> PowerTrace:
    header = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip_comment(raw)
        if not line:
            continue
        toks = line.split()
        if header is None:
            if len(set(toks)) != len(toks):
                raise ConfigError("duplicate block name in header", source=source, line=lineno)
            header = toks
            continue
        if len(toks) != len(header):
            raise ConfigError(f"expected {len(header)} columns, got {len(toks)}",
                              source=source, line=lineno)
        row = [_parse_float(t, f"column {name!r}", source=source, line=lineno)
               for t, name in zip(toks, header)]
        for val, name in zip(row, header):
            if val < 0:
                raise ConfigError(f"negative power {val} for block {name!r}",
                                  source=source, line=lineno)
        rows.append(row)
    if header is None or not rows:
        raise ConfigError("power trace is empty", source=source)
    if not (math.isfinite(interval) and interval > 0):
        raise ConfigError("trace interval must be positive", source=source)
    return PowerTrace(tuple(header), float(interval), np.array(rows, dtype=float))


def format_power_trace(trace: PowerTrace) -> str:
    out = [" ".join(trace.block_names)]
    out += [" ".join(repr(v) for v in row) for row in trace.samples.tolist()]
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# materials

@dataclass(frozen=True)
class Material:
    name: str
    conductivity: float  # W/(m K)
    volumetric_heat_capacity: float  # J/(m^3 K)
    density: float | None = None  # kg/m^3, coolants only
    specific_heat: float | None = None  # J/(kg K), coolants only
    viscosity: float | None = None  # Pa s, coolants only

    def __post_init__(self):
        for attr in ("conductivity", "volumetric_heat_capacity",
                     "density", "specific_heat", "viscosity"):
            val = getattr(self, attr)
            if val is None and attr not in ("conductivity", "volumetric_heat_capacity"):
                continue
            if val is None or not (math.isfinite(val) and val > 0):
                raise ConfigError(f"{attr} must be finite and positive",
                                  field=f"material.{self.name}.{attr}")

    @property
    def is_coolant(self) -> bool:
        return self.density is not None and self.specific_heat is not None


_BUILTIN = {
    "silicon": Material("silicon", 130.0, 1.75e6),
    "tim": Material("tim", 4.0, 4.0e6),
    "copper": Material("copper", 400.0, 3.5e6),
    "water": Material("water", 0.6, 998.0 * 4184.0, density=998.0,
                      specific_heat=4184.0, viscosity=1.0e-3),
}


def builtin_materials() -> Mapping[str, Material]:
    return MappingProxyType(dict(_BUILTIN))


def lookup_material(name: str, table: Mapping[str, Material] | None = None) -> Material:
    table = builtin_materials() if table is None else table
    try:
        return table[name]
    except KeyError:
        raise ConfigError(f"unknown material {name!r}") from None


# --------------------------------------------------------------------------
# layers and stacks

@dataclass(frozen=True)
class CoolingParams:
    channel_width: float
    wall_width: float
    num_channels: int
    flow_rate: float  # total m^3/s, split evenly across channels
    inlet_temp: float  # K
    coolant: Material
    nusselt: float = DEFAULT_NUSSELT
    flow_dir: str = "+x"

    def __post_init__(self):
        if not self.channel_width > 0:
            raise ConfigError("must be positive", field="channel_width")
        # zero-width walls are allowed so a single channel can span the die
        if not self.wall_width >= 0:
            raise ConfigError("must be non-negative", field="wall_width")
        if int(self.num_channels) != self.num_channels or self.num_channels < 1:
            raise ConfigError("must be an integer >= 1", field="num_channels")
        if not (math.isfinite(self.flow_rate) and self.flow_rate >= 0):
            raise ConfigError("must be finite and >= 0", field="flow_rate")
        if not (math.isfinite(self.inlet_temp) and self.inlet_temp > 0):
            raise ConfigError("must be a positive kelvin value", field="inlet_temp")
        if not self.coolant.is_coolant:
            raise ConfigError(f"material {self.coolant.name!r} lacks density/specific_heat",
                              field="coolant")
        if not self.nusselt > 0:
            raise ConfigError("must be positive", field="nusselt")
        if self.flow_dir not in FLOW_DIRS:
            raise ConfigError(f"must be one of {FLOW_DIRS}", field="flow_dir")

    @property
    def pattern_height(self) -> float:
        n = self.num_channels
        return n * self.channel_width + (n + 1) * self.wall_width


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    thickness: float
    material: Material
    floorplan: Floorplan | None = None
    power: PowerTrace | None = None
    cooling: CoolingParams | None = None
    name: str = ""

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ConfigError(f"kind must be one of {LAYER_KINDS}", field="kind")
        if not (math.isfinite(self.thickness) and self.thickness > 0):
            raise ConfigError("must be positive", field="thickness")
        if self.kind == "active":
            if self.floorplan is None:
                raise ConfigError("active layers need a floorplan", field="floorplan")
            if self.power is None:
                raise ConfigError("active layers need a power trace", field="power")
            fp_names, tr_names = set(self.floorplan.names), set(self.power.block_names)
            if fp_names != tr_names:
                missing = sorted(fp_names - tr_names)
                extra = sorted(tr_names - fp_names)
                raise ConfigError(f"power trace blocks do not match floorplan "
                                  f"(missing {missing}, unknown {extra})", field="power")
        elif self.power is not None:
            raise ConfigError("only active layers take a power trace", field="power")
        if self.kind == "microchannel":
            if self.cooling is None:
                raise ConfigError("microchannel layers need cooling parameters",
                                  field="channel_width")
        elif self.cooling is not None:
            raise ConfigError("only microchannel layers take cooling parameters",
                              field="channel_width")


@dataclass(frozen=True)
class StackSpec:
    """Ordered layers (index 0 = bottom) plus boundary and grid settings.

    ``sink_resistance_top``/``boundary_bottom`` are K/W, or None when
    adiabatic. The die outline is derived from the layer floorplans.
    """
    layers: tuple[LayerSpec, ...]
    ambient: float = 318.15
    sink_resistance_top: float | None = None
    boundary_bottom: float | None = None
    grid_rows: int = DEFAULT_GRID
    grid_cols: int = DEFAULT_GRID
    die_width: float = field(init=False)
    die_height: float = field(init=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ConfigError("stack has no layers", field="layer")
        if not (math.isfinite(self.ambient) and self.ambient > 0):
            raise ConfigError("must be a positive kelvin value", field="stack.ambient")
        for key in ("grid_rows", "grid_cols"):
            val = getattr(self, key)
            if int(val) != val or val < 1:
                raise ConfigError("must be an integer >= 1", field=f"stack.{key}")
        for key in ("sink_resistance_top", "boundary_bottom"):
            val = getattr(self, key)
            if val is not None and not (math.isfinite(val) and val > 0):
                raise ConfigError("must be positive or 'adiabatic'", field=f"stack.{key}")

        plans = [(i, l.floorplan) for i, l in enumerate(layers) if l.floorplan is not None]
        if not plans:
            raise ConfigError("no layer carries a floorplan; die outline unknown",
                              field="layer")
        w, h = plans[0][1].die_width, plans[0][1].die_height
        for i, fp in plans[1:]:
            if abs(fp.die_width - w) > OUTLINE_TOL or abs(fp.die_height - h) > OUTLINE_TOL:
                raise ConfigError(f"die outline {fp.die_width:g} x {fp.die_height:g} m "
                                  f"differs from {w:g} x {h:g} m",
                                  field=f"layer.{i}.floorplan")
        object.__setattr__(self, "die_width", w)
        object.__setattr__(self, "die_height", h)

        intervals = {l.power.interval for l in layers if l.power is not None}
        if len(intervals) > 1:
            raise ConfigError(f"power traces use different intervals {sorted(intervals)}",
                              field="interval")

        cooled = False
        for i, layer in enumerate(layers):
            c = layer.cooling
            if c is None:
                continue
            if c.pattern_height > h + OUTLINE_TOL:
                raise ConfigError(f"{c.num_channels} channels of {c.channel_width:g} m "
                                  f"with walls of {c.wall_width:g} m need "
                                  f"{c.pattern_height:g} m > die height {h:g} m",
                                  field=f"layer.{i}.num_channels")
            cooled = cooled or c.flow_rate > 0
        if self.sink_resistance_top is None and self.boundary_bottom is None and not cooled:
            raise ConfigError("every boundary is adiabatic and no channel has flow; "
                              "steady state is ill-posed", field="stack")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def traces(self) -> dict[int, PowerTrace]:
        return {i: l.power for i, l in enumerate(self.layers) if l.power is not None}


# --------------------------------------------------------------------------
# unified config file

_STACK_KEYS = {"ambient", "grid_rows", "grid_cols", "sink_resistance_top", "boundary_bottom"}
LAYER_KEYS = {"kind", "thickness", "material", "floorplan", "power", "interval",
              "channel_width", "wall_width", "num_channels", "flow_rate",
              "inlet_temp", "coolant", "nusselt", "flow_dir", "name"}
_MATERIAL_KEYS = {"conductivity", "volumetric_heat_capacity", "density",
                  "specific_heat", "viscosity"}
_DTM_KEYS = {"trigger_temp", "release_temp", "throttle_factor", "control_interval"}
_OTHER_SECTIONS = ("sweep", "die.")


def file_resolver(base_dir: str | Path) -> Resolver:
    base = Path(base_dir)

    def resolve(name: str) -> str:
        return (base / name).read_text()
    return resolve


def read_ini(text: str, source: str | None = None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",),
                                   inline_comment_prefixes=("#",), delimiters=("=",),
                                   default_section="__none__")
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("expected a [section] header", source=source,
                          line=exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError("malformed line (expected 'key = value')", source=source,
                          line=lineno) from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ConfigError(exc.message.split(": ", 1)[-1], source=source,
                          line=exc.lineno) from None
    return cp


class _Section:
    """Typed accessors over one INI section that report field locators."""

    def __init__(self, cp, name: str, source: str | None, allowed: set[str]):
        self.name = name
        self.source = source
        self.sec = cp[name]
        unknown = sorted(set(self.sec) - allowed)
        if unknown:
            self.error(f"unknown key(s) {unknown}", unknown[0])

    def error(self, message: str, key: str | None = None):
        loc = f"{self.name}.{key}" if key else self.name
        raise ConfigError(message, source=self.source, field=loc)

    def has(self, key: str) -> bool:
        return key in self.sec

    def str(self, key: str, default=None):
        if key not in self.sec:
            if default is None:
                self.error("missing required key", key)
            return default
        return self.sec[key].strip()

    def float(self, key: str, default=None, *, allow_adiabatic=False):
        raw = self.str(key, default=None if default is None else "")
        if raw == "" and default is not None:
            return default
        if allow_adiabatic and raw.lower() == "adiabatic":
            return None
        try:
            val = float(raw)
        except ValueError:
            self.error(f"{raw!r} is not a number", key)
        if not math.isfinite(val):
            self.error(f"{raw!r} is not finite", key)
        return val

    def int(self, key: str, default=None) -> int:
        raw = self.str(key, default=None if default is None else str(default))
        try:
            return int(raw)
        except ValueError:
            self.error(f"{raw!r} is not an integer", key)


def parse_materials(cp, source=None) -> dict[str, Material]:
    table = dict(_BUILTIN)
    for name in cp.sections():
        if not name.startswith("material."):
            continue
        sec = _Section(cp, name, source, _MATERIAL_KEYS)
        mat_name = name.split(".", 1)[1]
        base = table.get(mat_name)
        vals = {}
        for key in _MATERIAL_KEYS:
            if sec.has(key):
                vals[key] = sec.float(key)
            elif base is not None:
                vals[key] = getattr(base, key)
        if "volumetric_heat_capacity" not in vals and "density" in vals \
                and "specific_heat" in vals and base is None:
            vals["volumetric_heat_capacity"] = vals["density"] * vals["specific_heat"]
        for key in ("conductivity", "volumetric_heat_capacity"):
            if key not in vals:
                sec.error("missing required key", key)
        try:
            table[mat_name] = Material(mat_name, **vals)
        except ConfigError as exc:
            raise ConfigError(exc.message, source=source, field=exc.field) from None
    return table


def _fetch(resolver: Resolver, name: str, sec: _Section, key: str) -> str:
    try:
        return resolver(name)
    except (OSError, KeyError) as exc:
        sec.error(f"cannot read {name!r}: {exc}", key)


def parse_layer(sec: _Section, materials: Mapping[str, Material],
                resolver: Resolver, ambient: float) -> LayerSpec:
    """Build one LayerSpec from a ``[layer.N]``-style section."""
    kind = sec.str("kind")
    if kind not in LAYER_KINDS:
        sec.error(f"kind must be one of {LAYER_KINDS}", "kind")

    def material(key, default=None):
        name = sec.str(key, default)
        if name not in materials:
            sec.error(f"unknown material {name!r}", key)
        return materials[name]

    floorplan = power = cooling = None
    if sec.has("floorplan"):
        fname = sec.str("floorplan")
        floorplan = parse_floorplan(_fetch(resolver, fname, sec, "floorplan"), source=fname)
    if sec.has("power"):
        pname = sec.str("power")
        interval = sec.float("interval")
        if interval <= 0:
            sec.error("must be positive", "interval")
        power = parse_power_trace(_fetch(resolver, pname, sec, "power"), interval,
                                  source=pname)
    elif sec.has("interval") and kind != "active":
        sec.error("interval given without a power trace", "interval")

    cooling_keys = LAYER_KEYS & {"channel_width", "wall_width", "num_channels", "flow_rate",
                                 "inlet_temp", "coolant", "nusselt", "flow_dir"}
    if kind == "microchannel":
        try:
            cooling = CoolingParams(
                channel_width=sec.float("channel_width"),
                wall_width=sec.float("wall_width"),
                num_channels=sec.int("num_channels"),
                flow_rate=sec.float("flow_rate"),
                inlet_temp=sec.float("inlet_temp", ambient),
                coolant=material("coolant", "water"),
                nusselt=sec.float("nusselt", DEFAULT_NUSSELT),
                flow_dir=sec.str("flow_dir", "+x"),
            )
        except ConfigError as exc:
            if exc.source is not None:
                raise
            sec.error(exc.message, exc.field)
    else:
        stray = sorted(k for k in cooling_keys if sec.has(k))
        if stray:
            sec.error("cooling keys are only valid on microchannel layers", stray[0])

    try:
        return LayerSpec(kind=kind, thickness=sec.float("thickness"),
                         material=material("material"), floorplan=floorplan,
                         power=power, cooling=cooling, name=sec.str("name", sec.name))
    except ConfigError as exc:
        if exc.source is not None:
            raise
        sec.error(exc.message, exc.field)


def _check_sections(cp, source):
    for name in cp.sections():
        if name in ("stack", "dtm") or name.startswith(("layer.", "material.")) \
                or name.startswith(_OTHER_SECTIONS):
            continue
        raise ConfigError(f"unknown section [{name}]", source=source, field=name)


def parse_stack_config(text: str, resolver: Resolver, source: str | None = None) -> StackSpec:
    cp = read_ini(text, source)
    return stack_from_ini(cp, resolver, source)


def stack_from_ini(cp, resolver: Resolver, source: str | None = None) -> StackSpec:
    _check_sections(cp, source)
    if not cp.has_section("stack"):
        raise ConfigError("missing [stack] section", source=source, field="stack")
    st = _Section(cp, "stack", source, _STACK_KEYS)
    ambient = st.float("ambient")
    materials = parse_materials(cp, source)

    indices = []
    for name in cp.sections():
        if name.startswith("layer."):
            idx = name.split(".", 1)[1]
            if not idx.isdigit():
                raise ConfigError("layer sections are [layer.N] with integer N",
                                  source=source, field=name)
            indices.append(int(idx))
    if not indices:
        raise ConfigError("no [layer.N] sections", source=source, field="layer")
    if sorted(indices) != list(range(len(indices))):
        raise ConfigError(f"layer indices must be contiguous from 0, got {sorted(indices)}",
                          source=source, field="layer")
    layers = []
    for i in range(len(indices)):
        sec = _Section(cp, f"layer.{i}", source, LAYER_KEYS)
        layers.append(parse_layer(sec, materials, resolver, ambient))

    # an absent boundary key means that face is adiabatic
    sinks = {key: st.float(key, allow_adiabatic=True) if st.has(key) else None
             for key in ("sink_resistance_top", "boundary_bottom")}
    try:
        return StackSpec(
            layers=tuple(layers), ambient=ambient, **sinks,
            grid_rows=st.int("grid_rows", DEFAULT_GRID),
            grid_cols=st.int("grid_cols", DEFAULT_GRID),
        )
    except ConfigError as exc:
        if exc.source is not None:
            raise
        raise ConfigError(exc.message, source=source, field=exc.field) from None


def dtm_from_ini(cp, source: str | None = None) -> DtmPolicy | None:
    if not cp.has_section("dtm"):
        return None
    sec = _Section(cp, "dtm", source, _DTM_KEYS)
    try:
        return DtmPolicy(
            trigger_temp=sec.float("trigger_temp"),
            release_temp=sec.float("release_temp"),
            throttle_factor=sec.float("throttle_factor", 0.5),
            control_interval=sec.float("control_interval") if sec.has("control_interval")
            else None,
        )
    except ConfigError as exc:
        if exc.source is not None:
            raise
        raise ConfigError(exc.message, source=source, field=exc.field) from None


def load_stack(path: str | Path) -> StackSpec:
    path = Path(path)
    return parse_stack_config(path.read_text(), file_resolver(path.parent), source=str(path))
