"""Block statistics, CSV grids, PPM heat maps and run summaries.

All human-facing values are Celsius. Grids are written top row (max y)
first so that CSV and PPM read like an image of the die.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Mapping, TextIO

import numpy as np

from .errors import ConfigError
from .grid import BlockKey, ThermalGridModel
from .microchannel import pressure_drop
from .solver import SimResult

KELVIN_OFFSET = 273.15


def to_celsius(kelvin):
    return np.asarray(kelvin) - KELVIN_OFFSET


@dataclass(frozen=True)
class BlockStats:
    name: str
    layer: int
    mean_temp: float  # Celsius
    max_temp: float  # Celsius
    area: float  # m^2
    power: float  # W


def aggregate_blocks(model: ThermalGridModel, field: np.ndarray,
                     block_power: Mapping[BlockKey, float] | None = None) -> list[BlockStats]:
    """Area-weighted mean and max temperature of every active block."""
    field = np.asarray(field, dtype=float)
    if field.shape != (model.n_cells,):
        raise ValueError(f"field has {field.size} cells, model has {model.n_cells}")
    block_power = block_power or {}
    out = []
    for key in model.block_keys:
        layer, name = key
        cells = model.power_map[key]
        idx = np.array([c.flat(model.rows, model.cols) for c, _ in cells])
        frac = np.array([f for _, f in cells])
        out.append(BlockStats(
            name=name, layer=layer,
            mean_temp=float(np.dot(frac, field[idx])) - KELVIN_OFFSET,
            max_temp=float(field[idx].max()) - KELVIN_OFFSET,
            area=model.spec.layers[layer].floorplan.block(name).area,
            power=float(block_power.get(key, 0.0)),
        ))
    return out


def result_block_stats(result: SimResult, index: int = -1) -> list[BlockStats]:
    power = None
    if result.block_power is not None:
        power = dict(zip(result.model.block_keys, result.block_power[index].tolist()))
    return aggregate_blocks(result.model, result.temperatures[index], power)


def write_block_stats(stats, stream: TextIO) -> None:
    stream.write("layer,block,area_m2,power_w,mean_c,max_c\n")
    for s in stats:
        stream.write(f"{s.layer},{s.name},{s.area:.6e},{s.power:.6f},"
                     f"{s.mean_temp:.6f},{s.max_temp:.6f}\n")


# --------------------------------------------------------------------------
# grids and heat maps

def _celsius_text(model: ThermalGridModel, field: np.ndarray, layer: int) -> list[list[str]]:
    if not 0 <= layer < model.num_layers:
        raise ValueError(f"layer {layer} out of range")
    grid = model.layer_field(field, layer)[::-1]
    return [[f"{v - KELVIN_OFFSET:.6f}" for v in row] for row in grid.tolist()]


def emit_csv_grid(model: ThermalGridModel, field: np.ndarray, layer: int,
                  stream: TextIO) -> None:
    for row in _celsius_text(model, field, layer):
        stream.write(",".join(row) + "\n")


def parse_csv_grid(text: str, source: str | None = None) -> np.ndarray:
    """Read a Celsius grid written by :func:`emit_csv_grid` (rows top first)."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rows.append([float(tok) for tok in line.split(",")])
        except ValueError:
            raise ConfigError("non-numeric CSV value", source=source, line=lineno) from None
        if len(rows[-1]) != len(rows[0]):
            raise ConfigError("ragged CSV row", source=source, line=lineno)
    if not rows:
        raise ConfigError("empty CSV grid", source=source)
    return np.array(rows)


def heatmap_colors(celsius: np.ndarray, value_range: tuple[float, float] | None = None
                   ) -> np.ndarray:
    """Blue (cold) to red (hot) colours, shape ``[rows, cols, 3]``."""
    celsius = np.asarray(celsius, dtype=float)
    lo, hi = value_range if value_range is not None else (celsius.min(), celsius.max())
    if hi == lo:
        t = np.zeros_like(celsius)
    else:
        t = np.clip((celsius - lo) / (hi - lo), 0.0, 1.0)
    red = np.floor(255.0 * t + 0.5).astype(int)
    blue = np.floor(255.0 * (1.0 - t) + 0.5).astype(int)
    return np.stack([red, np.zeros_like(red), blue], axis=-1)


def write_ppm(celsius: np.ndarray, stream: TextIO,
              value_range: tuple[float, float] | None = None) -> None:
    """Write an ASCII P3 image, one pixel per grid value, first row on top."""
    colors = heatmap_colors(celsius, value_range)
    rows, cols = colors.shape[:2]
    stream.write(f"P3\n{cols} {rows}\n255\n")
    for row in colors:
        stream.write(" ".join(f"{r} {g} {b}" for r, g, b in row.tolist()) + "\n")


def emit_ppm_heatmap(model: ThermalGridModel, field: np.ndarray, layer: int,
                     stream: TextIO, value_range: tuple[float, float] | None = None) -> None:
    # colour from the same 6-decimal values the CSV carries, so rendering a
    # CSV reproduces this image byte for byte
    text = _celsius_text(model, field, layer)
    write_ppm(np.array([[float(v) for v in row] for row in text]), stream, value_range)


def render_csv_to_ppm(csv_text: str, stream: TextIO,
                      value_range: tuple[float, float] | None = None,
                      source: str | None = None) -> None:
    write_ppm(parse_csv_grid(csv_text, source), stream, value_range)


# --------------------------------------------------------------------------
# summaries

def channel_outlets(result: SimResult, index: int = -1) -> dict[int, list[float]]:
    """Mixed-mean outlet temperature (K) of every channel, keyed by layer."""
    field = result.temperatures[index]
    model = result.model
    out: dict[int, list[float]] = {}
    for layer, layout in sorted(model.layouts.items()):
        temps = []
        for ch, rows in enumerate(layout.channel_rows):
            last = layout.column_order[-1]
            cells = [(layer * model.rows + r) * model.cols + last for r in rows]
            temps.append(float(np.mean(field[cells])))
        out[layer] = temps
    return out


def run_summary(result: SimResult) -> str:
    model = result.model
    spec = model.spec
    buf = io.StringIO()
    w = buf.write
    mode = "steady" if result.is_steady else f"transient, {len(result.times)} intervals"
    w(f"stack: {spec.num_layers} layers, grid {model.rows}x{model.cols}, "
      f"die {spec.die_width * 1e3:.3f} x {spec.die_height * 1e3:.3f} mm ({mode})\n")
    w(f"ambient: {spec.ambient - KELVIN_OFFSET:.2f} C\n\n")

    field = result.final
    w("layer  kind          name                 peak_c      mean_c\n")
    for l, layer in enumerate(spec.layers):
        lf = model.layer_field(field, l)
        w(f"{l:<6} {layer.kind:<13} {layer.name[:20]:<20} "
          f"{lf.max() - KELVIN_OFFSET:>10.3f}  {lf.mean() - KELVIN_OFFSET:>10.3f}\n")

    if not result.is_steady:
        step, cell = np.unravel_index(np.argmax(result.temperatures), result.temperatures.shape)
        c = model.cell(cell)
        w(f"\ntransient peak: {result.peak - KELVIN_OFFSET:.3f} C at t = "
          f"{result.times[step]:.6g} s (layer {c.layer}, row {c.row}, col {c.col})\n")
        if result.dtm_log:
            n_thr = sum(e.action == "throttle" for e in result.dtm_log)
            w(f"dtm: {n_thr} throttle / {len(result.dtm_log) - n_thr} release events\n")

    if model.block_keys:
        hot = int(np.argmax(result.block_max[-1]))
        layer, name = model.block_keys[hot]
        w(f"\nhottest block: {name} (layer {layer}) max "
          f"{result.block_max[-1][hot] - KELVIN_OFFSET:.3f} C, mean "
          f"{result.block_mean[-1][hot] - KELVIN_OFFSET:.3f} C\n")

    eb = result.energy_balance
    if eb is not None:
        w(f"\nenergy balance: in {eb.power_in:.6f} W, sink {eb.sink_out:.6f} W")
        if model.layouts:
            w(f", coolant {eb.coolant_out:.6f} W")
        w(f", residual {eb.residual:.3e} W\n")

    if model.layouts:
        w("\ncooling:\n")
        pump_total = 0.0
        outlets = channel_outlets(result)
        for l, temps in outlets.items():
            layer = spec.layers[l]
            c = layer.cooling
            w(f"  layer {l}: {c.num_channels} channels, flow {c.flow_rate:.4g} m^3/s, "
              f"inlet {c.inlet_temp - KELVIN_OFFSET:.3f} C\n")
            w("    outlet_c: " + " ".join(f"{t - KELVIN_OFFSET:.3f}" for t in temps) + "\n")
            dp = pressure_drop(layer, spec.die_width)
            if dp is not None:
                w(f"    pressure drop {dp[0]:.4g} Pa per channel, pumping power {dp[1]:.4g} W\n")
                pump_total += dp[1]
        w(f"  total pumping power: {pump_total:.4g} W\n")
    return buf.getvalue()
