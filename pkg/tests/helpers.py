"""Small stack builders shared by the test modules."""

from __future__ import annotations

import numpy as np

from stacktherm import (Block, CoolingParams, Floorplan, LayerSpec, PowerTrace, StackSpec,
                        lookup_material)

SILICON = lookup_material("silicon")
TIM = lookup_material("tim")
WATER = lookup_material("water")


def outline(width=2e-3, height=2e-3, name="die") -> Floorplan:
    return Floorplan((Block(name, width, height, 0.0, 0.0),))


def tiled_floorplan(nx: int, ny: int, width=2e-3, height=2e-3, prefix="b") -> Floorplan:
    bw, bh = width / nx, height / ny
    return Floorplan(tuple(Block(f"{prefix}{j}_{i}", bw, bh, i * bw, j * bh)
                           for j in range(ny) for i in range(nx)))


def trace_for(fp: Floorplan, rows, interval=1e-3) -> PowerTrace:
    return PowerTrace(fp.names, interval, np.atleast_2d(np.asarray(rows, dtype=float)))


def active(fp: Floorplan, watts, thickness=150e-6, name="die", material=SILICON,
           interval=1e-3) -> LayerSpec:
    """Active layer; ``watts`` is a per-block row, a [step, block] matrix or a scalar."""
    w = np.asarray(watts, dtype=float)
    if w.ndim == 0:
        w = np.full(len(fp.blocks), float(w))
    return LayerSpec("active", thickness, material, floorplan=fp,
                     power=trace_for(fp, w, interval), name=name)


def tim(thickness=10e-6, name="tim") -> LayerSpec:
    return LayerSpec("tim", thickness, TIM, name=name)


def channel_layer(flow_rate, channel_width=100e-6, wall_width=100e-6, num_channels=5,
                  thickness=200e-6, inlet_temp=318.15, floorplan=None,
                  name="channels", flow_dir="+x") -> LayerSpec:
    cooling = CoolingParams(channel_width, wall_width, num_channels, flow_rate,
                            inlet_temp, WATER, flow_dir=flow_dir)
    return LayerSpec("microchannel", thickness, SILICON, floorplan=floorplan,
                     cooling=cooling, name=name)


def random_stack(rng: np.random.Generator, max_cells: int = 4000, cooled=None,
                 max_side: int = 12) -> StackSpec:
    """A random, well-posed stack of up to five layers within ``max_cells`` cells."""
    if cooled is None:
        cooled = bool(rng.integers(0, 2))
    n_layers = int(rng.integers(1, 5))
    rows = int(rng.integers(4, max_side + 1))
    cols = int(rng.integers(4, max_side + 1))
    while rows * cols * (n_layers + cooled) > max_cells:
        if n_layers > 1:
            n_layers -= 1
        else:
            rows, cols = max(4, rows // 2), max(4, cols // 2)
    cell_h = 2e-3 / rows

    layers = []
    for l in range(n_layers):
        kind = "active" if l == 0 else rng.choice(["active", "tim", "bulk"])
        if kind == "active":
            fp = tiled_floorplan(int(rng.integers(1, 4)), int(rng.integers(1, 4)),
                                 prefix=f"l{l}b")
            layers.append(active(fp, rng.uniform(0.0, 3.0, len(fp.blocks)),
                                 thickness=float(rng.uniform(50e-6, 300e-6)), name=f"d{l}"))
        elif kind == "tim":
            layers.append(tim(float(rng.uniform(5e-6, 40e-6)), name=f"t{l}"))
        else:
            # bulk silicon spacer, modelled as a tim-kind layer
            layers.append(LayerSpec("tim", float(rng.uniform(50e-6, 300e-6)), SILICON,
                                    name=f"s{l}"))
    if cooled:
        # channels at least one cell tall always capture a row centre
        n_ch = int(rng.integers(1, max(2, rows // 2)))
        width = cell_h * float(rng.uniform(1.0, 1.5))
        wall = max(0.0, (2e-3 - n_ch * width) / (n_ch + 1) * float(rng.uniform(0.2, 1.0)))
        pos = int(rng.integers(0, len(layers) + 1))
        layers.insert(pos, channel_layer(float(rng.uniform(1e-8, 5e-7)), width, wall, n_ch,
                                         thickness=float(rng.uniform(100e-6, 300e-6)),
                                         inlet_temp=float(rng.uniform(300.0, 320.0)),
                                         name=f"c{pos}",
                                         flow_dir=str(rng.choice(["+x", "-x"]))))
        sink = None if rng.random() < 0.3 else float(rng.uniform(0.2, 5.0))
    else:
        sink = float(rng.uniform(0.2, 5.0))
    bottom = None if rng.random() < 0.5 else float(rng.uniform(1.0, 50.0))
    return StackSpec(tuple(layers), ambient=float(rng.uniform(290.0, 330.0)),
                     sink_resistance_top=sink, boundary_bottom=bottom,
                     grid_rows=rows, grid_cols=cols)
