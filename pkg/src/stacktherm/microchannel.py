"""Fluid-cell layout and convective/advective terms for microchannel layers.

Channels run along x and repeat along y. A grid row is fluid when its
y-centre falls inside a channel span; each fluid row of a channel is an
independent upwind stream carrying an equal share of the channel's mass
flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import LayerSpec
from .errors import ConfigError


@dataclass(frozen=True)
class ChannelLayout:
    spans: tuple[tuple[float, float], ...]  # (y_lo, y_hi) per channel, m
    channel_rows: tuple[tuple[int, ...], ...]  # grid rows captured by each channel
    column_order: tuple[int, ...]  # upstream -> downstream
    hydraulic_diameter: float  # m
    h_conv: float  # W/(m^2 K)
    per_channel_mass_flow: float  # kg/s
    cp: float  # coolant J/(kg K)
    density: float  # coolant kg/m^3
    inlet_temp: float  # K
    coolant_conductivity: float

    @property
    def fluid_rows(self) -> frozenset[int]:
        return frozenset(r for rows in self.channel_rows for r in rows)

    @property
    def row_mass_flow(self) -> tuple[float, ...]:
        """Mass flow of each captured row's stream, per channel."""
        return tuple(self.per_channel_mass_flow / len(rows) for rows in self.channel_rows)

    def streams(self, layer: int, rows: int, cols: int):
        """Yield ``(channel, flat cell indices upstream->downstream, mass flow)``."""
        order = np.asarray(self.column_order)
        for ch, ch_rows in enumerate(self.channel_rows):
            mdot = self.per_channel_mass_flow / len(ch_rows)
            for r in ch_rows:
                yield ch, (layer * rows + r) * cols + order, mdot


def hydraulic_diameter(channel_width: float, thickness: float) -> float:
    return 2.0 * channel_width * thickness / (channel_width + thickness)


def layout_channels(layer: LayerSpec, grid_rows: int, grid_cols: int,
                    die_width: float, die_height: float) -> ChannelLayout:
    if layer.kind != "microchannel" or layer.cooling is None:
        raise ValueError("layout_channels needs a microchannel layer")
    c = layer.cooling
    cell_h = die_height / grid_rows
    offset = 0.5 * (die_height - c.pattern_height)
    centres = (np.arange(grid_rows) + 0.5) * cell_h
    # a centre sitting on a span edge must not flip sides through rounding
    slack = 1e-9 * cell_h

    spans = []
    channel_rows = []
    for k in range(c.num_channels):
        lo = offset + c.wall_width + k * (c.channel_width + c.wall_width)
        hi = lo + c.channel_width
        inside = (centres >= lo - slack) & (centres < hi - slack)
        rows = tuple(int(r) for r in np.nonzero(inside)[0])
        if not rows:
            need = math.ceil(die_height / c.channel_width)
            raise ConfigError(f"channel {k} (y in [{lo:.4g}, {hi:.4g}] m) contains no "
                              f"grid-row centre at cell height {cell_h:.4g} m; raise "
                              f"grid_rows to at least {need}", field="grid_rows")
        spans.append((lo, hi))
        channel_rows.append(rows)

    cols = range(grid_cols) if c.flow_dir == "+x" else range(grid_cols - 1, -1, -1)
    dh = hydraulic_diameter(c.channel_width, layer.thickness)
    layout = ChannelLayout(
        spans=tuple(spans),
        channel_rows=tuple(channel_rows),
        column_order=tuple(cols),
        hydraulic_diameter=dh,
        h_conv=c.nusselt * c.coolant.conductivity / dh,
        per_channel_mass_flow=c.coolant.density * c.flow_rate / c.num_channels,
        cp=c.coolant.specific_heat,
        density=c.coolant.density,
        inlet_temp=c.inlet_temp,
        coolant_conductivity=c.coolant.conductivity,
    )
    return layout


def pressure_drop(layer: LayerSpec, die_width: float) -> tuple[float, float] | None:
    """Laminar Poiseuille estimate: (pressure drop per channel Pa, pumping power W).

    Informational only; None when the coolant has no viscosity.
    """
    c = layer.cooling
    if c is None or c.coolant.viscosity is None:
        return None
    dh = hydraulic_diameter(c.channel_width, layer.thickness)
    velocity = c.flow_rate / c.num_channels / (c.channel_width * layer.thickness)
    dp = 32.0 * c.coolant.viscosity * die_width * velocity / dh ** 2
    return dp, dp * c.flow_rate


def contribute_fluid_terms(asm, layout: ChannelLayout, layer: int) -> None:
    """Add every coupling that touches a fluid cell of ``layer`` to ``asm``.

    ``asm`` is the grid assembler (see ``stacktherm.grid._Assembler``); solid
    to solid conduction is already in place.
    """
    R, C = asm.rows, asm.cols
    w, h = asm.cell_width, asm.cell_height
    t = asm.thickness[layer]
    hc = layout.h_conv
    base = layer * R * C
    fluid_rows = sorted(layout.fluid_rows)
    row_of_channel = {r: ch for ch, rows in enumerate(layout.channel_rows) for r in rows}
    cols = np.arange(C)

    # (a) lateral y couplings inside the layer
    face_y = w * t
    r_solid_y = 0.5 * h / asm.conductivity[layer]
    r_fluid_y = 0.5 * h / layout.coolant_conductivity
    for r in fluid_rows:
        for nb in (r - 1, r + 1):
            if not 0 <= nb < R:
                continue
            i = base + r * C + cols
            j = base + nb * C + cols
            if nb in row_of_channel:
                if nb < r:
                    continue  # fluid pair, added once from the lower row
                g = face_y / (r_fluid_y + r_fluid_y)
            else:
                g = face_y / (1.0 / hc + r_solid_y)
            asm.add_conduction(i, j, np.full(C, g))

    # (b) vertical couplings and boundary paths for fluid cells
    face_z = w * h
    for r in fluid_rows:
        i = base + r * C + cols
        for nb_layer in (layer - 1, layer + 1):
            if not 0 <= nb_layer < asm.num_layers:
                continue
            j = nb_layer * R * C + r * C + cols
            nb_fluid = asm.fluid[j]
            r_nb = np.where(nb_fluid, 1.0 / asm.h_conv[nb_layer],
                            0.5 * asm.thickness[nb_layer] / asm.conductivity[nb_layer])
            g = face_z / (1.0 / hc + r_nb)
            # fluid-fluid pairs across two channel layers are added by the lower one
            keep = ~nb_fluid | (nb_layer > layer)
            asm.add_conduction(i[keep], j[keep], g[keep])
        for res in asm.boundary_cell_resistance(layer):
            g = 1.0 / (1.0 / (hc * face_z) + res)
            asm.add_boundary(i, np.full(C, g))

    # (c) upwind advection and inlet coupling
    if layout.per_channel_mass_flow > 0:
        for _, cells, mdot in layout.streams(layer, R, C):
            mcp = mdot * layout.cp
            asm.add_inlet(cells[0], mcp, layout.inlet_temp)
            asm.add_advection(cells[1:], cells[:-1], mcp)

    # (d) fluid heat capacity
    for r in fluid_rows:
        asm.capacitance[base + r * C + cols] = layout.density * layout.cp * w * h * t
