"""Finite-volume discretisation of a layer stack into a conductance network.

Cells are indexed ``layer * rows * cols + row * cols + col`` with row 0 at
the bottom (y = 0) and column 0 at the left (x = 0). The assembled matrix
uses the positive-diagonal convention: off-diagonals hold ``-g`` for each
coupling ``g`` and the diagonal holds the sum of couplings plus boundary
and advection terms, so steady temperatures satisfy ``G T = p + b``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np
import scipy.sparse as sp

from .config import Floorplan, StackSpec
from .microchannel import ChannelLayout, contribute_fluid_terms, layout_channels

BlockKey = tuple[int, str]

# overlaps below this fraction of a block are floating-point residue
_FRACTION_FLOOR = 1e-12


class CellId(NamedTuple):
    layer: int
    row: int
    col: int

    def flat(self, rows: int, cols: int) -> int:
        return (self.layer * rows + self.row) * cols + self.col

    @classmethod
    def from_flat(cls, index: int, rows: int, cols: int) -> "CellId":
        layer, rem = divmod(int(index), rows * cols)
        row, col = divmod(rem, cols)
        return cls(layer, row, col)


class FluidStream(NamedTuple):
    layer: int
    channel: int
    cells: np.ndarray  # flat indices, upstream -> downstream
    mass_flow: float  # kg/s
    cp: float
    inlet_temp: float


@dataclass(frozen=True, eq=False)
class ThermalGridModel:
    spec: StackSpec
    rows: int
    cols: int
    cell_width: float
    cell_height: float
    conductance: sp.csr_matrix
    conduction: sp.csr_matrix  # symmetric part incl. boundary diagonal
    capacitance: np.ndarray  # J/K
    boundary_conductance: np.ndarray  # W/K to ambient, per cell
    boundary_injection: np.ndarray  # W
    fluid_mask: np.ndarray
    layouts: Mapping[int, ChannelLayout]
    streams: tuple[FluidStream, ...]
    power_map: Mapping[BlockKey, tuple[tuple[CellId, float], ...]]
    block_keys: tuple[BlockKey, ...]
    block_matrix: sp.csr_matrix  # [block, cell] area fractions

    @property
    def num_layers(self) -> int:
        return self.spec.num_layers

    @property
    def cells_per_layer(self) -> int:
        return self.rows * self.cols

    @property
    def n_cells(self) -> int:
        return self.num_layers * self.rows * self.cols

    @property
    def ambient(self) -> float:
        return self.spec.ambient

    @property
    def fluid_tags(self) -> frozenset[CellId]:
        return frozenset(CellId.from_flat(i, self.rows, self.cols)
                         for i in np.nonzero(self.fluid_mask)[0])

    @property
    def per_channel_mass_flow(self) -> dict[int, float]:
        return {l: lay.per_channel_mass_flow for l, lay in self.layouts.items()}

    @property
    def has_heat_path(self) -> bool:
        return bool(self.boundary_conductance.sum() > 0
                    or any(s.mass_flow > 0 for s in self.streams))

    def layer_field(self, field: np.ndarray, layer: int) -> np.ndarray:
        """View of one layer of a flat field as a ``[row, col]`` array."""
        n = self.cells_per_layer
        return np.asarray(field)[layer * n:(layer + 1) * n].reshape(self.rows, self.cols)

    def cell(self, index: int) -> CellId:
        return CellId.from_flat(index, self.rows, self.cols)


class _Assembler:
    """Triplet accumulator used while a model is under construction."""

    def __init__(self, spec: StackSpec):
        self.spec = spec
        self.rows, self.cols = spec.grid_rows, spec.grid_cols
        self.num_layers = spec.num_layers
        self.cell_width = spec.die_width / self.cols
        self.cell_height = spec.die_height / self.rows
        self.n = self.num_layers * self.rows * self.cols
        self.thickness = np.array([l.thickness for l in spec.layers])
        self.conductivity = np.array([l.material.conductivity for l in spec.layers])
        self.h_conv = np.full(self.num_layers, np.inf)
        self.fluid = np.zeros(self.n, dtype=bool)
        self.capacitance = np.zeros(self.n)
        self.bnd_g = np.zeros(self.n)
        self.injection = np.zeros(self.n)
        self.adv_diag = np.zeros(self.n)
        self._cond = ([], [], [])
        self._adv = ([], [], [])
        self.streams: list[FluidStream] = []

    def add_conduction(self, i, j, g):
        i, j, g = np.atleast_1d(i), np.atleast_1d(j), np.atleast_1d(g)
        if i.size:
            self._cond[0].append(i)
            self._cond[1].append(j)
            self._cond[2].append(g)

    def add_boundary(self, i, g):
        np.add.at(self.bnd_g, i, g)
        np.add.at(self.injection, i, np.asarray(g) * self.spec.ambient)

    def add_advection(self, cells, upstream, mcp):
        cells = np.atleast_1d(cells)
        self.adv_diag[cells] += mcp
        self._adv[0].append(cells)
        self._adv[1].append(np.atleast_1d(upstream))
        self._adv[2].append(np.full(cells.size, -mcp))

    def add_inlet(self, cell, mcp, inlet_temp):
        self.adv_diag[cell] += mcp
        self.injection[cell] += mcp * inlet_temp

    def boundary_cell_resistance(self, layer: int) -> list[float]:
        """Per-cell share of the lumped boundary resistances touching ``layer``."""
        n_face = self.rows * self.cols
        out = []
        if layer == self.num_layers - 1 and self.spec.sink_resistance_top is not None:
            out.append(self.spec.sink_resistance_top * n_face)
        if layer == 0 and self.spec.boundary_bottom is not None:
            out.append(self.spec.boundary_bottom * n_face)
        return out

    def _matrix(self, parts, diag=None, symmetric=False):
        if parts[0]:
            i = np.concatenate(parts[0])
            j = np.concatenate(parts[1])
            v = np.concatenate(parts[2])
        else:
            i = j = np.zeros(0, dtype=int)
            v = np.zeros(0)
        if symmetric:
            d = np.zeros(self.n)
            np.add.at(d, i, v)
            np.add.at(d, j, v)
            i, j, v = np.concatenate([i, j]), np.concatenate([j, i]), np.concatenate([-v, -v])
            diag = d + (0 if diag is None else diag)
        idx = np.arange(self.n)
        i = np.concatenate([i, idx])
        j = np.concatenate([j, idx])
        v = np.concatenate([v, diag])
        return sp.csr_matrix((v, (i, j)), shape=(self.n, self.n))


def _solid_conduction(asm: _Assembler) -> None:
    R, C = asm.rows, asm.cols
    w, h = asm.cell_width, asm.cell_height
    rr, cc = np.meshgrid(np.arange(R), np.arange(C), indexing="ij")
    local = (rr * C + cc).ravel()
    for l in range(asm.num_layers):
        k, t = asm.conductivity[l], asm.thickness[l]
        base = l * R * C
        # x-neighbours: two half-cell resistances in series
        if C > 1:
            i = base + (rr[:, :-1] * C + cc[:, :-1]).ravel()
            g = (h * t) / (w / (2 * k) + w / (2 * k))
            keep = ~asm.fluid[i] & ~asm.fluid[i + 1]
            asm.add_conduction(i[keep], i[keep] + 1, np.full(keep.sum(), g))
        if R > 1:
            i = base + (rr[:-1, :] * C + cc[:-1, :]).ravel()
            g = (w * t) / (h / (2 * k) + h / (2 * k))
            keep = ~asm.fluid[i] & ~asm.fluid[i + C]
            asm.add_conduction(i[keep], i[keep] + C, np.full(keep.sum(), g))
        if l + 1 < asm.num_layers:
            k2, t2 = asm.conductivity[l + 1], asm.thickness[l + 1]
            g = (w * h) / (t / (2 * k) + t2 / (2 * k2))
            i = base + local
            j = i + R * C
            keep = ~asm.fluid[i] & ~asm.fluid[j]
            asm.add_conduction(i[keep], j[keep], np.full(keep.sum(), g))
        cells = base + local
        solid = cells[~asm.fluid[cells]]
        for res in asm.boundary_cell_resistance(l):
            g = 1.0 / (res + t / (2 * k * w * h))
            asm.add_boundary(solid, np.full(solid.size, g))
        cv = asm.spec.layers[l].material.volumetric_heat_capacity
        asm.capacitance[solid] = cv * w * h * t


def map_power_to_grid(floorplan: Floorplan, rows: int, cols: int,
                      die_width: float, die_height: float, layer: int = 0
                      ) -> dict[str, tuple[tuple[CellId, float], ...]]:
    """Split each block over grid cells by overlap area / block area."""
    w, h = die_width / cols, die_height / rows
    out = {}
    for b in floorplan.blocks:
        c0 = max(int(np.floor(b.left / w)) - 1, 0)
        c1 = min(int(np.ceil(b.right / w)) + 1, cols)
        r0 = max(int(np.floor(b.bottom / h)) - 1, 0)
        r1 = min(int(np.ceil(b.top / h)) + 1, rows)
        cs = np.arange(c0, c1)
        rs = np.arange(r0, r1)
        ox = np.clip(np.minimum(b.right, (cs + 1) * w) - np.maximum(b.left, cs * w), 0, None)
        oy = np.clip(np.minimum(b.top, (rs + 1) * h) - np.maximum(b.bottom, rs * h), 0, None)
        frac = np.outer(oy, ox) / b.area
        frac[frac < _FRACTION_FLOOR] = 0.0
        total = frac.sum()
        assert total > 0, f"block {b.name} does not overlap the grid"
        frac /= total
        ri, ci = np.nonzero(frac)
        out[b.name] = tuple((CellId(layer, int(rs[a]), int(cs[c])), float(frac[a, c]))
                            for a, c in zip(ri, ci))
    return out


def build_grid_model(spec: StackSpec) -> ThermalGridModel:
    asm = _Assembler(spec)
    R, C = asm.rows, asm.cols

    layouts = {}
    for l, layer in enumerate(spec.layers):
        if layer.kind == "microchannel":
            lay = layout_channels(layer, R, C, spec.die_width, spec.die_height)
            layouts[l] = lay
            asm.h_conv[l] = lay.h_conv
            for r in lay.fluid_rows:
                asm.fluid[l * R * C + r * C: l * R * C + (r + 1) * C] = True

    _solid_conduction(asm)
    for l, lay in layouts.items():
        contribute_fluid_terms(asm, lay, l)
        if lay.per_channel_mass_flow > 0:
            for ch, cells, mdot in lay.streams(l, R, C):
                asm.streams.append(FluidStream(l, ch, cells, mdot, lay.cp, lay.inlet_temp))

    conduction = asm._matrix(asm._cond, diag=asm.bnd_g, symmetric=True)
    advection = asm._matrix(asm._adv, diag=asm.adv_diag)
    conductance = (conduction + advection).tocsr()
    conductance.sum_duplicates()

    power_map: dict[BlockKey, tuple] = {}
    for l, layer in enumerate(spec.layers):
        if layer.kind != "active":
            continue
        for name, entries in map_power_to_grid(layer.floorplan, R, C, spec.die_width,
                                               spec.die_height, l).items():
            power_map[(l, name)] = entries
    block_keys = tuple(power_map)
    bi, ci, fv = [], [], []
    for b, key in enumerate(block_keys):
        for cell, frac in power_map[key]:
            bi.append(b)
            ci.append(cell.flat(R, C))
            fv.append(frac)
    block_matrix = sp.csr_matrix((fv, (bi, ci)), shape=(len(block_keys), asm.n))

    arrays = (asm.capacitance, asm.bnd_g, asm.injection, asm.fluid)
    for a in arrays:
        a.setflags(write=False)
    return ThermalGridModel(
        spec=spec, rows=R, cols=C, cell_width=asm.cell_width, cell_height=asm.cell_height,
        conductance=conductance, conduction=conduction, capacitance=asm.capacitance,
        boundary_conductance=asm.bnd_g, boundary_injection=asm.injection,
        fluid_mask=asm.fluid, layouts=dict(layouts), streams=tuple(asm.streams),
        power_map=power_map, block_keys=block_keys, block_matrix=block_matrix,
    )


def instantaneous_power_vector(model: ThermalGridModel,
                               sample: Mapping[BlockKey, float]) -> np.ndarray:
    """Per-cell watts for a ``{(layer, block): watts}`` sample.

    Blocks missing from the sample dissipate nothing.
    """
    index = {key: i for i, key in enumerate(model.block_keys)}
    watts = np.zeros(len(model.block_keys))
    for key, val in sample.items():
        if key not in index:
            raise KeyError(f"unknown block {key[1]!r} on layer {key[0]}")
        watts[index[key]] = val
    return model.block_matrix.T @ watts


def stack_sample(spec: StackSpec, step: int | None = None,
                 statistic: str = "max") -> dict[BlockKey, float]:
    """Block powers of every active layer at ``step``, or reduced over the trace.

    Traces shorter than ``step`` hold their final row.
    """
    out = {}
    for l, trace in spec.traces.items():
        if step is None:
            vals = trace.reduce(statistic)
        else:
            vals = trace.sample(min(step, trace.num_steps - 1))
        out.update({(l, name): w for name, w in vals.items()})
    return out
