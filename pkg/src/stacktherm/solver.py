"""Steady and transient temperature solves on an assembled grid model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .config import PowerTrace
from .dtm import DtmEvent, DtmPolicy, apply_dtm
from .errors import IllPosedModelError, SolverError
from .grid import BlockKey, ThermalGridModel, instantaneous_power_vector

DENSE_ORACLE_LIMIT = 4000


@dataclass(frozen=True)
class SolveSettings:
    rel_tolerance: float = 1e-8
    max_iterations: int | None = None  # default 100 * n_cells
    transient_dt: float | None = None  # default: the trace interval
    dtm: DtmPolicy | None = None

    def __post_init__(self):
        if not 0 < self.rel_tolerance < 1:
            raise ValueError("rel_tolerance must lie in (0, 1)")
        if self.transient_dt is not None and not self.transient_dt > 0:
            raise ValueError("transient_dt must be positive")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class EnergyBalance:
    power_in: float
    sink_out: float
    coolant_out: float
    residual: float


@dataclass(frozen=True, eq=False)
class SimResult:
    model: ThermalGridModel
    temperatures: np.ndarray  # [field, cell] K
    powers: np.ndarray  # [field, cell] W in effect for each field
    times: np.ndarray | None  # end time of each field; None for steady
    block_mean: np.ndarray  # [field, block] K
    block_max: np.ndarray  # [field, block] K
    block_power: np.ndarray | None = None  # [field, block] W, when known
    energy_balance: EnergyBalance | None = None
    dtm_log: tuple[DtmEvent, ...] = ()
    relative_residual: float = 0.0

    @property
    def is_steady(self) -> bool:
        return self.times is None

    @property
    def final(self) -> np.ndarray:
        return self.temperatures[-1]

    @property
    def peak(self) -> float:
        return float(self.temperatures.max())


class _LinearSolver:
    """ILU-preconditioned GMRES with a max-norm relative residual contract."""

    inner_rtol = 1e-11

    def __init__(self, matrix: sp.spmatrix, rel_tolerance: float, max_iterations: int):
        self.A = sp.csc_matrix(matrix)
        self.rel_tolerance = rel_tolerance
        self.max_iterations = max_iterations
        try:
            # minimum-degree ordering on A+A^T keeps the factor effective on
            # thin, strongly anisotropic layer stacks; M-matrices need no pivoting
            ilu = spla.spilu(self.A, drop_tol=1e-5, fill_factor=20,
                             permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0)
            self.M = spla.LinearOperator(self.A.shape, ilu.solve)
        except RuntimeError:
            self.M = None

    def solve(self, b: np.ndarray, x0: np.ndarray) -> tuple[np.ndarray, float]:
        norm_b = float(np.abs(b).max()) if b.size else 0.0
        if norm_b == 0.0:
            return np.zeros_like(b), 0.0
        x = np.array(x0, dtype=float)
        used = 0
        while True:
            r = b - self.A @ x
            rel = float(np.abs(r).max()) / norm_b
            if rel <= self.rel_tolerance:
                return x, rel
            if used >= self.max_iterations:
                raise SolverError(f"no convergence after {used} iterations "
                                  f"(relative residual {rel:.3e})", residual=rel)
            count = [0]

            def tick(_):
                count[0] += 1
            budget = self.max_iterations - used
            dx, _ = spla.gmres(self.A, r, rtol=self.inner_rtol, atol=0.0, restart=60,
                               maxiter=max(1, math.ceil(budget / 60)), M=self.M,
                               callback=tick, callback_type="pr_norm")
            used += max(count[0], 1)
            if not np.all(np.isfinite(dx)):
                raise SolverError("linear solve produced non-finite values", residual=rel)
            x += dx


def _block_extrema(model: ThermalGridModel, fields: np.ndarray):
    fields = np.atleast_2d(fields)
    bm = model.block_matrix
    if bm.shape[0] == 0:
        empty = np.zeros((fields.shape[0], 0))
        return empty, empty.copy()
    mean = fields @ bm.T
    mean = np.asarray(mean)
    maxes = np.maximum.reduceat(fields[:, bm.indices], bm.indptr[:-1], axis=1)
    return mean, maxes


def _check_posed(model: ThermalGridModel):
    if not model.has_heat_path:
        raise IllPosedModelError("model has no boundary or coolant heat path")


def _settings(settings, model):
    settings = settings or SolveSettings()
    max_it = settings.max_iterations or 100 * model.n_cells
    return settings, max_it


def energy_balance(model: ThermalGridModel, temps: np.ndarray,
                   power: np.ndarray) -> EnergyBalance:
    power_in = float(np.sum(power))
    sink_out = float(np.dot(model.boundary_conductance, temps - model.ambient))
    coolant_out = float(sum(s.mass_flow * s.cp * (temps[s.cells[-1]] - s.inlet_temp)
                            for s in model.streams))
    return EnergyBalance(power_in, sink_out, coolant_out, power_in - sink_out - coolant_out)


def _block_vector(model: ThermalGridModel, sample: Mapping[BlockKey, float]) -> np.ndarray:
    return np.array([sample.get(k, 0.0) for k in model.block_keys], dtype=float)


def steady_solve(model: ThermalGridModel, power,
                 settings: SolveSettings | None = None) -> SimResult:
    """Solve ``G T = p + b``.

    ``power`` is either a per-cell watts vector or a ``{(layer, block):
    watts}`` sample; with a sample the result also records block powers.
    """
    _check_posed(model)
    settings, max_it = _settings(settings, model)
    block_power = None
    if isinstance(power, Mapping):
        block_power = _block_vector(model, power)[None, :]
        power = instantaneous_power_vector(model, power)
    power = np.asarray(power, dtype=float)
    rhs = power + model.boundary_injection
    solver = _LinearSolver(model.conductance, settings.rel_tolerance, max_it)
    temps, rel = solver.solve(rhs, np.full(model.n_cells, model.ambient))
    mean, maxes = _block_extrema(model, temps)
    return SimResult(model=model, temperatures=temps[None, :], powers=power[None, :],
                     times=None, block_mean=mean, block_max=maxes,
                     block_power=block_power, energy_balance=energy_balance(model, temps, power),
                     relative_residual=rel)


def dense_steady_solve(model: ThermalGridModel, power: np.ndarray,
                       max_cells: int = DENSE_ORACLE_LIMIT) -> np.ndarray:
    """Direct dense LU solve; a reference for small models."""
    if model.n_cells > max_cells:
        raise ValueError(f"dense solve limited to {max_cells} cells, model has {model.n_cells}")
    _check_posed(model)
    rhs = np.asarray(power, dtype=float) + model.boundary_injection
    return np.linalg.solve(model.conductance.toarray(), rhs)


def transient_run(model: ThermalGridModel,
                  traces: Mapping[int, PowerTrace] | None = None,
                  settings: SolveSettings | None = None,
                  initial: np.ndarray | None = None) -> SimResult:
    """Backward-Euler run over the traces, one output field per trace interval.

    ``traces`` maps active layer index to its trace (default: the stack's
    own traces). Shorter traces hold their final sample.
    """
    settings, max_it = _settings(settings, model)
    traces = dict(model.spec.traces if traces is None else traces)
    if not traces:
        raise ValueError("transient run needs at least one power trace")
    intervals = {t.interval for t in traces.values()}
    if len(intervals) != 1:
        raise ValueError(f"traces use different intervals {sorted(intervals)}")
    interval = intervals.pop()
    n_steps = max(t.num_steps for t in traces.values())

    dt = settings.transient_dt or interval
    n_sub = max(1, math.ceil(interval / dt - 1e-9))
    h = interval / n_sub
    step_matrix = model.conductance + sp.diags(model.capacitance / h)
    solver = _LinearSolver(step_matrix, settings.rel_tolerance, max_it)
    c_over_h = model.capacitance / h

    temps = (np.full(model.n_cells, model.ambient) if initial is None
             else np.array(initial, dtype=float))
    if temps.shape != (model.n_cells,):
        raise ValueError("initial field has the wrong size")

    policy = settings.dtm
    control = (policy.control_interval or interval) if policy else None
    throttled: frozenset = frozenset()
    log: list[DtmEvent] = []
    next_check = 0.0
    fields, powers, bpowers = [], [], []
    eps = 1e-9 * h

    for step in range(n_steps):
        base: dict[BlockKey, float] = {}
        for l, trace in traces.items():
            row = trace.samples[min(step, trace.num_steps - 1)]
            base.update({(l, name): float(w) for name, w in zip(trace.block_names, row)})
        for sub in range(n_sub):
            t = (step * n_sub + sub) * h
            if policy is not None and t + eps >= next_check:
                _, bmax = _block_extrema(model, temps)
                block_temps = dict(zip(model.block_keys, bmax[0].tolist()))
                _, throttled, events = apply_dtm(policy, block_temps, throttled, {}, time=t)
                log.extend(events)
                while next_check <= t + eps:
                    next_check += control
            sample = base
            if throttled:
                sample = {k: (w * policy.throttle_factor if k in throttled else w)
                          for k, w in base.items()}
            power = instantaneous_power_vector(model, sample)
            rhs = c_over_h * temps + power + model.boundary_injection
            temps, _ = solver.solve(rhs, temps)
        fields.append(temps.copy())
        powers.append(power)
        bpowers.append(_block_vector(model, sample))

    fields = np.array(fields)
    mean, maxes = _block_extrema(model, fields)
    return SimResult(model=model, temperatures=fields, powers=np.array(powers),
                     times=interval * np.arange(1, n_steps + 1),
                     block_mean=mean, block_max=maxes, block_power=np.array(bpowers),
                     dtm_log=tuple(log))
