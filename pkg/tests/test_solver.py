import math

import numpy as np
import pytest
import scipy.linalg as sla

from stacktherm import (ConfigError, DtmPolicy, PowerTrace, SolveSettings, SolverError,
                        StackSpec, apply_dtm, build_grid_model, dense_steady_solve, energy_balance,
                        instantaneous_power_vector, stack_sample, steady_solve, transient_run)

from helpers import active, channel_layer, outline, random_stack, tiled_floorplan, tim

AMBIENT = 318.15
HALF_R = 150e-6 / (2 * 130.0 * 4e-6)


def single_cell(watts=1.0, sink=0.5, steps=1, interval=1e-3):
    layer = active(outline(), np.full((steps, 1), watts), interval=interval)
    return StackSpec((layer,), ambient=AMBIENT, sink_resistance_top=sink,
                     grid_rows=1, grid_cols=1)


def test_single_cell_analytic():
    model = build_grid_model(single_cell())
    res = steady_solve(model, np.array([1.0]))
    assert res.final[0] == pytest.approx(AMBIENT + 0.5 + HALF_R, abs=1e-9)


def test_zero_power_is_ambient():
    model = build_grid_model(random_stack(np.random.default_rng(3), cooled=False))
    res = steady_solve(model, np.zeros(model.n_cells))
    assert np.all(res.final == model.ambient)


@pytest.mark.parametrize("seed", range(8))
def test_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    model = build_grid_model(random_stack(rng, max_side=24))
    p = instantaneous_power_vector(model, {k: float(rng.uniform(0, 4)) for k in model.block_keys})
    res = steady_solve(model, p)
    assert np.abs(res.final - dense_steady_solve(model, p)).max() < 1e-6
    assert res.relative_residual <= 1e-8


def test_dense_oracle_size_limit():
    spec = StackSpec((active(outline(), 1.0),), sink_resistance_top=1.0,
                     grid_rows=70, grid_cols=70)
    with pytest.raises(ValueError, match="limited"):
        dense_steady_solve(build_grid_model(spec), np.zeros(4900))


@pytest.mark.parametrize("seed", range(5))
def test_no_cell_below_coldest_reference(seed):
    rng = np.random.default_rng(50 + seed)
    model = build_grid_model(random_stack(rng))
    p = instantaneous_power_vector(model, {k: float(rng.uniform(0, 4)) for k in model.block_keys})
    res = steady_solve(model, p)
    refs = [model.ambient] + [s.inlet_temp for s in model.streams]
    assert res.final.min() >= min(refs) - 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_superposition_and_scaling(seed):
    rng = np.random.default_rng(200 + seed)
    spec = random_stack(rng)
    model = build_grid_model(spec)
    keys = model.block_keys
    a = {k: float(rng.uniform(0, 3)) for k in keys}
    b = {k: float(rng.uniform(0, 3)) for k in keys}
    base = steady_solve(model, np.zeros(model.n_cells)).final

    def rise(sample):
        return steady_solve(model, sample).final - base

    ra, rb = rise(a), rise(b)
    both = rise({k: a[k] + b[k] for k in keys})
    scale = max(np.abs(both).max(), 1e-12)
    assert np.abs(both - ra - rb).max() <= 1e-7 * scale
    alpha = 2.7
    assert np.abs(rise({k: alpha * a[k] for k in keys}) - alpha * ra).max() \
        <= 1e-7 * alpha * max(np.abs(ra).max(), 1e-12)


def test_iteration_budget_exhausted():
    model = build_grid_model(random_stack(np.random.default_rng(9), cooled=True))
    p = np.ones(model.n_cells)
    with pytest.raises(SolverError) as info:
        steady_solve(model, p, SolveSettings(rel_tolerance=1e-300, max_iterations=2))
    assert info.value.residual is not None


def test_settings_validation():
    with pytest.raises(ValueError):
        SolveSettings(rel_tolerance=0.0)
    with pytest.raises(ValueError):
        SolveSettings(transient_dt=-1.0)


# ------------------------------------------------------------ energy balance

def test_conduction_only_balance():
    spec = StackSpec((active(tiled_floorplan(2, 2), [1.0, 2.0, 0.5, 3.0]), tim()),
                     sink_resistance_top=1.0, boundary_bottom=5.0, grid_rows=8, grid_cols=8)
    res = steady_solve(build_grid_model(spec), stack_sample(spec))
    eb = res.energy_balance
    assert eb.coolant_out == 0.0
    assert eb.sink_out == pytest.approx(eb.power_in, rel=1e-6)


def test_adiabatic_cooled_balance():
    spec = StackSpec((active(outline(), 5.0), channel_layer(1e-7)),
                     grid_rows=20, grid_cols=10)
    res = steady_solve(build_grid_model(spec), stack_sample(spec))
    eb = res.energy_balance
    assert eb.sink_out == 0.0
    assert eb.coolant_out == pytest.approx(eb.power_in, rel=1e-6)


def test_zero_power_balance():
    spec = StackSpec((active(outline(), 5.0), channel_layer(1e-7)),
                     sink_resistance_top=1.0, grid_rows=20, grid_cols=10)
    model = build_grid_model(spec)
    eb = energy_balance(model, np.full(model.n_cells, AMBIENT), np.zeros(model.n_cells))
    assert (eb.power_in, eb.sink_out, eb.coolant_out, eb.residual) == (0.0, 0.0, 0.0, 0.0)


# ----------------------------------------------------------------- transient

def test_step_response_at_rc():
    spec = single_cell()
    model = build_grid_model(spec)
    r = 0.5 + HALF_R
    c = model.capacitance[0]
    tau = r * c
    layer = active(outline(), [[1.0]], interval=tau)
    spec = StackSpec((layer,), ambient=AMBIENT, sink_resistance_top=0.5,
                     grid_rows=1, grid_cols=1)
    res = transient_run(build_grid_model(spec), settings=SolveSettings(transient_dt=tau / 100))
    expect = r * (1 - math.exp(-1.0))
    assert res.final[0] - AMBIENT == pytest.approx(expect, rel=0.02)
    assert res.times.tolist() == [pytest.approx(tau)]


def dominant_time_constant(model):
    lam = sla.eigh(model.conductance.toarray(), np.diag(model.capacitance),
                   eigvals_only=True, subset_by_index=[0, 0])[0]
    return 1.0 / lam


def test_constant_power_reaches_steady():
    fp = tiled_floorplan(2, 2)
    spec = StackSpec((active(fp, [2.0, 0.5, 1.0, 3.0]), tim(), active(outline(name="m"), 0.3,
                                                                      name="mem")),
                     sink_resistance_top=1.0, grid_rows=6, grid_cols=6)
    model = build_grid_model(spec)
    tau = dominant_time_constant(model)
    steps = 100
    interval = 1000 * tau / steps
    traces = {0: PowerTrace(fp.names, interval, np.tile([2.0, 0.5, 1.0, 3.0], (steps, 1))),
              2: PowerTrace(("m",), interval, np.full((steps, 1), 0.3))}
    res = transient_run(model, traces)
    steady = steady_solve(model, stack_sample(spec))
    assert np.abs(res.final - steady.final).max() < 1e-3


def test_zero_power_trace_stays_ambient():
    spec = StackSpec((active(outline(), np.zeros((5, 1))), channel_layer(1e-7)),
                     sink_resistance_top=1.0, grid_rows=20, grid_cols=4)
    res = transient_run(build_grid_model(spec))
    assert res.temperatures.shape == (5, spec.grid_rows * spec.grid_cols * 2)
    assert np.all(res.temperatures == AMBIENT)


def test_transient_monotone_heating():
    spec = single_cell(steps=20)
    res = transient_run(build_grid_model(spec))
    temps = res.temperatures[:, 0]
    assert temps[1] > temps[0] > AMBIENT
    assert np.all(np.diff(temps) >= -1e-12)
    assert temps[-1] <= AMBIENT + 0.5 + HALF_R + 1e-9


def test_transient_initial_field():
    spec = single_cell(watts=0.0, steps=3)
    model = build_grid_model(spec)
    res = transient_run(model, initial=np.array([AMBIENT + 10.0]))
    assert np.all(np.diff(res.temperatures[:, 0]) < 0)
    with pytest.raises(ValueError):
        transient_run(model, initial=np.zeros(2))


# ----------------------------------------------------------------------- dtm

POLICY = DtmPolicy(trigger_temp=350.0, release_temp=345.0, throttle_factor=0.5)


def test_dtm_trigger():
    key = (0, "A")
    scaled, thr, events = apply_dtm(POLICY, {key: 351.0}, frozenset(), {key: 4.0})
    assert key in thr and scaled[key] == 2.0
    assert [e.action for e in events] == ["throttle"]


def test_dtm_hysteresis():
    key = (0, "A")
    scaled, thr, events = apply_dtm(POLICY, {key: 347.0}, frozenset({key}), {key: 4.0})
    assert key in thr and scaled[key] == 2.0 and not events
    scaled, thr, events = apply_dtm(POLICY, {key: 347.0}, frozenset(), {key: 4.0})
    assert key not in thr and scaled[key] == 4.0
    scaled, thr, events = apply_dtm(POLICY, {key: 344.0}, frozenset({key}), {key: 4.0})
    assert key not in thr and [e.action for e in events] == ["release"]


def test_dtm_policy_validation():
    with pytest.raises(ConfigError):
        DtmPolicy(trigger_temp=340.0, release_temp=345.0)
    with pytest.raises(ConfigError):
        DtmPolicy(trigger_temp=350.0, release_temp=345.0, throttle_factor=1.5)


def test_dtm_never_raises_peak():
    fp = tiled_floorplan(2, 2)
    rng = np.random.default_rng(4)
    watts = rng.uniform(1.0, 4.0, (30, 4))
    spec = StackSpec((active(fp, watts, interval=2e-3), tim()), sink_resistance_top=3.0,
                     grid_rows=8, grid_cols=8)
    model = build_grid_model(spec)
    off = transient_run(model)
    policy = DtmPolicy(trigger_temp=off.peak - 8.0, release_temp=off.peak - 12.0)
    on = transient_run(model, settings=SolveSettings(dtm=policy))
    assert on.dtm_log
    assert on.peak <= off.peak
    throttled_power = on.block_power.sum(axis=1)
    assert np.any(throttled_power < off.block_power.sum(axis=1))
