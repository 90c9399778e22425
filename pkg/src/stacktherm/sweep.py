"""Exhaustive design-space sweep over die orderings and cooling placement.

Every distinct ordering of the die multiset is combined with every way of
inserting the requested number of cooling layers into the gaps between (and
around) the dies, and with every flow rate. Candidates are steady-solved at
a representative power sample and ranked by peak temperature.
"""

from __future__ import annotations

import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations, combinations_with_replacement
from math import comb, factorial
from pathlib import Path
from typing import Iterator, TextIO

from .config import (DEFAULT_GRID, LAYER_KEYS, OUTLINE_TOL, LayerSpec,
                     Resolver, StackSpec, _Section, parse_layer, parse_materials, read_ini)
from .errors import ConfigError, StackThermError, SweepError
from .grid import build_grid_model, stack_sample
from .solver import SolveSettings, steady_solve

PLACEMENT_RULES = ("any", "no_adjacent_cooling")
OBJECTIVES = ("peak_temp", "peak_core_temp")
DEFAULT_CAP = 10_000
RANKING_HEADER = "rank,ordering,flow_rate,objective_c,peak_block,residual_w,status"
KELVIN_OFFSET = 273.15


@dataclass(frozen=True)
class SweepBase:
    """Stack-level settings shared by every candidate."""
    ambient: float = 318.15
    sink_resistance_top: float | None = None
    boundary_bottom: float | None = None
    grid_rows: int = DEFAULT_GRID
    grid_cols: int = DEFAULT_GRID

    @classmethod
    def from_stack(cls, spec: StackSpec) -> "SweepBase":
        return cls(spec.ambient, spec.sink_resistance_top, spec.boundary_bottom,
                   spec.grid_rows, spec.grid_cols)


@dataclass(frozen=True)
class SweepSpec:
    dies: tuple[LayerSpec, ...]  # named active-die templates; equal names = identical dies
    tim_template: LayerSpec | None = None
    cooling_template: LayerSpec | None = None
    cooling_counts: tuple[int, ...] = (0,)
    flow_rates: tuple[float, ...] = ()
    placement_rule: str = "any"
    objective: str = "peak_temp"
    core_dies: frozenset[str] = field(default_factory=frozenset)
    cap: int = DEFAULT_CAP
    power_statistic: str = "max"

    def __post_init__(self):
        if not self.dies:
            raise SweepError("sweep needs at least one die")
        by_name = {}
        for d in self.dies:
            if d.kind != "active":
                raise SweepError(f"die {d.name!r} is not an active layer")
            if by_name.setdefault(d.name, d) != d:
                raise SweepError(f"two different dies share the name {d.name!r}")
        w, h = self.dies[0].floorplan.die_width, self.dies[0].floorplan.die_height
        for d in self.dies[1:]:
            if abs(d.floorplan.die_width - w) > OUTLINE_TOL or \
                    abs(d.floorplan.die_height - h) > OUTLINE_TOL:
                raise SweepError(f"die {d.name!r} outline differs from {self.dies[0].name!r}")
        if not self.cooling_counts or any(k < 0 for k in self.cooling_counts):
            raise SweepError("cooling counts must be a non-empty set of integers >= 0")
        object.__setattr__(self, "cooling_counts", tuple(sorted(set(self.cooling_counts))))
        if max(self.cooling_counts) > 0:
            if self.cooling_template is None or self.cooling_template.kind != "microchannel":
                raise SweepError("cooling layers requested but no microchannel template given")
            if not self.flow_rates:
                raise SweepError("cooling layers requested but no flow rates given")
        if any(not q >= 0 for q in self.flow_rates):
            raise SweepError("flow rates must be >= 0")
        if self.tim_template is not None and self.tim_template.kind != "tim":
            raise SweepError("TIM template must be a tim layer")
        if self.placement_rule not in PLACEMENT_RULES:
            raise SweepError(f"placement_rule must be one of {PLACEMENT_RULES}")
        if self.objective not in OBJECTIVES:
            raise SweepError(f"objective must be one of {OBJECTIVES}")
        if self.objective == "peak_core_temp":
            if not self.core_dies & {d.name for d in self.dies}:
                raise SweepError("objective peak_core_temp needs at least one core die")
        if self.cap < 1:
            raise SweepError("cap must be >= 1")
        if self.power_statistic not in ("max", "mean"):
            raise SweepError("power_statistic must be 'max' or 'mean'")

    @property
    def die_table(self) -> dict[str, LayerSpec]:
        return {d.name: d for d in self.dies}


@dataclass(frozen=True)
class Candidate:
    dies: tuple[str, ...]  # die names bottom -> top
    cooling_gaps: tuple[int, ...]  # gap index per cooling layer; gap g sits below die g
    flow_rate: float
    tim_name: str | None = None
    cooling_name: str = "cooling"
    objective_value: float | None = None  # Celsius
    peak_block: str = ""
    residual: float | None = None  # W
    status: str = "pending"

    @property
    def ordering(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.layer_plan())

    @property
    def ordering_str(self) -> str:
        return "|".join(self.ordering)

    def layer_plan(self) -> list[tuple[str, str]]:
        """``(name, role)`` per layer bottom -> top; role is die, tim or cooling."""
        per_gap = Counter(self.cooling_gaps)
        n = len(self.dies)
        plan = []
        for g in range(n + 1):
            plan += [(self.cooling_name, "cooling")] * per_gap[g]
            if g < n:
                plan.append((self.dies[g], "die"))
                if self.tim_name is not None and g + 1 < n and per_gap[g + 1] == 0:
                    plan.append((self.tim_name, "tim"))
        return plan


def multiset_permutations(items) -> Iterator[tuple]:
    """Distinct permutations of ``items`` in lexicographic order."""
    counts = Counter(items)
    keys = sorted(counts)
    n = sum(counts.values())
    out: list = []

    def rec():
        if len(out) == n:
            yield tuple(out)
            return
        for k in keys:
            if counts[k]:
                counts[k] -= 1
                out.append(k)
                yield from rec()
                out.pop()
                counts[k] += 1
    yield from rec()


def _insertions(n_dies: int, k: int, rule: str):
    gaps = range(n_dies + 1)
    if rule == "any":
        return combinations_with_replacement(gaps, k)
    return combinations(gaps, k)


def count_candidates(spec: SweepSpec) -> int:
    """Closed-form candidate count."""
    names = [d.name for d in spec.dies]
    n = len(names)
    perms = factorial(n)
    for m in Counter(names).values():
        perms //= factorial(m)
    total = 0
    for k in spec.cooling_counts:
        if spec.placement_rule == "any":
            ins = comb(n + k, k)
        else:
            ins = comb(n + 1, k)
        # flow rate is irrelevant without cooling layers
        total += ins * (len(spec.flow_rates) if k > 0 else 1)
    return perms * total


def enumerate_candidates(spec: SweepSpec) -> list[Candidate]:
    total = count_candidates(spec)
    if total > spec.cap:
        raise SweepError(f"sweep has {total} candidates, above the cap of {spec.cap}; "
                         f"constrain dies, cooling counts or flow rates, or raise the cap")
    tim = spec.tim_template.name if spec.tim_template is not None else None
    cool = spec.cooling_template.name if spec.cooling_template is not None else "cooling"
    out = []
    for perm in multiset_permutations(d.name for d in spec.dies):
        for k in spec.cooling_counts:
            for gaps in _insertions(len(perm), k, spec.placement_rule):
                flows = spec.flow_rates if k > 0 else (0.0,)
                for q in flows:
                    out.append(Candidate(perm, tuple(gaps), float(q), tim, cool))
    return out


def materialize(candidate: Candidate, spec: SweepSpec, base: SweepBase) -> StackSpec:
    dies = spec.die_table
    layers = []
    for name, role in candidate.layer_plan():
        if role == "die":
            layers.append(dies[name])
        elif role == "tim":
            layers.append(spec.tim_template)
        else:
            tpl = spec.cooling_template
            layers.append(replace(tpl, cooling=replace(tpl.cooling,
                                                       flow_rate=candidate.flow_rate)))
    return StackSpec(tuple(layers), ambient=base.ambient,
                     sink_resistance_top=base.sink_resistance_top,
                     boundary_bottom=base.boundary_bottom,
                     grid_rows=base.grid_rows, grid_cols=base.grid_cols)


def evaluate_candidate(candidate: Candidate, spec: SweepSpec, base: SweepBase,
                       settings: SolveSettings | None = None, heatmap_prefix=None):
    """Steady-solve one candidate; returns ``(candidate_with_results, result)``."""
    try:
        stack = materialize(candidate, spec, base)
        model = build_grid_model(stack)
        result = steady_solve(model, stack_sample(stack, statistic=spec.power_statistic),
                              settings)
    except StackThermError as exc:
        return replace(candidate, status=f"failed: {exc}"), None

    plan = candidate.layer_plan()
    if spec.objective == "peak_core_temp":
        scored = [l for l, (name, role) in enumerate(plan)
                  if role == "die" and name in spec.core_dies]
    else:
        scored = [l for l, (_, role) in enumerate(plan) if role == "die"]
    field = result.final
    peak = max(float(model.layer_field(field, l).max()) for l in scored)
    keys = [i for i, (l, _) in enumerate(model.block_keys) if l in scored]
    hot = max(keys, key=lambda i: result.block_max[0][i])
    layer, block = model.block_keys[hot]

    if heatmap_prefix is not None:
        from .report import emit_ppm_heatmap
        for l in range(model.num_layers):
            with open(f"{heatmap_prefix}_layer{l}.ppm", "w") as fh:
                emit_ppm_heatmap(model, field, l, fh)
    done = replace(candidate, objective_value=peak - KELVIN_OFFSET,
                   peak_block=f"{block}@L{layer}",
                   residual=result.energy_balance.residual, status="ok")
    return done, result


def _rank_key(c: Candidate):
    failed = c.status != "ok"
    return (failed, c.objective_value if not failed else 0.0, c.ordering_str, c.flow_rate)


def default_workers() -> int:
    env = os.environ.get("STACKTHERM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def run_sweep(spec: SweepSpec, base: SweepBase, settings: SolveSettings | None = None,
              workers: int | None = None, heatmap_dir: str | Path | None = None
              ) -> list[Candidate]:
    """Evaluate every candidate and return them ranked best first."""
    candidates = enumerate_candidates(spec)
    workers = workers or default_workers()
    if heatmap_dir is not None:
        Path(heatmap_dir).mkdir(parents=True, exist_ok=True)

    def job(item):
        idx, cand = item
        prefix = None if heatmap_dir is None else str(Path(heatmap_dir) / f"cand{idx:05d}")
        return evaluate_candidate(cand, spec, base, settings, prefix)[0]

    items = list(enumerate(candidates))
    if workers == 1:
        done = [job(it) for it in items]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(job, items))
    return sorted(done, key=_rank_key)


def write_ranking(ranked, stream: TextIO) -> None:
    stream.write(RANKING_HEADER + "\n")
    for rank, c in enumerate(ranked, 1):
        obj = f"{c.objective_value:.6f}" if c.objective_value is not None else ""
        res = f"{c.residual:.6e}" if c.residual is not None else ""
        status = c.status.replace(",", ";").replace("\n", " ")
        stream.write(f"{rank},{c.ordering_str},{c.flow_rate:.6g},{obj},{c.peak_block},"
                     f"{res},{status}\n")


# --------------------------------------------------------------------------
# config

_SWEEP_KEYS = {"dies", "cooling_count", "flow_rates", "placement_rule", "objective", "cap",
               "core_dies", "power_statistic"}


def _split(raw: str) -> list[str]:
    return [tok for tok in raw.replace(",", " ").split() if tok]


def _parse_counts(raw: str, sec: _Section) -> tuple[int, ...]:
    counts = []
    for tok in _split(raw):
        try:
            if "-" in tok:
                lo, hi = (int(x) for x in tok.split("-", 1))
                counts.extend(range(lo, hi + 1))
            else:
                counts.append(int(tok))
        except ValueError:
            sec.error(f"bad cooling count {tok!r}", "cooling_count")
    if not counts:
        sec.error("empty cooling count", "cooling_count")
    return tuple(counts)


def _named_layer(cp, name: str, label: str, materials, resolver, ambient, source):
    sec = _Section(cp, name, source, LAYER_KEYS)
    layer = parse_layer(sec, materials, resolver, ambient)
    return layer if sec.has("name") else replace(layer, name=label)


def parse_sweep_config(text: str, resolver: Resolver, source: str | None = None
                       ) -> tuple[SweepSpec, SweepBase]:
    cp = read_ini(text, source)
    if not cp.has_section("sweep"):
        raise ConfigError("missing [sweep] section", source=source, field="sweep")
    if not cp.has_section("stack"):
        raise ConfigError("missing [stack] section", source=source, field="stack")
    st = _Section(cp, "stack", source, {"ambient", "grid_rows", "grid_cols",
                                        "sink_resistance_top", "boundary_bottom"})
    ambient = st.float("ambient")
    sinks = {key: st.float(key, allow_adiabatic=True) if st.has(key) else None
             for key in ("sink_resistance_top", "boundary_bottom")}
    base = SweepBase(ambient=ambient, **sinks,
                     grid_rows=st.int("grid_rows", DEFAULT_GRID),
                     grid_cols=st.int("grid_cols", DEFAULT_GRID))
    materials = parse_materials(cp, source)
    sw = _Section(cp, "sweep", source, _SWEEP_KEYS)

    die_names = _split(sw.str("dies"))
    if not die_names:
        sw.error("no dies listed", "dies")
    table = {}
    for name in sorted(set(die_names)):
        sec_name = f"die.{name}"
        if not cp.has_section(sec_name):
            sw.error(f"die {name!r} has no [{sec_name}] section", "dies")
        if "kind" not in cp[sec_name]:
            cp[sec_name]["kind"] = "active"
        layer = _named_layer(cp, sec_name, name, materials, resolver, ambient, source)
        table[name] = replace(layer, name=name)

    def template(section: str, kind: str, label: str):
        if cp.has_section(section):
            return _named_layer(cp, section, label, materials, resolver, ambient, source)
        layer_secs = sorted((s for s in cp.sections() if s.startswith("layer.")),
                            key=lambda s: int(s.split(".", 1)[1]))
        for s in layer_secs:
            if cp[s].get("kind", "").strip() == kind:
                return _named_layer(cp, s, label, materials, resolver, ambient, source)
        return None

    tim = template("sweep.tim", "tim", "tim")
    cooling = template("sweep.cooling", "microchannel", "cooling")
    counts = _parse_counts(sw.str("cooling_count", "0"), sw)
    if sw.has("flow_rates"):
        flows = []
        for tok in _split(sw.str("flow_rates")):
            try:
                flows.append(float(tok))
            except ValueError:
                sw.error(f"bad flow rate {tok!r}", "flow_rates")
    else:
        flows = [cooling.cooling.flow_rate] if cooling is not None else []
    core = sw.str("core_dies", "")
    core_dies = frozenset(_split(core)) if core else frozenset(
        n for n in die_names if n.startswith("core"))
    try:
        spec = SweepSpec(
            dies=tuple(table[n] for n in die_names),
            tim_template=tim, cooling_template=cooling, cooling_counts=counts,
            flow_rates=tuple(flows),
            placement_rule=sw.str("placement_rule", "any"),
            objective=sw.str("objective", "peak_temp"),
            core_dies=core_dies, cap=sw.int("cap", DEFAULT_CAP),
            power_statistic=sw.str("power_statistic", "max"),
        )
    except SweepError as exc:
        raise ConfigError(str(exc), source=source, field="sweep") from None
    return spec, base
