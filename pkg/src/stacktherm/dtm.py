"""Hysteretic per-block power throttling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping

from .errors import ConfigError

BlockKey = tuple[int, str]


@dataclass(frozen=True)
class DtmPolicy:
    trigger_temp: float  # K
    release_temp: float  # K
    throttle_factor: float = 0.5
    control_interval: float | None = None  # s; None = every trace interval

    def __post_init__(self):
        for name in ("trigger_temp", "release_temp", "throttle_factor"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError("must be finite", field=f"dtm.{name}")
        if not self.release_temp < self.trigger_temp:
            raise ConfigError("release_temp must be below trigger_temp",
                              field="dtm.release_temp")
        if not 0.0 < self.throttle_factor <= 1.0:
            raise ConfigError("throttle_factor must lie in (0, 1]",
                              field="dtm.throttle_factor")
        if self.control_interval is not None and not self.control_interval > 0:
            raise ConfigError("control_interval must be positive",
                              field="dtm.control_interval")


@dataclass(frozen=True)
class DtmEvent:
    time: float
    block: BlockKey
    action: str  # "throttle" or "release"


def apply_dtm(policy: DtmPolicy, block_temps: Mapping[BlockKey, float],
              throttled: frozenset, sample: Mapping[BlockKey, float],
              time: float = 0.0):
    """Update the throttled set from block peak temperatures and scale power.

    A block joins the set when hotter than ``trigger_temp`` and leaves it
    only once cooler than ``release_temp``. Returns ``(scaled_sample,
    new_throttled, events)``; iteration is in sorted key order so the event
    log is deterministic.
    """
    current = set(throttled)
    events = []
    for key in sorted(block_temps):
        temp = block_temps[key]
        if key in current:
            if temp < policy.release_temp:
                current.remove(key)
                events.append(DtmEvent(time, key, "release"))
        elif temp > policy.trigger_temp:
            current.add(key)
            events.append(DtmEvent(time, key, "throttle"))
    scaled = {key: (watts * policy.throttle_factor if key in current else watts)
              for key, watts in sample.items()}
    return scaled, frozenset(current), events
