from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

UPSTREAM = "upstream"


@dataclass(frozen=True)
class OutageEvent:
    """Element out of service for ``duration`` intervals starting at ``start``.

    ``element`` is ``"upstream"`` for the substation tie or ``"line:A-B"``.
    """

    start: int
    duration: int
    element: str = UPSTREAM

    @property
    def end(self):
        return self.start + self.duration

    def active(self, t):
        return self.start <= t < self.end


@dataclass(frozen=True)
class StrategyParams:
    islanded_shift: float = 0.6
    price_cap: float = 80.0
    flexible_fraction: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "scenario"
    horizon: int = 96
    interval_minutes: float = 15.0
    events: tuple = ()
    p2p_enabled: bool = True
    fit: float = 20.0
    voll: float = 1000.0
    seed: int = 0
    zones: Optional[Mapping[int, int]] = None
    strategy: StrategyParams = field(default_factory=StrategyParams)
    vetting_margin: float = 0.02
    solver: str = "socp"
    root_voltage: float = 1.0
    export_price: float = 0.0

    @property
    def interval_hours(self):
        return self.interval_minutes / 60.0

    def with_p2p(self, enabled: bool) -> "ScenarioConfig":
        return replace(self, p2p_enabled=enabled)

    def without_events(self) -> "ScenarioConfig":
        return replace(self, events=())

    def validate(self):
        from .errors import ValidationError

        problems = []
        if self.horizon < 1:
            problems.append("horizon must be at least one interval")
        if self.interval_minutes <= 0:
            problems.append("interval length must be positive")
        for ev in self.events:
            if ev.duration < 1:
                problems.append(f"event {ev}: duration must be >= 1 interval")
            if ev.start < 0 or ev.end > self.horizon:
                problems.append(f"event {ev}: outside horizon [0, {self.horizon})")
        if self.fit < 0:
            problems.append("FIT must be non-negative")
        if not 0 <= self.vetting_margin < 1:
            problems.append("vetting margin must lie in [0, 1)")
        if self.solver not in ("socp", "lp"):
            problems.append(f"unknown solver {self.solver!r}")
        if not 0 <= self.strategy.islanded_shift <= 1:
            problems.append("islanded_shift must lie in [0, 1]")
        if not 0 < self.strategy.flexible_fraction <= 1:
            problems.append("flexible_fraction must lie in (0, 1]")
        if problems:
            raise ValidationError("invalid scenario config: " + "; ".join(problems), problems)
