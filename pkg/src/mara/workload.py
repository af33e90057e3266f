"""Reproducible multi-user session workloads (Poisson arrivals)."""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field


@dataclass
class SessionRequest:
    id: int
    arrival_time: float
    lifetime: float
    class_id: str
    egress_set: tuple[str, ...]
    flows: tuple[int, ...]

    @property
    def total_rate(self) -> int:
        return sum(self.flows)

    @property
    def end_time(self) -> float:
        return self.arrival_time + self.lifetime


@dataclass
class WorkloadConfig:
    session_count: int = 1000
    duration: float = 120.0
    lifetime_range: tuple[float, float] = (20.0, 120.0)
    flows: tuple[int, ...] = (32_000, 64_000, 128_000)
    class_weights: dict[str, float] = field(
        default_factory=lambda: {"Premium": 0.40, "Gold": 0.35, "Silver": 0.25}
    )
    egress_set_sizes: tuple[int, ...] = (1, 2, 3)
    seed: int = 0

    @property
    def arrival_rate(self) -> float:
        return self.session_count / self.duration

    def validate(self) -> None:
        if self.session_count <= 0:
            raise ValueError("session_count must be positive")
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        lo, hi = self.lifetime_range
        if not 0 < lo <= hi:
            raise ValueError(f"bad lifetime range {self.lifetime_range}")
        if not self.flows or any(r <= 0 for r in self.flows):
            raise ValueError("flow rates must be positive")
        if not self.class_weights or any(w < 0 for w in self.class_weights.values()):
            raise ValueError("class weights must be non-negative")
        if abs(sum(self.class_weights.values()) - 1.0) > 1e-9:
            raise ValueError("class weights must sum to 1")
        if not self.egress_set_sizes or min(self.egress_set_sizes) < 1:
            raise ValueError("egress set sizes must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> WorkloadConfig:
        d = dict(d)
        for key in ("lifetime_range", "flows", "egress_set_sizes"):
            if key in d:
                d[key] = tuple(d[key])
        return cls(**d)


def generate(config: WorkloadConfig, egresses: list[str]) -> list[SessionRequest]:
    """Session requests sorted by arrival time.

    Arrival times are a Poisson process on [0, duration] conditioned on
    exactly ``session_count`` arrivals, i.e. sorted uniform draws; their
    gaps are exponential with rate ``session_count / duration``.
    """
    config.validate()
    if not egresses:
        raise ValueError("no egress routers to send to")
    rng = random.Random(config.seed)
    arrivals = sorted(rng.uniform(0.0, config.duration) for _ in range(config.session_count))
    classes = list(config.class_weights)
    weights = [config.class_weights[c] for c in classes]
    egresses = sorted(egresses)
    out = []
    for sid, t in enumerate(arrivals):
        lifetime = rng.uniform(*config.lifetime_range)
        cls = rng.choices(classes, weights=weights)[0]
        size = min(rng.choice(config.egress_set_sizes), len(egresses))
        members = tuple(sorted(rng.sample(egresses, size)))
        out.append(SessionRequest(sid, t, lifetime, cls, members, tuple(config.flows)))
    return out


def dump_events(requests: list[SessionRequest]) -> str:
    """Replayable JSON event list (one arrival and one teardown per session)."""
    events = []
    for r in requests:
        events.append({"time": r.arrival_time, "kind": "arrival", "session": asdict(r)})
        events.append({"time": r.end_time, "kind": "teardown", "session_id": r.id})
    events.sort(key=lambda e: (e["time"], e["kind"] != "teardown"))
    return json.dumps(events, indent=1) + "\n"
