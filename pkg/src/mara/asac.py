"""Per-class bandwidth ledger, over-reservation and threshold re-sizing.

All bandwidth is integer bits per second. Ratios are carried as exact
fractions and only the final bandwidth amounts are floored, so the
conservation checks on MRth are exact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping


class AdmissionError(ValueError):
    pass


@dataclass
class ClassConfig:
    name: str
    mrth_fraction: float = 0.2
    crth_fraction_of_mrth: float = 0.5
    admission_controlled: bool = True


DEFAULT_CLASSES = (
    ClassConfig("Premium"),
    ClassConfig("Gold"),
    ClassConfig("Silver"),
    ClassConfig("BestEffort", admission_controlled=False),
)


def scale(amount: int, fraction: float) -> int:
    """floor(amount * fraction) with ``fraction`` read as its short decimal."""
    return int(Fraction(str(fraction)) * amount)


@dataclass
class CosState:
    class_id: str
    crth: int
    mrth: int
    brv: int = 0
    bu: int = 0
    initialized: bool = False

    def copy(self) -> CosState:
        return CosState(self.class_id, self.crth, self.mrth, self.brv, self.bu, self.initialized)

    def check(self) -> None:
        if not (0 <= self.bu <= self.brv <= self.mrth):
            raise AssertionError(f"ledger broken for {self.class_id}: bu={self.bu} brv={self.brv} mrth={self.mrth}")
        if self.crth > self.mrth:
            raise AssertionError(f"{self.class_id}: crth {self.crth} above mrth {self.mrth}")


def make_cos_table(capacity: int, classes: Iterable[ClassConfig]) -> dict[str, CosState]:
    table = {}
    total = 0
    for cfg in classes:
        mrth = scale(capacity, cfg.mrth_fraction)
        table[cfg.name] = CosState(cfg.name, scale(mrth, cfg.crth_fraction_of_mrth), mrth)
        total += mrth
    if total > capacity:
        raise ValueError(f"sum of MRth {total} exceeds link capacity {capacity}")
    return table


def init_class_reservations(table: Mapping[str, CosState], factor: float) -> list[str]:
    """Set Brv = factor * MRth on every class that has no reservation state yet.

    Returns the classes that were initialized; repeated calls are no-ops.
    """
    if not 0 < factor <= 1:
        raise ValueError(f"initialization factor must be in (0, 1], got {factor}")
    done = []
    for cos in table.values():
        if cos.initialized:
            continue
        cos.brv = max(cos.bu, scale(cos.mrth, factor))
        cos.initialized = True
        done.append(cos.class_id)
    return done


def compute_bov(cos: CosState, brq: int) -> int:
    """Over-reservation surplus: (Bu/MRth) * (MRth - Bu - Brq), floored.

    A negative value means the class cannot take the request within its
    MRth. This includes Bu == 0 with Brq > MRth, where the product is zero
    but the available term is negative.
    """
    if cos.mrth <= 0:
        return -1
    available = cos.mrth - cos.bu - brq
    bov = (cos.bu * available) // cos.mrth
    if available < 0 and bov >= 0:
        return -1
    return bov


def apply_over_reservation(cos: CosState, bov: int, brq: int, literal: bool = False) -> int:
    """Grow the reservation after a successful ``compute_bov``.

    Default rule keeps Bu <= Brv: Brv = Bu + Brq + Bov. ``literal`` uses
    Brv = Bov + Brq as printed, which can leave Brv below Bu.
    Both are clamped to MRth. Returns the new Brv.
    """
    if bov < 0:
        raise ValueError("over-reservation requires a non-negative Bov")
    target = bov + brq if literal else cos.bu + brq + bov
    cos.brv = min(target, cos.mrth)
    return cos.brv


class Decision(enum.Enum):
    ADMIT_FREE = "AdmitFree"
    NEEDS_ADJUST = "NeedsAdjust"
    NEEDS_READJUST = "NeedsReadjust"
    REJECT = "Reject"


def bottleneck(states: Iterable[CosState]) -> CosState:
    """Link state with the least bandwidth left under MRth; first wins ties."""
    best = None
    for cos in states:
        if best is None or cos.mrth - cos.bu < best.mrth - best.bu:
            best = cos
    if best is None:
        raise ValueError("empty path")
    return best


def admission_check(states: list[CosState], brq: int) -> Decision:
    """Admission decision over the per-link class states of one tree."""
    if all(c.bu + brq <= c.brv for c in states):
        return Decision.ADMIT_FREE
    if compute_bov(bottleneck(states), brq) >= 0:
        return Decision.NEEDS_ADJUST
    return Decision.NEEDS_READJUST


@dataclass
class DonorShare:
    b_idx: Fraction
    th_idx: Fraction
    bref: int
    brl: int


@dataclass
class ReadjustPlan:
    target: str
    donors: dict[str, DonorShare] = field(default_factory=dict)

    @property
    def gain(self) -> int:
        return sum(d.brl for d in self.donors.values())

    @property
    def effective(self) -> bool:
        return self.gain > 0


def donor_share(cos: CosState) -> DonorShare:
    b_idx = Fraction(1) if cos.brv == 0 else Fraction(cos.brv - cos.bu, cos.brv)
    bref = cos.crth if cos.bu < cos.crth else cos.brv
    room = cos.mrth - bref
    th_idx = Fraction(0) if cos.mrth == 0 else Fraction(room, cos.mrth)
    brl = int((b_idx + th_idx) / 2 * room) if room > 0 else 0
    return DonorShare(b_idx, th_idx, bref, brl)


def compute_readjust_plan(
    table: Mapping[str, CosState],
    congested: str,
    controlled: Iterable[str] | None = None,
) -> ReadjustPlan:
    """How much MRth every other admission-controlled class hands to ``congested``."""
    if congested not in table:
        raise AdmissionError(f"unknown class {congested!r}")
    names = list(table) if controlled is None else [c for c in controlled if c in table]
    if congested not in names:
        raise AdmissionError(f"class {congested!r} is not admission-controlled")
    plan = ReadjustPlan(congested)
    for name in names:
        if name != congested:
            plan.donors[name] = donor_share(table[name])
    return plan


def apply_readjust_plan(table: Mapping[str, CosState], plan: ReadjustPlan) -> None:
    # donors whose reservation sat above the new MRth lose the excess
    for name, share in plan.donors.items():
        cos = table[name]
        cos.mrth -= share.brl
        cos.brv = min(cos.brv, cos.mrth)
    table[plan.target].mrth += plan.gain


def commit_flow(states: Iterable[CosState], brq: int) -> None:
    for cos in states:
        cos.bu += brq


class AccountingError(AssertionError):
    pass


def release_flow(states: Iterable[CosState], brq: int) -> None:
    for cos in states:
        if cos.bu < brq:
            cos.bu = 0
            raise AccountingError(f"release of {brq} below zero on class {cos.class_id}")
        cos.bu -= brq


class IngressPathView:
    """The ingress's copy of per-link class state for the links it sends on.

    Bu changes are applied here directly (the ingress admits and releases
    sessions itself); Brv/MRth changes arrive only with RESPONSE messages
    through :meth:`refresh`.
    """

    def __init__(self, controlled: Iterable[str]):
        self.controlled = tuple(controlled)
        self.links: dict[str, dict[str, CosState]] = {}

    def refresh(self, ground: Mapping[str, Mapping[str, CosState]], ifaces: Iterable[str]) -> None:
        for iface in ifaces:
            self.links[iface] = {name: c.copy() for name, c in ground[iface].items()}

    def states(self, ifaces: Iterable[str], class_id: str) -> list[CosState]:
        return [self.links[i][class_id] for i in ifaces]

    def bottleneck_link(self, ifaces: Iterable[str], class_id: str) -> str:
        ifaces = list(ifaces)
        worst = bottleneck(self.states(ifaces, class_id))
        return next(i for i in ifaces if self.links[i][class_id] is worst)

    def decide(self, ifaces: Iterable[str], class_id: str, brq: int) -> Decision:
        if class_id not in self.controlled:
            raise AdmissionError(f"class {class_id!r} is not admission-controlled")
        ifaces = list(ifaces)
        decision = admission_check(self.states(ifaces, class_id), brq)
        if decision is not Decision.NEEDS_READJUST:
            return decision
        table = {n: c.copy() for n, c in self.links[self.bottleneck_link(ifaces, class_id)].items()}
        plan = compute_readjust_plan(table, class_id, self.controlled)
        if not plan.effective:
            return Decision.REJECT
        apply_readjust_plan(table, plan)
        if compute_bov(table[class_id], brq) < 0:
            return Decision.REJECT
        return Decision.NEEDS_READJUST

    def commit(self, ifaces: Iterable[str], class_id: str, brq: int) -> None:
        commit_flow(self.states(ifaces, class_id), brq)

    def release(self, ifaces: Iterable[str], class_id: str, brq: int) -> None:
        release_flow(self.states(ifaces, class_id), brq)

    def mismatches(self, ground: Mapping[str, Mapping[str, CosState]]) -> list[str]:
        bad = []
        for iface, table in self.links.items():
            for name, c in table.items():
                g = ground[iface][name]
                if (c.mrth, c.brv, c.bu) != (g.mrth, g.brv, g.bu):
                    bad.append(f"{iface}/{name}")
        return bad
