"""RESERVE/RESPONSE signaling: message model, wire sizes and per-node handlers.

Handlers mutate one node's state and return what to send next. Every state
change they make is paired with an undo callable so that a failed
transaction can be rolled back by the caller.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable

from . import asac
from .topology import CORE, EGRESS, Network


class Kind(enum.Enum):
    RESERVE = "RESERVE"
    RESPONSE = "RESPONSE"


class Flag(enum.Enum):
    I = "I"  # noqa: E741 - protocol flag name
    M = "M"
    O = "O"  # noqa: E741
    T = "T"
    R = "R"  # per-flow request, baseline only
    OK = "OK"


RESERVE_FLAGS = frozenset({Flag.I, Flag.M, Flag.O, Flag.T, Flag.R})

HEADER_BYTES = 24
RSVPATH_BASE = 4
RSVPATH_ENTRY = 4
QSPEC_BYTES = 12
INIT_BASE = 4
INIT_PER_CLASS = 12
SESSION_REF_BYTES = 8


@dataclass(frozen=True)
class Qspec:
    class_id: str
    brq: int

    def __post_init__(self):
        if self.brq <= 0:
            raise ValueError("Qspec bandwidth must be positive")


@dataclass(frozen=True)
class InitPayload:
    factor: float
    per_class_mrth: dict[str, int]


@dataclass
class Message:
    kind: Kind
    flag: Flag
    origin: str
    rsvpath: list[str] | None = None
    qspec: Qspec | None = None
    init_payload: InitPayload | None = None
    session_ref: str | None = None
    # not on the wire: which request a RESPONSE answers, and failure reason
    reply_to: Flag | None = None
    error: str | None = None

    def __post_init__(self):
        if self.kind is Kind.RESERVE:
            if self.flag not in RESERVE_FLAGS:
                raise ValueError(f"RESERVE cannot carry flag {self.flag}")
            if self.flag is Flag.I and self.init_payload is None:
                raise ValueError("RESERVE(I) needs an init payload")
            if self.flag in (Flag.O, Flag.R) and self.qspec is None:
                raise ValueError(f"RESERVE({self.flag.value}) needs a QSPEC")
            if self.flag is Flag.M and not self.rsvpath:
                raise ValueError("RESERVE(M) needs a non-empty RSVPATH")
        elif self.flag is not Flag.OK:
            raise ValueError("RESPONSE carries the OK flag")

    @property
    def ok(self) -> bool:
        return self.kind is Kind.RESPONSE and self.error is None

    @property
    def label(self) -> str:
        if self.kind is Kind.RESPONSE:
            return "RESPONSE"
        return f"RESERVE_{self.flag.value}"

    def __str__(self) -> str:
        tag = "RESPONSE(OK)" if self.kind is Kind.RESPONSE else f"RESERVE({self.flag.value})"
        return f"{tag} from {self.origin} ref={self.session_ref}"


def wire_size(msg: Message) -> int:
    size = HEADER_BYTES
    if msg.rsvpath is not None:
        size += RSVPATH_BASE + RSVPATH_ENTRY * len(msg.rsvpath)
    if msg.qspec is not None:
        size += QSPEC_BYTES
    if msg.init_payload is not None:
        size += INIT_BASE + INIT_PER_CLASS * len(msg.init_payload.per_class_mrth)
    if msg.session_ref is not None:
        size += SESSION_REF_BYTES
    return size


def response(to: Message, node: str, **kw) -> Message:
    return Message(Kind.RESPONSE, Flag.OK, origin=node, session_ref=to.session_ref, reply_to=to.flag, **kw)


@dataclass
class Result:
    forwards: list[tuple[str, Message]] = field(default_factory=list)
    reply: Message | None = None
    dropped: str | None = None
    undo: list[Callable[[], None]] = field(default_factory=list)


@dataclass
class NodeState:
    id: str
    role: str
    cos: dict[str, dict[str, asac.CosState]]  # out-interface -> class -> state
    mrib: dict[str, set[str]] = field(default_factory=dict)
    flows: dict[str, tuple[str, int, list[str]]] = field(default_factory=dict)
    controlled: tuple[str, ...] = ()
    literal_brv: bool = False

    @property
    def interfaces(self) -> list[str]:
        return list(self.cos)


def build_node_states(net: Network, classes, literal_brv: bool = False) -> dict[str, NodeState]:
    classes = list(classes)
    controlled = tuple(c.name for c in classes if c.admission_controlled)
    states = {}
    for node in net.nodes.values():
        cos = {l.iface: asac.make_cos_table(l.capacity, classes) for l in net.out_links[node.id]}
        states[node.id] = NodeState(node.id, node.role, cos, controlled=controlled, literal_brv=literal_brv)
    return states


def _local(node: NodeState, rsvpath: list[str]) -> list[str]:
    return [i for i in rsvpath if i in node.cos]


def _init_local(node: NodeState, factor: float) -> None:
    for table in node.cos.values():
        asac.init_class_reservations(table, factor)


def originate_reserve_i(node: NodeState, factor: float, per_class_mrth: dict[str, int]) -> Result:
    """Ingress side of initialization: reserve locally, flood one copy per interface."""
    _init_local(node, factor)
    payload = InitPayload(factor, dict(per_class_mrth))
    res = Result()
    for iface in node.interfaces:
        res.forwards.append((iface, Message(Kind.RESERVE, Flag.I, node.id, rsvpath=[iface], init_payload=payload)))
    return res


def handle_reserve_i(node: NodeState, msg: Message, arrival_iface: str | None) -> Result:
    _init_local(node, msg.init_payload.factor)
    if any(i in node.cos for i in msg.rsvpath):
        return Result(dropped="loop")
    if node.role == EGRESS:
        return Result(reply=response(msg, node.id, rsvpath=list(msg.rsvpath)))
    if node.role != CORE:
        # another edge router: edges never transit
        return Result(dropped="edge")
    res = Result()
    for iface in node.interfaces:
        if iface == arrival_iface:
            continue
        res.forwards.append((iface, replace(msg, rsvpath=msg.rsvpath + [iface])))
    return res


def handle_reserve_m(node: NodeState, msg: Message, arrived: bool = True) -> Result:
    """Install the channel in the MRIB and follow the RSVPATH downstream.

    ``arrived`` is False only when the ingress processes its own message.
    """
    channel = msg.session_ref
    out = _local(node, msg.rsvpath)
    if not out and not (arrived and node.role == EGRESS):
        return Result(dropped="not-on-path")
    res = Result()
    entry = node.mrib.get(channel)
    if entry is None:
        node.mrib[channel] = set(out)
        res.undo.append(lambda: node.mrib.pop(channel, None))
    else:
        added = set(out) - entry
        entry |= added  # re-installing an existing branch is a no-op
        res.undo.append(lambda: entry.difference_update(added))
    if node.role == EGRESS:
        res.reply = response(msg, node.id)
    res.forwards = [(i, msg) for i in out]
    return res


def _snapshot(table: dict[str, asac.CosState]) -> Callable[[], None]:
    saved = {name: (c.mrth, c.brv) for name, c in table.items()}

    def restore():
        for name, (mrth, brv) in saved.items():
            table[name].mrth = mrth
            table[name].brv = brv

    return restore


def adjust_link(table: dict[str, asac.CosState], class_id: str, brq: int,
                controlled, literal: bool = False) -> bool:
    """Make room for ``brq`` on one link: over-reserve, re-sizing MRth first if needed."""
    cos = table[class_id]
    if cos.bu + brq <= cos.brv:
        return True
    bov = asac.compute_bov(cos, brq)
    if bov < 0:
        plan = asac.compute_readjust_plan(table, class_id, controlled)
        if not plan.effective:
            return False
        asac.apply_readjust_plan(table, plan)
        bov = asac.compute_bov(cos, brq)
        if bov < 0:
            return False
    asac.apply_over_reservation(cos, bov, brq, literal=literal)
    return literal or cos.bu + brq <= cos.brv


def handle_reserve_o(node: NodeState, msg: Message, arrived: bool = True) -> Result:
    out = _local(node, msg.rsvpath)
    res = Result()
    q = msg.qspec
    for iface in out:
        table = node.cos[iface]
        res.undo.append(_snapshot(table))
        if not adjust_link(table, q.class_id, q.brq, node.controlled, node.literal_brv):
            res.reply = response(msg, node.id, error=f"no room for {q.class_id} on {iface}")
            return res
    if not out:
        if not arrived or node.role != EGRESS:
            return Result(dropped="not-on-path")
        res.reply = response(msg, node.id)
        return res
    res.forwards = [(i, msg) for i in out]
    return res


def handle_reserve_r(node: NodeState, msg: Message, arrived: bool = True) -> Result:
    """Baseline per-flow reservation against the static class MRth."""
    ref = msg.session_ref
    q = msg.qspec
    out = _local(node, msg.rsvpath)
    if not out and not (arrived and node.role == EGRESS):
        return Result(dropped="not-on-path")
    for iface in out:
        cos = node.cos[iface][q.class_id]
        if cos.bu + q.brq > cos.mrth:
            return Result(reply=response(msg, node.id, error=f"{q.class_id} full on {iface}"))
    res = Result()
    for iface in out:
        cos = node.cos[iface][q.class_id]
        cos.brv += q.brq
        cos.bu += q.brq

        def undo(cos=cos, brq=q.brq):
            cos.brv -= brq
            cos.bu -= brq

        res.undo.append(undo)
    node.flows[ref] = (q.class_id, q.brq, out)
    node.mrib[ref] = set(out)

    def drop_state():
        node.flows.pop(ref, None)
        node.mrib.pop(ref, None)

    res.undo.append(drop_state)
    if node.role == EGRESS:
        res.reply = response(msg, node.id)
    res.forwards = [(i, msg) for i in out]
    return res


def handle_reserve_t(node: NodeState, msg: Message) -> Result:
    ref = msg.session_ref
    entry = node.flows.pop(ref, None)
    if entry is None:
        return Result(dropped="unknown-session")
    class_id, rate, out = entry
    for iface in out:
        cos = node.cos[iface][class_id]
        cos.bu -= rate
        cos.brv -= rate
    node.mrib.pop(ref, None)
    return Result(forwards=[(i, msg) for i in out])


def handle(node: NodeState, msg: Message, arrival_iface: str | None) -> Result:
    """Dispatch a RESERVE arriving at ``node`` (``arrival_iface`` None = local origin)."""
    arrived = arrival_iface is not None
    if msg.flag is Flag.I:
        return handle_reserve_i(node, msg, arrival_iface)
    if msg.flag is Flag.M:
        return handle_reserve_m(node, msg, arrived)
    if msg.flag is Flag.O:
        return handle_reserve_o(node, msg, arrived)
    if msg.flag is Flag.R:
        return handle_reserve_r(node, msg, arrived)
    if msg.flag is Flag.T:
        return handle_reserve_t(node, msg)
    raise ValueError(f"no handler for {msg}")


def upstream_path(net: Network, rsvpath: list[str], node: str) -> list[str]:
    """Interfaces from the RSVPATH's first node down to ``node`` (tree order)."""
    into = {net.links[i].dst: i for i in rsvpath}
    path = []
    cur = node
    while cur in into:
        iface = into[cur]
        path.append(iface)
        cur = net.links[iface].src
    path.reverse()
    return path

