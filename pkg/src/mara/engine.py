"""Discrete-event simulation of MARA and the per-flow MIRA baseline."""

from __future__ import annotations

import csv
import hashlib
import heapq
import io
import json
import logging
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Callable

from . import agtree, asac, mirap
from .mirap import Flag, Kind, Message, Qspec
from .topology import Network, delay_diameter, shortest_paths_oracle
from .workload import SessionRequest, WorkloadConfig, generate

log = logging.getLogger(__name__)

MARA = "MARA"
MIRA = "MIRA"
MODES = (MARA, MIRA)

MSG_LABELS = ("RESERVE_I", "RESERVE_M", "RESERVE_O", "RESERVE_R", "RESERVE_T", "RESPONSE")


class SimulationError(RuntimeError):
    pass


@dataclass
class ScriptedEvent:
    time: float
    kind: str  # "leaf_change" | "link_fail"
    session: int | None = None
    egresses: tuple[str, ...] = ()
    link: tuple[str, str] | None = None


@dataclass
class ScenarioConfig:
    network: Network
    classes: list[asac.ClassConfig] = field(default_factory=lambda: list(asac.DEFAULT_CLASSES))
    init_factor: float = 0.25
    hop_cap: int | None = 6
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    mode: str = MARA
    seed: int = 0
    tick: float = 1.0
    processing_delay: float = 0.0
    ingress: str | None = None
    events: list[ScriptedEvent] = field(default_factory=list)
    literal_brv: bool = False
    check_invariants: bool = False
    requests: list[SessionRequest] | None = None  # replay instead of generating

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.tick <= 0:
            raise ValueError("tick must be positive")
        if self.hop_cap is not None and self.hop_cap < 1:
            raise ValueError("hop cap must be >= 1")
        if not 0 < self.init_factor <= 1:
            raise ValueError("init factor must be in (0, 1]")
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise ValueError("duplicate class names")
        controlled = {c.name for c in self.classes if c.admission_controlled}
        for cls in self.workload.class_weights:
            if cls not in controlled:
                raise ValueError(f"workload class {cls!r} is not an admission-controlled class")
        if self.ingress is not None and self.ingress not in self.network.ingresses():
            raise ValueError(f"{self.ingress!r} is not an ingress node")


@dataclass
class Txn:
    kind: str
    session: int | None = None
    inflight: int = 0
    failed: bool = False
    undo: list[Callable[[], None]] = field(default_factory=list)
    on_reply: Callable[[Message], None] | None = None
    on_done: Callable[[Txn], None] | None = None
    closed: bool = False


@dataclass
class MaraSession:
    req: SessionRequest
    tree: agtree.AggTree
    egresses: tuple[str, ...]


@dataclass
class MiraSession:
    req: SessionRequest
    edges: list[str]
    refs: list[str]
    egresses: tuple[str, ...]


@dataclass
class MetricsReport:
    summary: dict
    rows: list[dict]

    def to_json(self) -> str:
        return json.dumps(self.summary, indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.rows:
            writer = csv.DictWriter(buf, fieldnames=list(self.rows[0]), lineterminator="\n")
            writer.writeheader()
            writer.writerows(self.rows)
        return buf.getvalue()

    def __eq__(self, other):
        return isinstance(other, MetricsReport) and self.to_json() == other.to_json() and self.to_csv() == other.to_csv()


class Simulation:
    """One deterministic run. Build it, call :meth:`run` once."""

    def __init__(self, scenario: ScenarioConfig):
        scenario.validate()
        self.sc = scenario
        self.net = scenario.network
        self.mode = scenario.mode
        self.duration = scenario.workload.duration
        self.ingress = scenario.ingress or self.net.ingresses()[0]
        self.nodes = mirap.build_node_states(self.net, scenario.classes, scenario.literal_brv)
        self.link_cos = {i: self.nodes[l.src].cos[i] for i, l in self.net.links.items()}
        self.controlled = tuple(c.name for c in scenario.classes if c.admission_controlled)
        self.class_names = [c.name for c in scenario.classes]

        self.now = 0.0
        self._heap: list = []
        self._seq = 0
        self._trace = hashlib.sha256()
        self.inflight = 0

        # metrics
        self.bytes = Counter()
        self.msgs = Counter()
        self.originated = Counter()
        self.link_bytes = Counter()
        self.init_link_bytes = Counter()
        self.tick_link_bytes = Counter()
        self.peak_link_share = 0.0
        self.tick_ingress_reserve = 0
        self.post_init_reserve_bytes = 0
        self.drops = Counter()
        self.requests = Counter()
        self.admitted = Counter()
        self.blocked = Counter()
        self.admitted_free = 0
        self.adjust_rounds = 0
        self.reprocess_failures = 0
        self.superset_deliveries = 0
        self.selected_trees: Counter = Counter()
        self.selected_depths: Counter = Counter()
        self.switches = Counter()
        self.terminated = 0
        self.state_log: list[tuple[float, int]] = []
        self.rows: list[dict] = []
        self.state_samples: list[int] = []
        self.init_time: float | None = None
        self.flood_quiet_time: float | None = None
        self.invariant_checks = 0

        self.ready = self.mode == MIRA
        self.queue: deque = deque()
        self.busy = False
        self.catalog: list[agtree.AggTree] = []
        self.view = asac.IngressPathView(self.controlled)
        self.sessions = agtree.SessionMap()
        self.mara_active: dict[int, MaraSession] = {}
        self.mira_active: dict[int, MiraSession] = {}
        self.pending: set[int] = set()
        self.failed_ifaces: set[str] = set()
        self.routes: dict[str, list[str]] = {}
        self.generation = Counter()
        self.collected: dict[str, list[str]] = {}
        self.all_init_paths: list[list[str]] = []
        self._m_started = False

    # ------------------------------------------------------------------ core loop
    def schedule(self, time: float, kind: str, payload=None) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (time, self._seq, kind, payload))

    def run(self) -> MetricsReport:
        reqs = self.sc.requests
        if reqs is None:
            wl = self.sc.workload
            wl = WorkloadConfig(**{**wl.__dict__, "seed": self.sc.seed})
            reqs = generate(wl, self.net.egresses())
        self.reqs = {r.id: r for r in reqs}
        for r in reqs:
            if r.arrival_time <= self.duration:
                self.schedule(r.arrival_time, "arrival", r.id)
                if r.end_time < self.duration:
                    self.schedule(r.end_time, "end", r.id)
        for ev in self.sc.events:
            self.schedule(ev.time, ev.kind, ev)
        k = 0
        while k * self.sc.tick <= self.duration + 1e-12:
            self.schedule(k * self.sc.tick, "tick", k)
            k += 1
        if self.mode == MARA:
            self.schedule(0.0, "init", None)
        else:
            self.routes = shortest_paths_oracle(self.net, self.ingress)
        self._record_state()

        while self._heap:
            time, seq, kind, payload = heapq.heappop(self._heap)
            if time > self.duration and kind not in ("msg", "reply"):
                continue  # past the horizon only in-flight signaling is drained
            self.now = time
            self._trace.update(f"{time!r}|{seq}|{kind}|{self._describe(payload)}\n".encode())
            getattr(self, "_on_" + kind)(payload)
            self._record_state()
        self.now = self.duration
        self._close()
        return self._report()

    @staticmethod
    def _describe(payload) -> str:
        if isinstance(payload, tuple) and payload and isinstance(payload[0], str):
            node, msg = payload[0], payload[1]
            return f"{node}:{msg.label}:{msg.session_ref}:{msg.error}"
        return repr(payload) if not isinstance(payload, ScriptedEvent) else payload.kind

    def _record_state(self) -> None:
        n = len(self.nodes[self.ingress].mrib)
        if not self.state_log or self.state_log[-1][1] != n:
            self.state_log.append((self.now, n))

    # ------------------------------------------------------------------ messaging
    def _count(self, iface: str, msg: Message) -> None:
        size = mirap.wire_size(msg)
        self.bytes[msg.label] += size
        self.msgs[msg.label] += 1
        self.link_bytes[iface] += size
        self.tick_link_bytes[iface] += size
        if self.init_time is None and self.mode == MARA:
            self.init_link_bytes[iface] += size
        if msg.kind is Kind.RESERVE:
            if self.init_time is not None:
                self.post_init_reserve_bytes += size
            if self.net.links[iface].src == self.ingress:
                self.tick_ingress_reserve += size

    def send(self, iface: str, msg: Message, txn: Txn) -> None:
        link = self.net.links[iface]
        self._count(iface, msg)
        txn.inflight += 1
        self.inflight += 1
        self.schedule(self.now + link.delay + self.sc.processing_delay, "msg", (link.dst, msg, link.peer_iface, txn))

    def reply(self, node: str, msg: Message, upstream: list[str], txn: Txn) -> None:
        delay = 0.0
        for iface in reversed(upstream):
            back = self.net.links[iface].peer_iface
            self._count(back, msg)
            delay += self.net.links[back].delay + self.sc.processing_delay
        txn.inflight += 1
        self.inflight += 1
        self.schedule(self.now + delay, "reply", (self.ingress, msg, None, txn))

    def originate(self, msg: Message, txn: Txn) -> None:
        self.originated[msg.label] += 1
        res = mirap.handle(self.nodes[self.ingress], msg, None)
        self._apply(self.ingress, msg, res, txn)
        self._maybe_done(txn)

    def _apply(self, node: str, msg: Message, res: mirap.Result, txn: Txn) -> None:
        txn.undo.extend(res.undo)
        if res.dropped:
            self.drops[f"{msg.label}:{res.dropped}"] += 1
        for iface, out in res.forwards:
            self.send(iface, out, txn)
        if res.reply is not None:
            path = res.reply.rsvpath if res.reply.rsvpath is not None else mirap.upstream_path(self.net, msg.rsvpath, node)
            self.reply(node, res.reply, path, txn)

    def _maybe_done(self, txn: Txn) -> None:
        if txn.inflight == 0 and not txn.closed:
            txn.closed = True
            if txn.on_done:
                txn.on_done(txn)

    def _on_msg(self, payload) -> None:
        node, msg, arrival, txn = payload
        txn.inflight -= 1
        self.inflight -= 1
        if arrival in self.failed_ifaces:
            self.drops[f"{msg.label}:link-down"] += 1
        else:
            res = mirap.handle(self.nodes[node], msg, arrival)
            self._apply(node, msg, res, txn)
        self._maybe_done(txn)

    def _on_reply(self, payload) -> None:
        _, msg, _, txn = payload
        txn.inflight -= 1
        self.inflight -= 1
        if not msg.ok:
            txn.failed = True
        if txn.on_reply:
            txn.on_reply(msg)
        self._maybe_done(txn)

    # ------------------------------------------------------------------ MARA init
    def _on_init(self, _payload) -> None:
        node = self.nodes[self.ingress]
        per_class = {}
        for table in node.cos.values():
            for name, c in table.items():
                per_class.setdefault(name, c.mrth)
        flood = Txn("flood", on_reply=self._collect_path, on_done=self._flood_quiet)
        res = mirap.originate_reserve_i(node, self.sc.init_factor, per_class)
        for iface, msg in res.forwards:
            self.originated["RESERVE_I"] += 1
            self.send(iface, msg, flood)
        self._maybe_done(flood)

    def _collect_path(self, msg: Message) -> None:
        path = list(msg.rsvpath)
        self.all_init_paths.append(path)
        if msg.origin not in self.collected:
            self.collected[msg.origin] = path
            self.view.refresh(self.link_cos, path)
        if not self._m_started and set(self.collected) >= set(self.net.egresses()):
            self._start_trees()

    def _flood_quiet(self, _txn: Txn) -> None:
        self.flood_quiet_time = self.now
        if not self._m_started:
            self._start_trees()

    def _start_trees(self) -> None:
        self._m_started = True
        if not self.collected:
            raise SimulationError("initialization failed: no edge-to-edge paths collected")
        alloc = agtree.GroupAllocator(self.ingress)
        ids = agtree.TreeIds()
        unbranched = agtree.build_unbranched_trees(self.net, self.ingress, self.collected, alloc, ids)
        cap = self.sc.hop_cap
        deep = [t.id for t in unbranched if cap is not None and t.depth > cap]
        if deep:
            log.warning("un-branched trees %s exceed the hop cap and are not installed", deep)
        unbranched = [t for t in unbranched if cap is None or t.depth <= cap]
        if not unbranched:
            raise SimulationError(f"initialization failed: no edge-to-edge path within {cap} hops")
        branched = agtree.enumerate_branched_trees(self.net, unbranched, cap, alloc, ids)
        self.catalog = unbranched + branched
        for t in self.catalog:
            self.view.refresh(self.link_cos, t.edge_order)
        setup = Txn("trees", on_done=self._trees_ready)
        for t in self.catalog:
            msg = Message(Kind.RESERVE, Flag.M, self.ingress, rsvpath=list(t.edge_order), session_ref=str(t.channel))
            self.originate(msg, setup)

    def _trees_ready(self, txn: Txn) -> None:
        if txn.failed:
            raise SimulationError("multicast tree installation failed")
        self.init_time = self.now
        self.ready = True
        self._pump()

    # ------------------------------------------------------------------ sessions
    def _on_arrival(self, sid: int) -> None:
        req = self.reqs[sid]
        self.requests[req.class_id] += 1
        if self.mode == MARA:
            self.queue.append(("arrive", sid))
            self._pump()
        else:
            self._mira_setup(req, req.egress_set, new=True)

    def _on_end(self, sid: int) -> None:
        if self.mode == MARA:
            s = self.mara_active.pop(sid, None)
            if s is not None:
                self._mara_release(s)
            else:
                self.pending.discard(sid)
        else:
            s = self.mira_active.pop(sid, None)
            if s is not None:
                self._mira_teardown(s)
            else:
                self.pending.discard(sid)

    def _on_leaf_change(self, ev: ScriptedEvent) -> None:
        if self.mode == MARA:
            if ev.session in self.mara_active:
                self.queue.append(("switch", ev.session, tuple(sorted(ev.egresses)), "leaf"))
                self._pump()
        else:
            s = self.mira_active.pop(ev.session, None)
            if s is not None:
                self._mira_teardown(s)
                self._mira_setup(s.req, tuple(sorted(ev.egresses)), new=False)

    def _on_link_fail(self, ev: ScriptedEvent) -> None:
        a, b = ev.link
        link = self.net.link_between(a, b)
        if link is None:
            raise SimulationError(f"no link {a}-{b}")
        down = {link.iface, link.peer_iface}
        self.failed_ifaces |= down
        if self.mode == MARA:
            ingress = self.nodes[self.ingress]
            for t in self.catalog:
                if t.valid and t.edges & down:
                    t.valid = False
                    ingress.mrib.pop(str(t.channel), None)
            for sid in sorted(self.mara_active):
                s = self.mara_active[sid]
                if not s.tree.valid:
                    self.queue.append(("switch", sid, s.egresses, "failure"))
            self._pump()
        else:
            self.routes = shortest_paths_oracle(self.net, self.ingress, exclude=self.failed_ifaces)
            for sid in sorted(self.mira_active):
                s = self.mira_active[sid]
                if set(s.edges) & down:
                    del self.mira_active[sid]
                    self._mira_release_silently(s)
                    self.terminated += 1

    # ------------------------------------------------------------------ MARA control
    def _pump(self) -> None:
        while self.ready and not self.busy and self.queue:
            item = self.queue.popleft()
            if item[0] == "arrive":
                self._mara_arrival(self.reqs[item[1]])
            else:
                self._mara_switch(*item[1:])

    def _block(self, req: SessionRequest) -> None:
        self.blocked[req.class_id] += 1

    def _mara_arrival(self, req: SessionRequest) -> None:
        cls, brq = req.class_id, req.total_rate
        sel = agtree.choose_tree(self.catalog, req.egress_set, cls, brq, self.view)
        if sel is None or sel.decision is asac.Decision.REJECT:
            self._block(req)
            return
        if sel.decision is asac.Decision.ADMIT_FREE:
            self._mara_admit(req, sel, free=True)
            return
        self.pending.add(req.id)

        def done(txn: Txn) -> None:
            ok = self._finish_adjust(txn, sel.tree)
            if ok and req.id in self.pending and self.view.decide(sel.tree.edge_order, cls, brq) is asac.Decision.ADMIT_FREE:
                self._mara_admit(req, sel, free=False)
            else:
                if ok and req.id in self.pending:
                    self.reprocess_failures += 1
                self._block(req)
            self.pending.discard(req.id)
            self.busy = False
            self._pump()

        self._adjust(req, sel.tree, done)

    def _adjust(self, req: SessionRequest, tree: agtree.AggTree, done) -> None:
        self.busy = True
        self.adjust_rounds += 1
        txn = Txn("adjust", session=req.id, on_done=done)
        msg = Message(Kind.RESERVE, Flag.O, self.ingress, rsvpath=list(tree.edge_order),
                      qspec=Qspec(req.class_id, req.total_rate), session_ref=f"s{req.id}")
        self.originate(msg, txn)

    def _finish_adjust(self, txn: Txn, tree: agtree.AggTree) -> bool:
        if txn.failed:
            for undo in reversed(txn.undo):
                undo()
        self.view.refresh(self.link_cos, tree.edge_order)
        return not txn.failed

    def _tree_states(self, tree: agtree.AggTree, cls: str) -> list[asac.CosState]:
        return [self.link_cos[i][cls] for i in tree.edge_order]

    def _mara_admit(self, req: SessionRequest, sel: agtree.Selection, free: bool) -> None:
        tree = sel.tree
        self.sessions.map_session(req.id, req.flows, tree)
        asac.commit_flow(self._tree_states(tree, req.class_id), req.total_rate)
        self.view.commit(tree.edge_order, req.class_id, req.total_rate)
        self.mara_active[req.id] = MaraSession(req, tree, tuple(req.egress_set))
        self.admitted[req.class_id] += 1
        if free:
            self.admitted_free += 1
        if sel.superset:
            self.superset_deliveries += 1
        self.selected_trees[tree.id] += 1
        self.selected_depths[tree.depth] += 1

    def _mara_release(self, s: MaraSession) -> None:
        cls, brq = s.req.class_id, s.req.total_rate
        asac.release_flow(self._tree_states(s.tree, cls), brq)
        self.view.release(s.tree.edge_order, cls, brq)
        self.sessions.unmap(s.req.id)

    def _mara_switch(self, sid: int, egresses: tuple[str, ...], trigger: str) -> None:
        s = self.mara_active.get(sid)
        if s is None:
            return
        req = s.req
        cls, brq = req.class_id, req.total_rate
        plan = agtree.switch_session(self.sessions, sid, egresses, self.catalog, self.view, cls, brq)

        def move(tree):
            self._mara_release(s)
            self.sessions.map_session(sid, req.flows, tree)
            asac.commit_flow(self._tree_states(tree, cls), brq)
            self.view.commit(tree.edge_order, cls, brq)
            s.tree = tree
            s.egresses = egresses

        def deny():
            self.switches["Denied"] += 1
            if trigger == "failure":
                del self.mara_active[sid]
                self._mara_release(s)
                self.terminated += 1

        if plan.kind is agtree.SwitchKind.DENIED:
            deny()
            return
        if plan.kind is agtree.SwitchKind.SWITCHED:
            move(plan.tree)
            self.switches["Switched"] += 1
            if plan.superset:
                self.superset_deliveries += 1
            return
        # leave the old tree while the new one is adjusted so hops see only other traffic
        old = s.tree
        asac.release_flow(self._tree_states(old, cls), brq)
        self.view.release(old.edge_order, cls, brq)

        def done(txn: Txn) -> None:
            ok = self._finish_adjust(txn, plan.tree)
            asac.commit_flow(self._tree_states(old, cls), brq)
            self.view.commit(old.edge_order, cls, brq)
            if sid not in self.mara_active:
                pass  # ended while adjusting; the end handler already released it
            elif ok and self.view.decide(plan.tree.edge_order, cls, brq) is not asac.Decision.REJECT:
                move(plan.tree)
                self.switches["Readjusted"] += 1
            else:
                deny()
            self.busy = False
            self._pump()

        self._adjust(req, plan.tree, done)

    # ------------------------------------------------------------------ MIRA control
    def _mira_setup(self, req: SessionRequest, egresses: tuple[str, ...], new: bool) -> None:
        if any(e not in self.routes for e in egresses):
            self._mira_fail(req, new)
            return
        paths = [self.routes[e] for e in egresses]
        edges = agtree._preorder(self.net, self.ingress, frozenset(i for p in paths for i in p))
        gen = self.generation[req.id]
        self.generation[req.id] += 1
        refs = [f"s{req.id}g{gen}.f{k}" for k in range(len(req.flows))]
        self.pending.add(req.id)

        def done(txn: Txn) -> None:
            alive = req.id in self.pending
            self.pending.discard(req.id)
            if txn.failed or not alive:
                for undo in reversed(txn.undo):
                    undo()
                if txn.failed:
                    self._mira_fail(req, new)
                return
            self.mira_active[req.id] = MiraSession(req, edges, refs, egresses)
            if new:
                self.admitted[req.class_id] += 1
            else:
                self.switches["Switched"] += 1

        txn = Txn("setup", session=req.id, on_done=done)
        for ref, rate in zip(refs, req.flows):
            msg = Message(Kind.RESERVE, Flag.R, self.ingress, rsvpath=list(edges),
                          qspec=Qspec(req.class_id, rate), session_ref=ref)
            self.originate(msg, txn)

    def _mira_fail(self, req: SessionRequest, new: bool) -> None:
        if new:
            self._block(req)
        else:
            self.switches["Denied"] += 1
            self.terminated += 1

    def _mira_teardown(self, s: MiraSession) -> None:
        txn = Txn("teardown", session=s.req.id)
        for ref in s.refs:
            self.originate(Message(Kind.RESERVE, Flag.T, self.ingress, session_ref=ref), txn)

    def _mira_release_silently(self, s: MiraSession) -> None:
        for node in self.nodes.values():
            for ref in s.refs:
                entry = node.flows.pop(ref, None)
                node.mrib.pop(ref, None)
                if entry:
                    cls, rate, out = entry
                    for iface in out:
                        node.cos[iface][cls].bu -= rate
                        node.cos[iface][cls].brv -= rate

    # ------------------------------------------------------------------ ticks & report
    def _on_tick(self, k: int) -> None:
        t = self.now
        window = self.sc.tick
        for iface, b in self.tick_link_bytes.items():
            share = b * 8 / window / self.net.links[iface].capacity
            self.peak_link_share = max(self.peak_link_share, share)
        self.tick_link_bytes.clear()
        state = len(self.nodes[self.ingress].mrib)
        self.state_samples.append(state)
        row = {"time": round(t, 9)}
        total = 0
        for label in MSG_LABELS:
            row[f"bytes_{label}"] = self.bytes[label]
            total += self.bytes[label]
        row["bytes_total"] = total
        row["ingress_reserve_Bps"] = self.tick_ingress_reserve / window if k else 0.0
        self.tick_ingress_reserve = 0
        row["multicast_state"] = state
        for cls in self.controlled:
            row[f"admitted_{cls}"] = self.admitted[cls]
            row[f"blocked_{cls}"] = self.blocked[cls]
        for cls in self.class_names:
            row[f"mrth_{cls}"] = sum(tbl[cls].mrth for tbl in self.link_cos.values())
        self.rows.append(row)
        if self.sc.check_invariants:
            self.check_invariants()

    def check_invariants(self) -> None:
        self.invariant_checks += 1
        for iface, table in self.link_cos.items():
            cap = self.net.links[iface].capacity
            if sum(c.mrth for c in table.values()) > cap:
                raise AssertionError(f"sum of MRth above capacity on {iface}")
            if sum(c.brv for c in table.values()) > sum(c.mrth for c in table.values()):
                raise AssertionError(f"sum of Brv above sum of MRth on {iface}")
            if not self.sc.literal_brv:
                for c in table.values():
                    c.check()
        if self.mode == MARA and not self.busy and self.ready:
            bad = self.view.mismatches(self.link_cos)
            if bad:
                raise AssertionError(f"ingress view differs from link state on {bad[:5]}")

    def _close(self) -> None:
        # sessions still running at the end are closed without signaling
        for sid in sorted(self.mara_active):
            self._mara_release(self.mara_active[sid])
        self.mara_active.clear()
        for sid in sorted(self.mira_active):
            self._mira_release_silently(self.mira_active[sid])
        self.mira_active.clear()

    def _report(self) -> MetricsReport:
        total = sum(self.bytes.values())
        reserve = sum(v for k, v in self.bytes.items() if k.startswith("RESERVE"))
        admissions = sum(self.admitted.values())
        classes = {}
        for cls in self.controlled:
            req = self.requests[cls]
            classes[cls] = {
                "requests": req,
                "admitted": self.admitted[cls],
                "blocked": self.blocked[cls],
                "blocking_pct": 100.0 * self.blocked[cls] / req if req else 0.0,
            }
        init = {"complete_time": self.init_time, "flood_quiet_time": self.flood_quiet_time,
                "diameter_s": delay_diameter(self.net)}
        if self.init_time:
            init["max_link_share"] = max(
                (b * 8 / self.init_time / self.net.links[i].capacity for i, b in self.init_link_bytes.items()),
                default=0.0,
            )
        else:
            init["max_link_share"] = 0.0
        after = [n for t, n in self.state_log if self.init_time is not None and t > self.init_time]
        samples = self.state_samples
        summary = {
            "mode": self.mode,
            "seed": self.sc.seed,
            "duration": self.duration,
            "ingress": self.ingress,
            "bytes": {k: self.bytes[k] for k in MSG_LABELS},
            "messages": {k: self.msgs[k] for k in MSG_LABELS},
            "originated": {k: self.originated[k] for k in MSG_LABELS},
            "total_signaling_bytes": total,
            "total_reserve_bytes": reserve,
            "post_init_reserve_bytes": self.post_init_reserve_bytes if self.mode == MARA else reserve,
            "classes": classes,
            "requests": sum(self.requests.values()),
            "admissions": admissions,
            "signaling_free_admissions": self.admitted_free,
            "signaling_free_pct": 100.0 * self.admitted_free / admissions if admissions else 0.0,
            "adjust_rounds": self.adjust_rounds,
            "reprocess_failures": self.reprocess_failures,
            "multicast_state": {
                "mean": sum(samples) / len(samples) if samples else 0.0,
                "max": max(samples, default=0),
                "changes_after_init": len(after),
                "log": [[t, n] for t, n in self.state_log[:50]],
            },
            "init": init,
            "peak_link_share": self.peak_link_share,
            "trees": {
                "catalog": len(self.catalog),
                "unbranched": sum(t.kind == agtree.UNBRANCHED for t in self.catalog),
                "branched": sum(t.kind == agtree.BRANCHED for t in self.catalog),
                "selected_distinct": len(self.selected_trees),
                "selected_fraction": len(self.selected_trees) / len(self.catalog) if self.catalog else 0.0,
                "selected_depths": {str(d): n for d, n in sorted(self.selected_depths.items())},
                "superset_deliveries": self.superset_deliveries,
            },
            "switches": {k: self.switches[k] for k in ("Switched", "Readjusted", "Denied")},
            "terminated": self.terminated,
            "drops": dict(sorted(self.drops.items())),
            "invariant_checks": self.invariant_checks,
            "trace_hash": self._trace.hexdigest(),
        }
        return MetricsReport(summary, self.rows)


def run(scenario: ScenarioConfig) -> MetricsReport:
    return Simulation(scenario).run()
