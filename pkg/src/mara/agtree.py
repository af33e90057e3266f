"""Pre-built aggregation trees: un-branched path trees, branched combinations,
tree selection for sessions and session switching."""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .asac import Decision, IngressPathView
from .topology import Network

UNBRANCHED = "unbranched"
BRANCHED = "branched"


class TreeError(ValueError):
    pass


class GroupAllocator:
    """Monotonic SSM group counter for one ingress (232.0.0.0/8)."""

    def __init__(self, source: str, start: int = 1):
        self.source = source
        self.next = start

    def allocate(self) -> SsmChannel:
        k = self.next
        self.next += 1
        return SsmChannel(self.source, f"232.{(k >> 16) & 255}.{(k >> 8) & 255}.{k & 255}")


@dataclass(frozen=True)
class SsmChannel:
    source: str
    group: str

    def __str__(self) -> str:
        return f"({self.source},{self.group})"


@dataclass
class AggTree:
    id: str
    kind: str
    channel: SsmChannel
    ingress: str
    paths: dict[str, list[str]]  # egress -> interface path
    edges: frozenset[str]
    edge_order: list[str]  # pre-order from the ingress, used as RSVPATH
    depth: int
    branch_nodes: frozenset[str]
    valid: bool = True

    @property
    def egresses(self) -> tuple[str, ...]:
        return tuple(sorted(self.paths))

    def sort_key(self) -> tuple:
        return (len(self.paths), self.egresses)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "channel": str(self.channel),
            "egresses": list(self.egresses),
            "depth": self.depth,
            "branch_nodes": sorted(self.branch_nodes),
            "edges": list(self.edge_order),
        }


@dataclass
class Shape:
    edges: frozenset[str]
    indeg: Counter
    outdeg: Counter
    depth: int


def merge(net: Network, paths: Iterable[Sequence[str]]) -> Shape:
    edges = set()
    depth = 0
    for p in paths:
        edges.update(p)
        depth = max(depth, len(p))
    indeg: Counter = Counter()
    outdeg: Counter = Counter()
    for iface in edges:
        link = net.links[iface]
        outdeg[link.src] += 1
        indeg[link.dst] += 1
    return Shape(frozenset(edges), indeg, outdeg, depth)


def passes_filters(shape: Shape, ingress: str, hop_cap: int | None) -> bool:
    if shape.outdeg[ingress] > 1:
        return False  # branching at the ingress
    if any(d > 1 for d in shape.indeg.values()):
        return False  # converging paths
    if hop_cap is not None and shape.depth > hop_cap:
        return False
    return True


def _preorder(net: Network, ingress: str, edges: frozenset[str]) -> list[str]:
    children: dict[str, list[str]] = {}
    for iface in edges:
        children.setdefault(net.links[iface].src, []).append(iface)
    order = []
    stack = sorted(children.get(ingress, []), reverse=True)
    while stack:
        iface = stack.pop()
        order.append(iface)
        stack.extend(sorted(children.get(net.links[iface].dst, []), reverse=True))
    return order


def _make_tree(net: Network, ingress: str, kind: str, channel: SsmChannel,
               paths: dict[str, list[str]], shape: Shape, tid: str) -> AggTree:
    branch = frozenset(n for n, d in shape.outdeg.items() if d > 1)
    return AggTree(
        id=tid,
        kind=kind,
        channel=channel,
        ingress=ingress,
        paths={e: list(p) for e, p in sorted(paths.items())},
        edges=shape.edges,
        edge_order=_preorder(net, ingress, shape.edges),
        depth=shape.depth,
        branch_nodes=branch,
    )


class TreeIds:
    def __init__(self):
        self.n = 0

    def __call__(self) -> str:
        self.n += 1
        return f"T{self.n}"


def build_unbranched_trees(net: Network, ingress: str, paths: dict[str, list[str]],
                           alloc: GroupAllocator, ids: TreeIds | None = None) -> list[AggTree]:
    """One single-path tree with its own channel per collected egress path."""
    if not paths:
        raise TreeError("no edge-to-edge paths collected; initialization failed")
    ids = ids or TreeIds()
    trees = []
    for egress in sorted(paths):
        p = paths[egress]
        if not p or net.links[p[0]].src != ingress or net.links[p[-1]].dst != egress:
            raise TreeError(f"path to {egress} does not run from {ingress}")
        trees.append(_make_tree(net, ingress, UNBRANCHED, alloc.allocate(), {egress: p}, merge(net, [p]), ids()))
    return trees


def branched_subsets(net: Network, unbranched: list[AggTree], hop_cap: int | None = None) -> list[tuple[int, ...]]:
    """Index subsets (size >= 2) of ``unbranched`` whose union passes the filters.

    Grown one tree at a time over n-1 rounds. A subset that fails a filter
    is not extended: adding paths never lowers an in/out-degree or the
    depth, so every superset fails too.
    """
    if not unbranched:
        return []
    ingress = unbranched[0].ingress
    paths = [next(iter(t.paths.values())) for t in unbranched]
    n = len(paths)
    level = [(i,) for i in range(n)]
    kept: list[tuple[int, ...]] = []
    for _ in range(n - 1):
        grown = []
        for subset in level:
            for j in range(subset[-1] + 1, n):
                cand = subset + (j,)
                if passes_filters(merge(net, (paths[k] for k in cand)), ingress, hop_cap):
                    grown.append(cand)
        kept.extend(grown)
        level = grown
    return kept


def enumerate_branched_trees(net: Network, unbranched: list[AggTree], hop_cap: int | None,
                             alloc: GroupAllocator, ids: TreeIds | None = None) -> list[AggTree]:
    ids = ids or TreeIds()
    found = []
    for subset in branched_subsets(net, unbranched, hop_cap):
        paths = {}
        for k in subset:
            paths.update(unbranched[k].paths)
        found.append(paths)
    found.sort(key=lambda p: (len(p), tuple(sorted(p))))
    ingress = unbranched[0].ingress if unbranched else None
    return [
        _make_tree(net, ingress, BRANCHED, alloc.allocate(), paths, merge(net, paths.values()), ids())
        for paths in found
    ]


def catalog_dump(trees: Iterable[AggTree]) -> str:
    return json.dumps({"trees": [t.to_dict() for t in trees]}, indent=2) + "\n"


@dataclass
class Selection:
    tree: AggTree
    decision: Decision
    superset: bool


def candidate_trees(trees: Iterable[AggTree], egresses: Iterable[str]) -> tuple[list[AggTree], bool]:
    """Exact-match trees, or else all covering trees smallest first. Second
    item is True when the candidates are supersets."""
    want = frozenset(egresses)
    live = [t for t in trees if t.valid]
    exact = [t for t in live if frozenset(t.paths) == want]
    if exact:
        return exact, False
    sup = sorted((t for t in live if want < frozenset(t.paths)), key=AggTree.sort_key)
    return sup, True


def select_tree(trees: Iterable[AggTree], egresses: Iterable[str], class_id: str, brq: int,
                view: IngressPathView) -> Selection | None:
    """First candidate whose bottleneck admits without re-sizing MRth."""
    cands, superset = candidate_trees(trees, egresses)
    for tree in cands:
        d = view.decide(tree.edge_order, class_id, brq)
        if d in (Decision.ADMIT_FREE, Decision.NEEDS_ADJUST):
            return Selection(tree, d, superset)
    return None


def choose_tree(trees: Iterable[AggTree], egresses: Iterable[str], class_id: str, brq: int,
                view: IngressPathView) -> Selection | None:
    """``select_tree``, falling back to MRth re-sizing on the preferred candidate.

    Returns None when no tree covers the egresses; a REJECT decision when
    re-sizing cannot help either.
    """
    trees = list(trees)
    sel = select_tree(trees, egresses, class_id, brq, view)
    if sel is not None:
        return sel
    cands, superset = candidate_trees(trees, egresses)
    if not cands:
        return None
    return Selection(cands[0], view.decide(cands[0].edge_order, class_id, brq), superset)


@dataclass
class Encapsulation:
    flow: int
    rate: int
    channel: SsmChannel


@dataclass
class SessionMapping:
    tree: AggTree
    records: list[Encapsulation]
    deaggregation: tuple[str, ...]


@dataclass
class SessionMap:
    entries: dict[int, SessionMapping] = field(default_factory=dict)

    def map_session(self, session_id: int, flows: Sequence[int], tree: AggTree) -> SessionMapping:
        if session_id in self.entries:
            raise TreeError(f"session {session_id} already mapped; switch it instead")
        if not flows:
            raise TreeError(f"session {session_id} has no flows")
        m = SessionMapping(tree, [Encapsulation(k, r, tree.channel) for k, r in enumerate(flows)], tree.egresses)
        self.entries[session_id] = m
        return m

    def remap(self, session_id: int, tree: AggTree) -> SessionMapping:
        old = self.entries.pop(session_id)
        return self.map_session(session_id, [r.rate for r in old.records], tree)

    def unmap(self, session_id: int) -> SessionMapping:
        return self.entries.pop(session_id)

    def tree_of(self, session_id: int) -> AggTree:
        return self.entries[session_id].tree

    def __contains__(self, session_id: int) -> bool:
        return session_id in self.entries


class SwitchKind(enum.Enum):
    SWITCHED = "Switched"
    READJUSTED = "Readjusted"
    DENIED = "Denied"


@dataclass
class SwitchPlan:
    kind: SwitchKind
    tree: AggTree | None = None
    decision: Decision | None = None
    superset: bool = False


def switch_session(sessions: SessionMap, session_id: int, new_egresses: Iterable[str],
                   trees: Iterable[AggTree], view: IngressPathView, class_id: str, brq: int) -> SwitchPlan:
    """Pick the tree a session should move to.

    The session's own usage on its current tree is discounted while
    deciding. SWITCHED needs no signaling; READJUSTED needs one RESERVE(O)
    round trip before the move.
    """
    if session_id not in sessions:
        raise TreeError(f"unknown session {session_id}")
    old = sessions.tree_of(session_id)
    own = [i for i in old.edge_order if i in view.links]
    view.release(own, class_id, brq)
    try:
        sel = choose_tree(trees, new_egresses, class_id, brq, view)
    finally:
        view.commit(own, class_id, brq)
    if sel is None or sel.decision is Decision.REJECT:
        return SwitchPlan(SwitchKind.DENIED)
    if sel.decision is Decision.ADMIT_FREE:
        return SwitchPlan(SwitchKind.SWITCHED, sel.tree, sel.decision, sel.superset)
    return SwitchPlan(SwitchKind.READJUSTED, sel.tree, sel.decision, sel.superset)
