"""Independent oracles and shared plumbing for the test suite.

The oracles here deliberately avoid the package's own helpers: arithmetic
goes through Fraction + math.floor, tree enumeration is a plain 2^n sweep,
and path checks use networkx.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from importlib import resources
from pathlib import Path

import networkx as nx

from mara.engine import ScenarioConfig, Simulation
from mara.topology import load_topology_file
from mara.workload import SessionRequest, WorkloadConfig

FIXTURES = Path(str(resources.files("mara") / "fixtures"))

# acceptance criterion number -> one summary line
RESULTS: dict[int, str] = {}


def check(num: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {num:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS[num] = line
    print(line)
    assert ok, line


def fixture_net(name: str):
    return load_topology_file(FIXTURES / name)


# ---------------------------------------------------------------- arithmetic


def bov_oracle(bu: int, mrth: int, brq: int) -> int:
    if mrth <= 0:
        return -1
    avail = mrth - bu - brq
    value = math.floor(Fraction(bu, mrth) * avail)
    if avail < 0 and value >= 0:
        return -1
    return value


def brl_oracle(crth: int, mrth: int, brv: int, bu: int) -> int:
    b_idx = Fraction(1) if brv == 0 else Fraction(brv - bu) / brv
    bref = crth if bu < crth else brv
    if mrth - bref <= 0:
        return 0
    th_idx = Fraction(mrth - bref) / mrth
    return math.floor((b_idx + th_idx) / 2 * (mrth - bref))


# ---------------------------------------------------------------- trees


def union_ok(net, paths, ingress, hop_cap) -> bool:
    """F1/F2/F3 checked straight from the edge union."""
    edges = set(itertools.chain.from_iterable(paths))
    srcs = [net.links[e].src for e in edges]
    dsts = [net.links[e].dst for e in edges]
    if srcs.count(ingress) > 1:
        return False
    if len(dsts) != len(set(dsts)):
        return False
    if hop_cap is not None and max(len(p) for p in paths) > hop_cap:
        return False
    return True


def brute_force_subsets(net, paths: list[list[str]], ingress: str, hop_cap) -> set[frozenset[int]]:
    n = len(paths)
    out = set()
    for mask in range(1 << n):
        idx = [k for k in range(n) if mask >> k & 1]
        if len(idx) >= 2 and union_ok(net, [paths[k] for k in idx], ingress, hop_cap):
            out.add(frozenset(idx))
    return out


# ---------------------------------------------------------------- paths


def transit_graph(net) -> nx.DiGraph:
    """Directed graph where only core nodes (and the source ingress) forward."""
    g = nx.DiGraph()
    g.add_nodes_from(net.nodes)
    for link in net.links.values():
        g.add_edge(link.src, link.dst, iface=link.iface)
    return g


def min_hops(net, ingress: str) -> dict[str, int]:
    g = transit_graph(net)
    # strip edges leaving non-core nodes other than the ingress
    for node in list(g.nodes):
        if node != ingress and net.role(node) != "core":
            g.remove_edges_from(list(g.out_edges(node)))
    lengths = nx.single_source_shortest_path_length(g, ingress)
    return {e: lengths[e] for e in net.egresses() if e in lengths}


# ---------------------------------------------------------------- runs


def flood_sim(net, hop_cap=6) -> Simulation:
    """A MARA run that only initializes (one late session keeps the workload valid)."""
    req = SessionRequest(0, 0.9, 1.0, "Premium", (net.egresses()[0],), (32_000,))
    sc = ScenarioConfig(network=net, hop_cap=hop_cap, workload=WorkloadConfig(session_count=1, duration=1.0),
                        requests=[req])
    sim = Simulation(sc)
    sim.run()
    return sim


def scenario(net, mode="MARA", requests=None, duration=10.0, **kw) -> ScenarioConfig:
    return ScenarioConfig(network=net, mode=mode, requests=requests,
                          workload=WorkloadConfig(session_count=max(1, len(requests or [])), duration=duration), **kw)
