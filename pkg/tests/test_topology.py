from __future__ import annotations

import itertools
import json

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import fixture_net, min_hops, transit_graph
from mara.topology import (
    GeneratorParams,
    Network,
    TopologyError,
    delay_diameter,
    dump_topology,
    load_topology,
    path_nodes,
    random_topology,
    shortest_paths_oracle,
)

TWO_NODE = {
    "nodes": [{"id": "I", "role": "ingress"}, {"id": "E", "role": "egress"}],
    "links": [{"from": "I", "to": "E", "capacity_bps": 10_000_000, "delay_s": 0.001}],
}


def line(*names, roles=None):
    roles = roles or ["ingress"] + ["core"] * (len(names) - 2) + ["egress"]
    return Network(zip(names, roles), [(a, b, 10_000_000, 0.001) for a, b in zip(names, names[1:])])


def test_two_node_document():
    net = load_topology(json.dumps(TWO_NODE))
    assert len(net.nodes) == 2
    assert len(net.cables) == 1
    assert len(net.links) == 2  # one cable, both directions


def test_missing_egress_rejected():
    doc = {"nodes": [{"id": "I", "role": "ingress"}, {"id": "A", "role": "core"}],
           "links": [{"from": "I", "to": "A", "capacity_bps": 1, "delay_s": 0}]}
    with pytest.raises(TopologyError):
        load_topology(doc)


@pytest.mark.parametrize("mutate", [
    lambda d: d["links"][0].update(capacity_bps=0),
    lambda d: d["links"][0].update(delay_s=-1),
    lambda d: d["links"].append(dict(d["links"][0])),
    lambda d: d["links"].append({"from": "I", "to": "I", "capacity_bps": 1, "delay_s": 0}),
    lambda d: d["nodes"].append({"id": "X", "role": "core"}),
    lambda d: d["nodes"][0].update(role="router"),
    lambda d: d.pop("links"),
])
def test_invalid_documents(mutate):
    doc = json.loads(json.dumps(TWO_NODE))
    mutate(doc)
    with pytest.raises(TopologyError):
        load_topology(doc)


def test_malformed_json():
    with pytest.raises(TopologyError):
        load_topology("{not json")


def test_fourteen_node_fixture():
    net = fixture_net("topo14.json")
    assert len(net.nodes) == 14
    assert len(net.ingresses()) == 1
    assert len(net.egresses()) == 5


def test_generator_is_deterministic():
    assert random_topology(14, 7) == random_topology(14, 7)
    assert dump_topology(random_topology(14, 7)) == dump_topology(random_topology(14, 7))


def test_smallest_generated_network():
    net = random_topology(2, 1)
    assert sorted(n.role for n in net.nodes.values()) == ["egress", "ingress"]
    assert len(net.cables) == 1


def test_generated_network_reachability():
    net = random_topology(14, 3)
    g = nx.Graph()
    g.add_edges_from((a, b) for a, b, _, _ in net.cables)
    ingress = net.ingresses()[0]
    assert set(nx.node_connected_component(g, ingress)) == set(net.nodes)


def test_generator_rejects_bad_params():
    with pytest.raises(ValueError):
        random_topology(5, 0, GeneratorParams(capacity_range=(10, 1)))
    with pytest.raises(ValueError):
        random_topology(1, 0)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(2, 20), seed=st.integers(0, 10_000))
def test_generated_networks_are_valid(n, seed):
    net = random_topology(n, seed)
    assert len(net.nodes) == n
    assert len(net.ingresses()) == 1
    assert len(net.egresses()) >= min(2, n - 1)
    lo, hi = GeneratorParams().capacity_range
    assert all(lo <= l.capacity <= hi for l in net.links.values())
    ifaces = [i for node in net.nodes.values() for i in node.interfaces]
    assert len(ifaces) == len(set(ifaces)) == len(net.links)
    # round trip
    assert load_topology(dump_topology(net)) == net
    # every egress gets a path, and its length is the networkx minimum
    paths = shortest_paths_oracle(net, net.ingresses()[0])
    assert set(paths) == set(net.egresses())
    assert {e: len(p) for e, p in paths.items()} == min_hops(net, net.ingresses()[0])


def test_line_shortest_path():
    net = line("I", "A", "E")
    assert shortest_paths_oracle(net, "I") == {"E": ["I.if1", "A.if2"]}
    assert path_nodes(net, ["I.if1", "A.if2"]) == ["I", "A", "E"]


def test_diamond_tie_break_matches_exhaustive_enumeration():
    net = Network(
        [("I", "ingress"), ("A", "core"), ("B", "core"), ("E", "egress")],
        [("I", "B", 1, 0.001), ("I", "A", 1, 0.001), ("A", "E", 1, 0.001), ("B", "E", 1, 0.001)],
    )
    g = transit_graph(net)
    candidates = []
    for nodes in nx.all_simple_paths(g, "I", "E", cutoff=2):
        candidates.append([g.edges[u, v]["iface"] for u, v in itertools.pairwise(nodes)])
    expected = min(candidates, key=lambda p: (len(p), p))
    first = shortest_paths_oracle(net, "I")["E"]
    assert first == expected
    assert all(shortest_paths_oracle(net, "I")["E"] == first for _ in range(5))


def test_oracle_paths_on_fixture_are_nonempty():
    net = fixture_net("topo14.json")
    paths = shortest_paths_oracle(net, net.ingresses()[0])
    assert len(paths) == len(net.egresses())
    assert all(len(p) >= 1 for p in paths.values())


def test_oracle_skips_excluded_interfaces():
    net = Network(
        [("I", "ingress"), ("A", "core"), ("B", "core"), ("E", "egress")],
        [("I", "A", 1, 0.001), ("A", "E", 1, 0.001), ("A", "B", 1, 0.001), ("B", "E", 1, 0.001)],
    )
    direct = net.link_between("A", "E")
    paths = shortest_paths_oracle(net, "I", exclude={direct.iface})
    assert path_nodes(net, paths["E"]) == ["I", "A", "B", "E"]


def test_edges_do_not_transit():
    # E1 sits between I and E2; an edge router may not forward, so E2 is unreachable
    with pytest.raises(TopologyError):
        line("I", "E1", "E2", roles=["ingress", "egress", "egress"])


def test_delay_diameter_of_line():
    net = Network([("I", "ingress"), ("A", "core"), ("E", "egress")],
                  [("I", "A", 1, 0.002), ("A", "E", 1, 0.003)])
    assert delay_diameter(net) == pytest.approx(0.005)
