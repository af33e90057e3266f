"""The ten acceptance criteria, one test each, at their stated tolerances."""

from __future__ import annotations

import random
import time
from collections import Counter

from helpers import FIXTURES, bov_oracle, brl_oracle, brute_force_subsets, check, fixture_net, flood_sim
from mara import agtree, asac
from mara.engine import MARA, MIRA, run
from mara.scenario import load_scenario

CONTROLLED = ("Premium", "Gold", "Silver")


def random_state(rng: random.Random, name: str = "Premium") -> asac.CosState:
    mrth = rng.choice([0, rng.randint(1, 50), rng.randint(1, 25_000_000)])
    brv = rng.randint(0, mrth) if mrth else 0
    bu = rng.randint(0, brv) if brv else 0
    crth = rng.randint(0, mrth) if mrth else 0
    return asac.CosState(name, crth, mrth, brv, bu)


def test_criterion_1_equation_oracles():
    rng = random.Random(1)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(10_000):
        cos = random_state(rng)
        brq = rng.randint(1, max(1, cos.mrth + 10))
        if asac.compute_bov(cos, brq) != bov_oracle(cos.bu, cos.mrth, brq):
            mismatches += 1
        table = {n: random_state(rng, n) for n in CONTROLLED}
        target = rng.choice(CONTROLLED)
        plan = asac.compute_readjust_plan(table, target, CONTROLLED)
        for name, share in plan.donors.items():
            c = table[name]
            if share.brl != brl_oracle(c.crth, c.mrth, c.brv, c.bu):
                mismatches += 1
        if set(plan.donors) != set(CONTROLLED) - {target}:
            mismatches += 1
    elapsed = time.perf_counter() - start
    check(1, "equation oracles", mismatches == 0 and elapsed < 5.0,
          f"{mismatches} mismatches over 10000 cases in {elapsed:.2f}s (limit 5s)")


def test_criterion_2_conservation():
    rng = random.Random(2)
    broken = []
    for k in range(1000):
        cap = rng.randint(1_000_000, 200_000_000)
        table = asac.make_cos_table(cap, asac.DEFAULT_CLASSES)
        for cos in table.values():
            cos.brv = rng.randint(0, cos.mrth)
            cos.bu = rng.randint(0, cos.brv)
        # a few rounds so tables drift away from the initial shape
        for _ in range(rng.randint(1, 4)):
            before = sum(c.mrth for c in table.values())
            plan = asac.compute_readjust_plan(table, rng.choice(CONTROLLED), CONTROLLED)
            asac.apply_readjust_plan(table, plan)
            if sum(c.mrth for c in table.values()) != before:
                broken.append((k, "sum"))
            for c in table.values():
                if c.mrth < c.crth:
                    broken.append((k, c.class_id))
    check(2, "MRth conservation and commitment floor", not broken,
          f"{len(broken)} violations over 1000 applied plans")


def test_criterion_3_tree_enumeration():
    start = time.perf_counter()
    compared = 0
    wrong = []
    for name in ("line2.json", "diamond.json", "converge6.json", "topo14.json"):
        net = fixture_net(name)
        sim = flood_sim(net, hop_cap=None)
        ingress = sim.ingress
        if len(sim.collected) > 5:
            continue
        by_egress: dict[str, list[list[str]]] = {}
        for p in sim.all_init_paths:
            by_egress.setdefault(net.links[p[-1]].dst, []).append(p)
        # the first-arrival choice plus alternative flood paths, which can converge
        rng = random.Random(name)
        choices = [dict(sim.collected)]
        for _ in range(20):
            choices.append({e: rng.choice(ps) for e, ps in sorted(by_egress.items())})
        for paths in choices:
            for cap in (None, 1, 2, 3, 4, 5, 6):
                alloc = agtree.GroupAllocator(ingress)
                ub = agtree.build_unbranched_trees(net, ingress, paths, alloc)
                got = agtree.enumerate_branched_trees(net, ub, cap, alloc)
                plist = [next(iter(t.paths.values())) for t in ub]
                want = brute_force_subsets(net, plist, ingress, cap)
                got_sets = {frozenset(plist.index(p) for p in t.paths.values()) for t in got}
                compared += 1
                if got_sets != want or len(got) != len(want):
                    wrong.append((name, cap))
    elapsed = time.perf_counter() - start
    check(3, "tree enumeration equals 2^n oracle", not wrong and elapsed < 10.0,
          f"{compared} catalog comparisons, {len(wrong)} differ, {elapsed:.2f}s (limit 10s)")


def test_criterion_4_signaling_reduction(paired_runs):
    mara = sum(s["total_signaling_bytes"] for s in paired_runs[MARA])
    mira = sum(s["total_signaling_bytes"] for s in paired_runs[MIRA])
    per_seed = [a["total_signaling_bytes"] / b["total_signaling_bytes"]
                for a, b in zip(paired_runs[MARA], paired_runs[MIRA])]
    ratio = mara / mira
    elapsed = paired_runs["elapsed"]
    ok = ratio <= 0.60 and max(per_seed) <= 0.60 and elapsed < 120
    check(4, "signaling reduction", ok,
          f"MARA/MIRA bytes {ratio:.3f} (reduction {100 * (1 - ratio):.1f}%, worst seed {max(per_seed):.3f}, "
          f"limit 0.60), 20 runs in {elapsed:.1f}s")


def test_criterion_5_signaling_free_admissions(paired_runs):
    free = sum(s["signaling_free_admissions"] for s in paired_runs[MARA])
    total = sum(s["admissions"] for s in paired_runs[MARA])
    worst = min(s["signaling_free_pct"] for s in paired_runs[MARA])
    pct = 100.0 * free / total
    check(5, "signaling-free admissions", pct >= 50.0 and worst >= 50.0,
          f"{pct:.1f}% AdmitFree overall, lowest seed {worst:.1f}% (limit 50%)")


def test_criterion_6_multicast_state(paired_runs):
    changes = [s["multicast_state"]["changes_after_init"] for s in paired_runs[MARA]]
    ratios = [a["multicast_state"]["mean"] / b["multicast_state"]["mean"]
              for a, b in zip(paired_runs[MARA], paired_runs[MIRA])]
    ok = all(c == 0 for c in changes) and max(ratios) <= 0.5
    check(6, "multicast state", ok,
          f"changes after init {sum(changes)}, MARA/MIRA mean state worst {max(ratios):.3f} (limit 0.5)")


def test_criterion_7_teardown_signaling(paired_runs):
    mara_t = [s["bytes"]["RESERVE_T"] for s in paired_runs[MARA]]
    mira_t = [s["bytes"]["RESERVE_T"] for s in paired_runs[MIRA]]
    admitted = [s["admissions"] for s in paired_runs[MIRA]]
    ok = all(b == 0 for b in mara_t) and all(b > 0 for b, n in zip(mira_t, admitted) if n >= 1)
    check(7, "teardown signaling", ok, f"MARA RESERVE(T) bytes {sum(mara_t)}, MIRA min {min(mira_t)}")


def test_criterion_8_initialization_cost(paired_runs):
    inits = [s["init"] for s in paired_runs[MARA]]
    share = max(i["max_link_share"] for i in inits)
    diam = inits[0]["diameter_s"]
    t = max(i["complete_time"] for i in inits)
    ok = share <= 0.10 and t <= 5 * diam
    check(8, "initialization cost", ok,
          f"peak per-link share {100 * share:.2f}% (limit 10%), init {t * 1000:.1f} ms = {t / diam:.2f} diameters (limit 5)")


def test_criterion_9_hop_cap(paired_runs):
    depths: Counter = Counter()
    for s in paired_runs[MARA]:
        depths.update({int(d): n for d, n in s["trees"]["selected_depths"].items()})
    ok = max(depths) <= 6
    dist = ", ".join(f"{d} hops: {n}" for d, n in sorted(depths.items()))
    check(9, "hop cap", ok, f"selected tree depths {{{dist}}}")


def test_criterion_10_determinism():
    same = True
    for mode in (MARA, MIRA):
        for seed in (0, 7):
            reports = []
            for _ in range(2):
                sc = load_scenario(FIXTURES / "scenario14.json")
                sc.mode, sc.seed = mode, seed
                reports.append(run(sc))
            a, b = reports
            same &= a.to_json() == b.to_json() and a.to_csv() == b.to_csv()
    check(10, "determinism", same, "byte-identical summary JSON and CSV for repeated (scenario, seed) pairs")
