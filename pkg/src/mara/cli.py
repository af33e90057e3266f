"""mara command line: run a scenario, compare MARA with MIRA, generate topologies."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import agtree
from .engine import MARA, MIRA, MODES, ScenarioConfig, Simulation, SimulationError
from .scenario import ScenarioError, load_scenario
from .topology import GeneratorParams, dump_topology, load_topology, random_topology

EXIT_OK = 0
EXIT_IO = 3
EXIT_CONFIG = 4
EXIT_ABORT = 5

log = logging.getLogger("mara")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code

    def __reduce__(self):
        return CliError, (self.code, str(self))


def _write_files(files: dict[Path, str]) -> None:
    """Write all files or none: everything is staged next to its target first."""
    staged = []
    try:
        for path, text in files.items():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    except OSError as exc:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)
        raise CliError(EXIT_IO, f"cannot write output: {exc}") from exc


def _load(path: str, args) -> ScenarioConfig:
    try:
        sc = load_scenario(path)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read scenario: {exc}") from exc
    except ScenarioError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    changes = {}
    if getattr(args, "hop_cap", None) is not None:
        changes["hop_cap"] = args.hop_cap
    if getattr(args, "init_factor", None) is not None:
        changes["init_factor"] = args.init_factor
    if getattr(args, "mode", None):
        changes["mode"] = args.mode
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    sc = replace(sc, **changes)
    try:
        sc.validate()
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    return sc


def simulate(sc: ScenarioConfig) -> tuple[dict, str, str, str]:
    """Run once; returns (summary, summary json, metrics csv, tree catalog json)."""
    sim = Simulation(sc)
    report = sim.run()
    return report.summary, report.to_json(), report.to_csv(), agtree.catalog_dump(sim.catalog)


def _run_files(out: Path, sc: ScenarioConfig, result, dump_trees: bool) -> dict[Path, str]:
    _, js, csv_text, trees = result
    d = out / f"{sc.mode}-{sc.seed}"
    files = {d / "metrics.csv": csv_text, d / "summary.json": js}
    if dump_trees:
        files[d / "trees.json"] = trees
    return files


def _simulate_checked(sc: ScenarioConfig):
    try:
        return simulate(sc)
    except (SimulationError, agtree.TreeError, AssertionError) as exc:
        raise CliError(EXIT_ABORT, f"seed {sc.seed} ({sc.mode}) aborted: {exc}") from exc


def cmd_run(args) -> int:
    sc = _load(args.scenario, args)
    result = _simulate_checked(sc)
    _write_files(_run_files(Path(args.out), sc, result, args.dump_trees))
    s = result[0]
    print(f"{sc.mode} seed {sc.seed}: {s['admissions']}/{s['requests']} admitted, "
          f"{s['total_signaling_bytes']} signaling bytes, mean state {s['multicast_state']['mean']:.1f}")
    return EXIT_OK


def _reduction(mira: float, mara: float) -> float | None:
    return 100.0 * (mira - mara) / mira if mira > 0 else None


def _mean(xs: list[float]) -> float:
    return sum(xs) / len(xs) if xs else 0.0


def compare_summaries(mara: list[dict], mira: list[dict]) -> dict:
    """Per-metric seed means for both modes and the reduction MARA achieves."""
    def metrics(s: dict) -> dict[str, float]:
        m = {
            "total_reserve_bytes": s["total_reserve_bytes"],
            "total_signaling_bytes": s["total_signaling_bytes"],
            "mean_multicast_state": s["multicast_state"]["mean"],
            "signaling_free_pct": s["signaling_free_pct"],
        }
        for cls, v in s["classes"].items():
            m[f"blocking_pct_{cls}"] = v["blocking_pct"]
        return m

    a = [metrics(s) for s in mara]
    b = [metrics(s) for s in mira]
    out = {}
    for key in a[0]:
        ma = _mean([m[key] for m in a])
        mi = _mean([m[key] for m in b])
        out[key] = {"mara_value": ma, "mira_value": mi, "reduction_percent": _reduction(mi, ma)}
    return {
        "seeds": [s["seed"] for s in mara],
        "modes": [mara[0]["mode"], mira[0]["mode"]],
        "metrics": out,
    }


def format_table(summary: dict) -> str:
    lines = [f"{'metric':32} {'MIRA':>14} {'MARA':>14} {'reduction %':>12}"]
    for key, m in summary["metrics"].items():
        red = "n/a" if m["reduction_percent"] is None else f"{m['reduction_percent']:.2f}"
        lines.append(f"{key:32} {m['mira_value']:>14.2f} {m['mara_value']:>14.2f} {red:>12}")
    return "\n".join(lines)


def parse_seeds(text: str) -> list[int]:
    try:
        seeds = [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"bad --seeds value {text!r}") from exc
    if not seeds:
        raise CliError(EXIT_CONFIG, "--seeds is empty")
    return seeds


def cmd_compare(args) -> int:
    base = _load(args.scenario, args)
    seeds = parse_seeds(args.seeds)
    modes = (args.force_mode, args.force_mode) if args.force_mode else (MARA, MIRA)
    jobs = [replace(base, mode=m, seed=s) for s in seeds for m in modes]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_simulate_checked, sc) for sc in jobs]
            results = [f.result() for f in futures]
    else:
        results = [_simulate_checked(sc) for sc in jobs]
    out = Path(args.out)
    files: dict[Path, str] = {}
    # a forced self-comparison runs one mode twice; both land in the same directory
    for sc, res in zip(jobs, results):
        files.update(_run_files(out, sc, res, args.dump_trees))
    mara = [r[0] for r in results[0::2]]
    mira = [r[0] for r in results[1::2]]
    summary = compare_summaries(mara, mira)
    files[out / "compare.json"] = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    _write_files(files)
    print(format_table(summary))
    return EXIT_OK


def cmd_gen_topo(args) -> int:
    params = GeneratorParams(egress_count=args.egress_count)
    if args.capacity_range:
        params.capacity_range = (int(args.capacity_range[0]), int(args.capacity_range[1]))
    if args.delay_range:
        params.delay_range = tuple(args.delay_range)
    try:
        net = random_topology(args.nodes, args.seed, params)
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, str(exc)) from exc
    text = dump_topology(net)
    load_topology(text)  # must round-trip
    _write_files({Path(args.out): text})
    print(f"wrote {args.out}: {len(net.nodes)} nodes, {len(net.cables)} links")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mara", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--hop-cap", type=int, help="override the tree hop cap")
        sp.add_argument("--init-factor", type=float, help="override the initialization factor")
        sp.add_argument("--dump-trees", action="store_true", help="also write the tree catalog")

    r = sub.add_parser("run", help="run one scenario")
    common(r)
    r.add_argument("--mode", choices=MODES)
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="paired MARA/MIRA runs over several seeds")
    common(c)
    c.add_argument("--seeds", default="0", help="comma-separated seeds")
    c.add_argument("--force-mode", choices=MODES, help="debug: run the same mode on both sides")
    c.add_argument("--jobs", type=int, default=1, help="parallel engine runs")
    c.set_defaults(func=cmd_compare)

    g = sub.add_parser("gen-topo", help="generate a random topology file")
    g.add_argument("-n", "--nodes", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--egress-count", type=int)
    g.add_argument("--capacity-range", type=float, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--delay-range", type=float, nargs=2, metavar=("LO", "HI"))
    g.set_defaults(func=cmd_gen_topo)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"mara: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
