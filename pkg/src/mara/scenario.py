"""Scenario documents: topology reference, classes, workload, mode and scripted events."""

from __future__ import annotations

import json
from pathlib import Path

from .asac import DEFAULT_CLASSES, ClassConfig
from .engine import MODES, ScenarioConfig, ScriptedEvent
from .topology import load_topology, load_topology_file
from .workload import WorkloadConfig

KEYS = {
    "topology", "classes", "init_factor", "hop_cap", "mode", "seed", "tick", "workload",
    "events", "processing_delay", "ingress", "literal_brv_update", "check_invariants",
}


class ScenarioError(ValueError):
    pass


def _event(d: dict) -> ScriptedEvent:
    kind = d.get("kind")
    if kind == "leaf_change":
        return ScriptedEvent(float(d["time"]), kind, session=int(d["session"]), egresses=tuple(sorted(d["egresses"])))
    if kind == "link_fail":
        a, b = d["link"]
        return ScriptedEvent(float(d["time"]), kind, link=(str(a), str(b)))
    raise ScenarioError(f"unknown event kind {kind!r}")


def parse_scenario(doc: dict, base_dir: Path | None = None) -> ScenarioConfig:
    """Build a validated config. A string topology is a path relative to ``base_dir``."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = set(doc) - KEYS
    if unknown:
        raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
    try:
        topo = doc["topology"]
        if isinstance(topo, str):
            path = Path(topo)
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            net = load_topology_file(path)
        else:
            net = load_topology(topo)
        classes = [ClassConfig(**c) for c in doc["classes"]] if "classes" in doc else list(DEFAULT_CLASSES)
        mode = str(doc.get("mode", "MARA")).upper()
        if mode not in MODES:
            raise ScenarioError(f"mode must be one of {MODES}")
        sc = ScenarioConfig(
            network=net,
            classes=classes,
            init_factor=float(doc.get("init_factor", 0.25)),
            hop_cap=doc.get("hop_cap", 6),
            workload=WorkloadConfig.from_dict(doc.get("workload", {})),
            mode=mode,
            seed=int(doc.get("seed", 0)),
            tick=float(doc.get("tick", 1.0)),
            processing_delay=float(doc.get("processing_delay", 0.0)),
            ingress=doc.get("ingress"),
            events=[_event(e) for e in doc.get("events", [])],
            literal_brv=bool(doc.get("literal_brv_update", False)),
            check_invariants=bool(doc.get("check_invariants", False)),
        )
        sc.workload.validate()
        sc.validate()
    except ScenarioError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario: {exc}") from exc
    return sc


def load_scenario(path: str | Path) -> ScenarioConfig:
    """Read a scenario file. OSError propagates so callers can tell I/O from parse errors."""
    path = Path(path)
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON: {exc}") from exc
    return parse_scenario(doc, path.parent)
