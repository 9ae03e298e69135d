"""Staged pipeline and command-line interface.

Each subcommand reads upstream artifacts from the run directory and writes
its own; ``run`` executes every stage in order.  Artifacts embed the config
hash and the package version, and contain no timestamps, so identical
configurations give identical files.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .anosov import HyperbolicityError, ToralAutomorphism
from .coding import (FirstReturnWord, MarkovGraph, StructuralViolation, build_graph, certify_crossing_set,
                     components, compose_crossings, enumerate_first_return_words, EnumerationStats)
from .entropy import (boundary_proximity_stats, gurevich_entropy_truncated, leafwise_entropy,
                      loop_equation_entropy, parry_measure, proximity_exact_markov,
                      pushforward_cylinder_measure, LeafSegment)
from .extension import extension_table
from .partition import UsPartition, build_partition, markov_seed, multiplicity, non_markov_seed, refine
from .symbolic import BoundaryOrbitError, Orbit, fiber_cardinality, symbolic_manifold, verdict_of

STAGES = ("partition", "symbolic", "extension", "markov", "entropy", "report")
PRODUCER = {"partition.json": "partition", "symbolic.json": "symbolic", "extension.json": "extension",
            "graph.json": "markov", "words.csv": "markov", "entropy.json": "entropy"}


class ConfigError(ValueError):
    pass


class MissingArtifactError(FileNotFoundError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception, partial: Optional[dict] = None):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.partial = partial or {}


@dataclass
class RunConfig:
    matrix: list = field(default_factory=lambda: [2, 1, 1, 1])
    seed_net: str = "non-markov"            # markov | non-markov
    non_markov_offset: str = "1/37"
    diameter: str = "3/10"
    refine_n: int = 3                       # multiplicity check depth
    manifold_tolerance: str = "0"
    d_p: int = 1
    d_f: int = 1
    max_len: list = field(default_factory=lambda: [12])
    leafwise_N: int = 12
    extension_T: list = field(default_factory=lambda: [1, 2, 4, 8])
    extension_coarse: str = "3/5"
    extension_fine: str = "3/10"
    samples: int = 500
    extension_samples: int = 200
    r1_grid: list = field(default_factory=lambda: [0.001, 0.003, 0.01, 0.03, 0.1])
    seed: int = 0
    out: str = "run"

    def validate(self) -> "RunConfig":
        if len(self.matrix) != 4:
            raise ConfigError("matrix needs four integers")
        ToralAutomorphism(self.matrix)  # raises HyperbolicityError
        if self.seed_net not in ("markov", "non-markov"):
            raise ConfigError("seed_net must be 'markov' or 'non-markov'")
        if Fraction(self.diameter) <= 0:
            raise ConfigError("diameter must be positive")
        for name in ("refine_n", "d_p", "d_f", "leafwise_N", "samples", "extension_samples"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if not self.max_len or min(self.max_len) < 1:
            raise ConfigError("max_len must be positive")
        if any(T < 1 for T in self.extension_T):
            raise ConfigError("extension T values must be positive")
        if any(r <= 0 for r in self.r1_grid):
            raise ConfigError("r1 values must be positive")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @property
    def hash(self) -> str:
        d = self.to_dict()
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def stream(self, stage: str) -> int:
        """Named sub-seed for a stage."""
        h = hashlib.sha256(f"{self.seed}:{stage}".encode()).digest()
        return int.from_bytes(h[:8], "little")


# ---------------------------------------------------------------------------
# artifact io


def _meta(cfg: RunConfig) -> dict:
    return {"config_hash": cfg.hash, "version": __version__}


def _write_json(path: Path, doc: dict, cfg: RunConfig) -> None:
    doc = {"meta": _meta(cfg), **doc}
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def _write_csv(path: Path, header: list, rows: list, cfg: RunConfig) -> None:
    buf = io.StringIO()
    buf.write(f"# config_hash={cfg.hash} version={__version__}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(r)
    path.write_text(buf.getvalue())


def _read_json(out: Path, name: str) -> dict:
    p = out / name
    if not p.exists():
        raise MissingArtifactError(f"{p} not found; run the '{PRODUCER.get(name, '?')}' subcommand first")
    return json.loads(p.read_text())


def _fmap(cfg: RunConfig) -> ToralAutomorphism:
    return ToralAutomorphism(cfg.matrix)


def _seed_partition(cfg: RunConfig, fmap: ToralAutomorphism) -> UsPartition:
    if cfg.seed_net == "markov":
        return markov_seed(fmap)
    return non_markov_seed(fmap, Fraction(cfg.non_markov_offset))


def _load_partition(cfg: RunConfig, fmap: ToralAutomorphism) -> UsPartition:
    return UsPartition.from_json(fmap, _read_json(Path(cfg.out), "partition.json")["partition"])


# ---------------------------------------------------------------------------
# stages


def stage_partition(cfg: RunConfig) -> dict:
    fmap = _fmap(cfg)
    P = build_partition(fmap, Fraction(cfg.diameter), _seed_partition(cfg, fmap))
    mult = {n: multiplicity(refine(P, n)) for n in range(1, cfg.refine_n + 1)}
    doc = {"partition": P.to_json(), "elements": len(P), "markov_flag": P.markov_flag.value,
           "max_diameter_bound": float(P.max_diameter()),
           "expansivity_radius": float(fmap.r0),
           "multiplicity": {str(k): v for k, v in mult.items()}}
    _write_json(Path(cfg.out) / "partition.json", doc, cfg)
    return doc


def stage_symbolic(cfg: RunConfig) -> dict:
    from .extension import rational_samples
    fmap = _fmap(cfg)
    P = _load_partition(cfg, fmap)
    tol = Fraction(cfg.manifold_tolerance)
    counts = {"u": {}, "s": {}}
    fibers = []
    skipped = 0
    for x in rational_samples(cfg.samples, cfg.stream("symbolic")):
        orb = Orbit(fmap, x)
        try:
            for axis in ("u", "s"):
                v = verdict_of(symbolic_manifold(fmap, P, orb, axis, tol)).verdict.value
                counts[axis][v] = counts[axis].get(v, 0) + 1
            fibers.append(fiber_cardinality(fmap, P, orb, 2))
        except BoundaryOrbitError:
            skipped += 1
    doc = {"samples": cfg.samples, "skipped": skipped, "verdicts": counts,
           "fiber_max": max(fibers) if fibers else None,
           "fiber_histogram": {str(k): fibers.count(k) for k in sorted(set(fibers))}}
    _write_json(Path(cfg.out) / "symbolic.json", doc, cfg)
    return doc


def stage_extension(cfg: RunConfig) -> dict:
    fmap = _fmap(cfg)
    rows = extension_table(fmap, cfg.extension_T, Fraction(cfg.extension_coarse),
                           Fraction(cfg.extension_fine), cfg.extension_samples,
                           cfg.stream("extension"), _seed_partition(cfg, fmap))
    header = list(rows[0]) if rows else ["T"]
    _write_csv(Path(cfg.out) / "extension.csv", header, [[r[h] for h in header] for r in rows], cfg)
    doc = {"rows": rows}
    _write_json(Path(cfg.out) / "extension.json", doc, cfg)
    return doc


def stage_markov(cfg: RunConfig) -> dict:
    fmap = _fmap(cfg)
    P = _load_partition(cfg, fmap)
    certs = certify_crossing_set(fmap, P, cfg.d_p, cfg.d_f, Fraction(cfg.manifold_tolerance))
    L = max(cfg.max_len)
    stats = EnumerationStats()
    words = enumerate_first_return_words(fmap, P, certs, L, stats) if certs else []
    G = build_graph(words)
    comps = components(G)
    out = Path(cfg.out)
    _write_csv(out / "words.csv", ["id", "length", "symbols", "shifts"],
               [[i, w.n, " ".join(map(str, w.symbols)), " ".join(f"{m}:{n}" for m, n in w.shifts)]
                for i, w in enumerate(words)], cfg)
    doc = {"graph": G.to_json(), "max_len": L,
           "certificates": len(certs), "certified_symbols": len(certs.symbols),
           "rejected_cylinders": len(certs.rejected),
           "words_by_length": {str(k): v for k, v in sorted(stats.by_length.items())},
           "components": [{"id": c.id, "vertices": int(len(c.vertices)), "stars": c.stars,
                           "cyclic": c.cyclic, "positive_entropy": c.positive_entropy}
                          for c in comps if c.cyclic],
           "diagnostic": stats.diagnostic}
    _write_json(out / "graph.json", doc, cfg)
    return doc


def _graph_from_json(doc: dict) -> list[FirstReturnWord]:
    g = doc["graph"]
    return [FirstReturnWord(tuple(w["symbols"]), tuple(tuple(s) for s in w["shifts"]), None, None, None)
            for w in g["words"]]


def stage_entropy(cfg: RunConfig) -> dict:
    fmap = _fmap(cfg)
    P = _load_partition(cfg, fmap)
    words = _graph_from_json(_read_json(Path(cfg.out), "graph.json"))
    areas = np.array([float(a) for a in P.areas()])
    series = []
    for L in sorted(cfg.max_len):
        G = build_graph([w for w in words if w.n <= L])
        comps = [c for c in components(G) if c.cyclic]
        rows = []
        for c in comps:
            est = gurevich_entropy_truncated(G, c, max_len=L)
            row = {"component": c.id, "vertices": int(len(c.vertices)), "stars": c.stars,
                   "positive_entropy": c.positive_entropy, "entropy": est.value}
            if c.positive_entropy:
                star = int(next(v for v in c.vertices if v in set(G.stars.tolist())))
                loop = loop_equation_entropy(G, star, 4 * L + 40)
                ch = parry_measure(G, c)
                mass = pushforward_cylinder_measure(ch, G, len(P))
                row.update({"loop_equation": loop.value, "gap": abs(loop.value - est.value),
                            "parry_entropy_rate": ch.entropy_rate,
                            "pushforward_max_deviation": float(np.max(np.abs(mass - areas)))})
            rows.append(row)
        best = max((r["entropy"] for r in rows), default=-math.inf)
        series.append({"max_len": L, "entropy": best if math.isfinite(best) else None,
                       "positive_components": sum(r["positive_entropy"] for r in rows),
                       "components": rows})
    seg = LeafSegment.unit(fmap)
    leaf = leafwise_entropy(fmap, P, seg, cfg.leafwise_N) if len(P) <= 100 else None
    prox = boundary_proximity_stats(fmap, P, cfg.r1_grid, cfg.samples, cfg.stream("proximity"))
    exact = [proximity_exact_markov(fmap, P, r.r1) if P.is_markov else None for r in prox]
    _write_csv(Path(cfg.out) / "proximity.csv", ["r1", "fraction", "hits", "borderline", "samples",
                                                   "exact_markov"],
               [[r.r1, r.fraction, r.hits, r.borderline, r.samples, e] for r, e in zip(prox, exact)], cfg)
    doc = {"h_top": fmap.h_top, "series": series,
           "leafwise": leaf.to_dict() if leaf else None}
    _write_json(Path(cfg.out) / "entropy.json", doc, cfg)
    return doc


def stage_report(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    if not out.exists() or not any(out.glob("*.json")):
        raise MissingArtifactError(f"no artifacts in {out}; run the 'partition' subcommand first")
    part = _read_json(out, "partition.json")
    ent = _read_json(out, "entropy.json")
    graph = _read_json(out, "graph.json")
    h = ent["h_top"]
    final = ent["series"][-1]
    entropy = final["entropy"]
    checks = {
        "entropy_within_0.03": entropy is not None and abs(entropy - h) <= 0.03,
        "entropy_not_above_h_top": all(s["entropy"] is None or s["entropy"] <= h + 1e-9 for s in ent["series"]),
        "one_positive_component": final["positive_components"] == 1,
        "stars_in_every_cyclic_component": all(c["stars"] >= 1 for c in graph["components"]),
        "multiplicity_at_most_4": all(v <= 4 for v in part["multiplicity"].values()),
        "pushforward_within_0.05": all(c.get("pushforward_max_deviation", 0) <= 0.05
                                       for c in final["components"] if c["positive_entropy"]),
    }
    series = [[s["max_len"], s["entropy"]] for s in ent["series"]]
    _write_csv(out / "entropy_series.csv", ["max_len", "entropy"], series, cfg)
    summary = {"h_top": h, "entropy": entropy, "gap": None if entropy is None else h - entropy,
               "partition_elements": part["elements"], "markov_flag": part["markov_flag"],
               "words": sum(int(v) for v in graph["words_by_length"].values()),
               "entropy_series": series, "checks": checks, "passed": all(checks.values())}
    for name in ("symbolic.json", "extension.json"):
        if (out / name).exists():
            summary[name.split(".")[0]] = json.loads((out / name).read_text())
            summary[name.split(".")[0]].pop("meta", None)
    _write_json(out / "summary.json", summary, cfg)
    return summary


STAGE_FUNCS = {"partition": stage_partition, "symbolic": stage_symbolic, "extension": stage_extension,
               "markov": stage_markov, "entropy": stage_entropy, "report": stage_report}


def run_stage(cfg: RunConfig, stage: str) -> dict:
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    try:
        return STAGE_FUNCS[stage](cfg)
    except (MissingArtifactError, ConfigError, HyperbolicityError):
        raise
    except Exception as exc:
        err = StageError(stage, exc, {"config": cfg.to_dict()})
        (Path(cfg.out) / "error.json").write_text(json.dumps(
            {"stage": stage, "error": repr(exc), "partial": err.partial}, indent=1, sort_keys=True))
        raise err from exc


def run_pipeline(cfg: RunConfig, extension: bool = True) -> dict:
    cfg.validate()
    for stage in STAGES:
        if stage == "extension" and (not extension or not cfg.extension_T):
            continue
        result = run_stage(cfg, stage)
    return result


# ---------------------------------------------------------------------------
# argument parsing


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file mirroring RunConfig")
    common.add_argument("--matrix", type=_ints, help="a,b,c,d")
    common.add_argument("--seed-net", choices=["markov", "non-markov"])
    common.add_argument("--diameter", help="target diameter r (rational)")
    common.add_argument("--max-len", type=_ints, help="comma-separated truncation lengths")
    common.add_argument("--depth-past", type=int, dest="d_p")
    common.add_argument("--depth-future", type=int, dest="d_f")
    common.add_argument("--samples", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--non-markov-offset")
    common.add_argument("--extension-T", type=_ints, dest="extension_T")
    common.add_argument("--r1-grid", type=_floats, dest="r1_grid")
    common.add_argument("--leafwise-N", type=int, dest="leafwise_N")
    p = argparse.ArgumentParser(prog="anosov-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="all stages in order")
    for s in STAGES:
        sub.add_parser(s, parents=[common], help=f"{s} stage")
    return p


def config_from_args(args) -> RunConfig:
    base = {}
    if args.config:
        base = json.loads(Path(args.config).read_text())
    for key in ("matrix", "diameter", "max_len", "d_p", "d_f", "samples", "seed", "out",
                "non_markov_offset", "extension_T", "r1_grid", "leafwise_N", "seed_net"):
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    return RunConfig.from_dict(base).validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        if args.command == "run":
            summary = run_pipeline(cfg)
            print(json.dumps(summary["checks"], indent=1))
            return 0 if summary["passed"] else 1
        result = run_stage(cfg, args.command)
        if args.command == "report":
            print(json.dumps(result["checks"], indent=1))
            return 0 if result["passed"] else 1
        return 0
    except (HyperbolicityError, ConfigError, MissingArtifactError, StageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
