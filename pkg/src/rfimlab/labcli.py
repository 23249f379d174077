"""Experiment orchestration: configs, seeded runs, persisted records and the CLI.

A run writes ``records.jsonl`` (one line per replicate, each carrying the
master seed, replicate index and artifact version), then ``summary.json``
and ``summary.csv``. Summaries are computed from the records alone, so
reloading the records reproduces the summary exactly.
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
from pathlib import Path
from typing import Any, Callable

import numpy as np
import yaml

from . import __version__
from .bounds import CONSTANTS, BoundDomainError, evaluate_bound_chain
from .coarsegrain import (corridor_constants, corridor_violations, disagreement_cluster, key_lemma1_check,
                          scan_q_event)
from .disagreement import (GeometryError, LatticeRectangle, family_violations,
                           rectangle_crossed, rescale_to_curve_system, sample_disagreement)
from .lattice import LatticeError, enumerate_simply_connected
from .parallel import map_replicates
from .rfim import (CONVENTIONS, DISTRIBUTIONS, ModelError, ModelParams, binomial_half_width,
                   brute_force_ground_energy, decay_slope, energy, ground_state, ground_state_pair,
                   planted_field, sample_field)
from .tortuosity import T_statistic, choose_scale_params

KINDS = ("order-parameter", "zeta2", "crossing-stats", "tortuosity", "coarse-grain-verify", "q-scan",
         "bound-chain")
EXIT_OK, EXIT_VALIDATION, EXIT_INVARIANT = 0, 1, 2
CHUNK = 16

DEFAULT_PARAMS = {
    "order-parameter": {"L": 8},
    "zeta2": {"schedule": [1, 2, 4, 8, 16, 32, 64], "threshold": 0.5},
    "crossing-stats": {"ell": 64, "rectangles": [[92, 99, -20, 19]], "validate": False},
    "tortuosity": {"ell": 16, "s": 1.0, "r": 1.0, "max_contacts": 8},
    "coarse-grain-verify": {"perimeter_max": 12, "k_min": 2, "k_max": 6, "cluster_L": 12},
    "q-scan": {"L": 8, "perimeter_budget": 10, "ground_state": True},
    "bound-chain": {"jeps": [2.0, 3.0, 4.0], "ell": None},
}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class ExperimentFailure(RuntimeError):
    """A run stopped part way; records so far were flushed with a failure marker."""


def artifact_version() -> str:
    """``<version>-g<hash>``, the hash taken over the package sources."""
    h = hashlib.sha1()
    root = Path(__file__).resolve().parent
    for p in sorted(list(root.glob("*.py")) + list(root.glob("*.pyx"))):
        h.update(p.name.encode())
        h.update(p.read_bytes())
    return f"{__version__}-g{h.hexdigest()[:10]}"


# -- configuration -------------------------------------------------------------

@dataclasses.dataclass
class ExperimentConfig:
    kind: str
    seed: int
    n: int = 100
    threads: int = 1
    out: str | None = None
    model: dict = dataclasses.field(default_factory=dict)
    params: dict = dataclasses.field(default_factory=dict)
    constants: dict = dataclasses.field(default_factory=dict)

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config", "must be a mapping")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown config key")
        for key in ("kind", "seed"):
            if data.get(key) is None:
                raise ConfigError(key, "is mandatory")
        cfg = cls(**{k: data[k] for k in data if data[k] is not None or k == "out"})
        cfg.model = dict(cfg.model or {})
        cfg.params = {**DEFAULT_PARAMS.get(cfg.kind, {}), **dict(cfg.params or {})}
        cfg.constants = dict(cfg.constants or {})
        cfg.validate()
        return cfg

    def to_mapping(self) -> dict:
        return dataclasses.asdict(self)

    def model_params(self) -> ModelParams:
        m = self.model
        return ModelParams(float(m.get("J", 1.0)), float(m.get("eps", 1.0)), float(m.get("eta", 0.0)),
                           m.get("convention", "aligned"))

    @property
    def distribution(self) -> str:
        return self.model.get("distribution", "gaussian")

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError("kind", f"must be one of {', '.join(KINDS)}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed", "must be an integer in [0, 2^64)")
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ConfigError("n", "must be an integer >= 1")
        if not isinstance(self.threads, int) or self.threads < 1:
            raise ConfigError("threads", "must be an integer >= 1")
        unknown = set(self.model) - {"J", "eps", "eta", "convention", "distribution"}
        if unknown:
            raise ConfigError(f"model.{sorted(unknown)[0]}", "unknown model key")
        if self.distribution not in DISTRIBUTIONS:
            raise ConfigError("model.distribution", f"must be one of {', '.join(DISTRIBUTIONS)}")
        if self.model.get("convention", "aligned") not in CONVENTIONS:
            raise ConfigError("model.convention", f"must be one of {', '.join(CONVENTIONS)}")
        for key, lo in (("J", 0.0), ("eps", 0.0)):
            v = self.model.get(key, 1.0)
            if not isinstance(v, (int, float)) or not math.isfinite(v) or v < lo or (key == "J" and v == 0):
                raise ConfigError(f"model.{key}", "must be a finite number > 0" if key == "J" else "must be >= 0")
        unknown = set(self.constants) - set(CONSTANTS)
        if unknown:
            raise ConfigError(f"constants.{sorted(unknown)[0]}", "unknown constant")
        for k, v in self.constants.items():
            if not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"constants.{k}", "must be positive")
        unknown = set(self.params) - set(DEFAULT_PARAMS[self.kind])
        if unknown:
            raise ConfigError(f"params.{sorted(unknown)[0]}", f"not a parameter of {self.kind}")
        _VALIDATORS[self.kind](self)


def _positive_int(cfg, name, lo=1):
    v = cfg.params[name]
    if isinstance(v, bool) or not isinstance(v, int) or v < lo:
        raise ConfigError(f"params.{name}", f"must be an integer >= {lo}")
    return v


def _positive_real(cfg, name):
    v = cfg.params[name]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0 or not math.isfinite(v):
        raise ConfigError(f"params.{name}", "must be a positive number")
    return v


def _v_order(cfg):
    _positive_int(cfg, "L", 0)


def _v_zeta2(cfg):
    sched = cfg.params["schedule"]
    if not isinstance(sched, list) or not sched or not all(isinstance(x, int) and x >= 0 for x in sched):
        raise ConfigError("params.schedule", "must be a nonempty list of integers >= 0")
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise ConfigError("params.schedule", "must be strictly increasing")
    t = cfg.params["threshold"]
    if not isinstance(t, (int, float)) or not 0 < t < 1:
        raise ConfigError("params.threshold", "must lie in (0, 1)")


def _v_crossing(cfg):
    ell = _positive_int(cfg, "ell")
    rects = cfg.params["rectangles"]
    if not isinstance(rects, list) or not rects:
        raise ConfigError("params.rectangles", "must be a nonempty list of [x0, x1, y0, y1]")
    fam = []
    for i, r in enumerate(rects):
        try:
            R = LatticeRectangle(*[int(v) for v in r])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"params.rectangles[{i}]", str(e)) from None
        if max(abs(R.x0), abs(R.x1), abs(R.y0), abs(R.y1)) > 2 * ell:
            raise ConfigError(f"params.rectangles[{i}]", f"not inside Lambda({2 * ell})")
        fam.append(R)
    if cfg.params["validate"]:
        bad = family_violations(fam, ell)
        if bad:
            raise ConfigError("params.rectangles", "; ".join(bad))
    if cfg.model_params().eps <= 0:
        raise ConfigError("model.eps", "must be > 0 for disagreement experiments")


def _v_tortuosity(cfg):
    _positive_int(cfg, "ell", 4)
    _positive_real(cfg, "s")
    _positive_real(cfg, "r")
    _positive_int(cfg, "max_contacts", 2)


def _v_coarse(cfg):
    pm = _positive_int(cfg, "perimeter_max", 4)
    if pm > 16:
        raise ConfigError("params.perimeter_max", "exhaustive enumeration is limited to perimeter 16")
    lo = _positive_int(cfg, "k_min", 0)
    hi = _positive_int(cfg, "k_max", 0)
    if hi < lo:
        raise ConfigError("params.k_max", "must be >= k_min")
    _positive_int(cfg, "cluster_L", 1)


def _v_qscan(cfg):
    _positive_int(cfg, "L", 0)
    b = _positive_int(cfg, "perimeter_budget", 4)
    if b > 16:
        raise ConfigError("params.perimeter_budget", "enumeration is limited to perimeter 16")
    if cfg.model_params().eps <= 0:
        raise ConfigError("model.eps", "must be > 0 for the Q scan")


def _v_bounds(cfg):
    j = cfg.params["jeps"]
    j = j if isinstance(j, list) else [j]
    if not j or not all(isinstance(x, (int, float)) and x >= 1 for x in j):
        raise ConfigError("params.jeps", "must be a number or list of numbers >= 1")
    cfg.params["jeps"] = [float(x) for x in j]
    if cfg.params["ell"] is not None:
        _positive_int(cfg, "ell", 2)


_VALIDATORS = {"order-parameter": _v_order, "zeta2": _v_zeta2, "crossing-stats": _v_crossing,
               "tortuosity": _v_tortuosity, "coarse-grain-verify": _v_coarse, "q-scan": _v_qscan,
               "bound-chain": _v_bounds}


def load_config(path: str | Path) -> dict:
    """Read a YAML or JSON config file into a plain mapping."""
    with open(path) as f:
        data = yaml.safe_load(f)
    if not isinstance(data, dict):
        raise ConfigError("config", f"{path} does not hold a mapping")
    return data


def apply_override(data: dict, assignment: str) -> dict:
    """Apply ``NAME=VALUE`` (values parsed as YAML scalars or lists).

    NAME may be dotted (``params.ell``). A bare name is resolved as a
    top-level key, then a model key, then a constant, else a parameter.
    """
    if "=" not in assignment:
        raise ConfigError("override", f"expected NAME=VALUE, got {assignment!r}")
    name, raw = assignment.split("=", 1)
    value = yaml.safe_load(raw)
    parts = name.strip().split(".")
    if len(parts) == 1:
        top = {f.name for f in dataclasses.fields(ExperimentConfig)}
        if name in top:
            parts = [name]
        elif name in ("J", "eps", "eta", "convention", "distribution"):
            parts = ["model", name]
        elif name in CONSTANTS:
            parts = ["constants", name]
        else:
            parts = ["params", name]
    node = data
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(name, "cannot override inside a non-mapping")
    node[parts[-1]] = value
    return data


# -- pipelines: one record per replicate, summary from records ---------------------

def _rep_order(cfg, r):
    p = cfg.model_params()
    L = cfg.params["L"]
    h = sample_field(L, cfg.distribution, cfg.seed, r)
    plus, minus = ground_state_pair(h, p)
    return {"L": L, "gap": 0.5 * (plus.origin_spin() - minus.origin_spin())}


def _sum_order(cfg, recs):
    gaps = [rec["gap"] for rec in recs]
    m = math.fsum(gaps) / len(gaps)
    w = binomial_half_width(m, len(gaps))
    row = {"x": cfg.params["L"], "y": m, "err": w, "n": len(gaps)}
    return {"L": cfg.params["L"], "m_hat": m, "half_width": w, "ci": [max(0.0, m - w), min(1.0, m + w)],
            "n": len(gaps)}, [row]


def _replicates_zeta2(cfg):
    return [(L, r) for L in cfg.params["schedule"] for r in range(cfg.n)]


def _rep_zeta2(cfg, task):
    L, r = task
    p = cfg.model_params()
    h = sample_field(L, cfg.distribution, cfg.seed, r)
    plus, minus = ground_state_pair(h, p)
    return {"L": L, "gap": 0.5 * (plus.origin_spin() - minus.origin_spin())}


def _sum_zeta2(cfg, recs):
    rows = []
    for L in cfg.params["schedule"]:
        gaps = [rec["gap"] for rec in recs if rec["L"] == L]
        m = math.fsum(gaps) / len(gaps)
        w = binomial_half_width(m, len(gaps))
        rows.append({"x": L, "y": m, "err": w, "n": len(gaps), "ci_lo": max(0.0, m - w), "ci_hi": min(1.0, m + w)})
    t = cfg.params["threshold"]
    zeta2 = next((row["x"] for row in rows if row["y"] < t), None)
    slope = decay_slope([row["x"] for row in rows], [row["y"] for row in rows])
    proxy = -1.0 / slope if slope < 0 else None
    return {"threshold": t, "zeta2": zeta2, "decay_slope": None if math.isnan(slope) else slope,
            "zeta1_proxy": proxy, "rows": rows}, rows


def _family(cfg):
    return [LatticeRectangle(*[int(v) for v in r]) for r in cfg.params["rectangles"]]


def _rep_crossing(cfg, r):
    ell = cfg.params["ell"]
    D = sample_disagreement(2 * ell, cfg.model_params(), cfg.seed, r, cfg.distribution)
    return {"crossed": [bool(rectangle_crossed(D, R)) for R in _family(cfg)]}


def _sum_crossing(cfg, recs):
    ind = np.array([rec["crossed"] for rec in recs], dtype=bool)
    n = len(recs)
    freqs = ind.mean(axis=0)
    rows = [{"x": i, "y": float(f), "err": binomial_half_width(float(f), n), "n": n} for i, f in enumerate(freqs)]
    joint = float(ind.all(axis=1).mean())
    return {"frequencies": [float(f) for f in freqs], "half_widths": [row["err"] for row in rows],
            "joint_frequency": joint, "joint_half_width": binomial_half_width(joint, n),
            "rho_hat": joint ** (1.0 / ind.shape[1])}, rows


def _rep_tortuosity(cfg, r):
    ell = cfg.params["ell"]
    D = sample_disagreement(2 * ell, cfg.model_params(), cfg.seed, r, cfg.distribution)
    system = rescale_to_curve_system(D, ell, cfg.params["max_contacts"])
    T = T_statistic(system, cfg.params["s"], cfg.params["r"], system.delta)
    return {"n_curves": len(system.curves), "n_qualifying": T.n_qualifying,
            "T": None if T.vacuous else T.value}


def _sum_tortuosity(cfg, recs):
    vals = sorted(rec["T"] for rec in recs if rec["T"] is not None)
    n = len(recs)
    rows = [{"x": v, "y": (i + 1) / n, "err": 0.0} for i, v in enumerate(vals)]  # empirical CDF
    return {"n": n, "vacuous": n - len(vals), "T_median": float(np.median(vals)) if vals else None,
            "T_min": vals[0] if vals else None, "mean_curves": float(np.mean([rec["n_curves"] for rec in recs]))}, rows


def _rep_coarse(cfg, r):
    G = disagreement_cluster(cfg.params["cluster_L"], cfg.model_params(), cfg.seed, r, cfg.distribution)
    if G is None:
        return {"area": 0, "failed_levels": []}
    out = {"area": G.area}
    fails = [k for k in range(cfg.params["k_min"], cfg.params["k_max"] + 1) if not key_lemma1_check(G, k).passes]
    out["failed_levels"] = fails
    return out


def _enumeration_check(cfg) -> dict:
    total = bad = 0
    worst = {}
    for G in enumerate_simply_connected(cfg.params["perimeter_max"]):
        for k in range(cfg.params["k_min"], cfg.params["k_max"] + 1):
            rep = key_lemma1_check(G, k)
            total += 1
            bad += not rep.passes
            for name, v in rep.ratios.items():
                worst[name] = max(worst.get(name, 0.0), v)
    return {"checked": total, "failed": bad, "worst_ratios": worst}


def _sum_coarse(cfg, recs):
    bad = sum(1 for rec in recs if rec["failed_levels"])
    recs = [rec for rec in recs if rec["area"]]
    enum = _enumeration_check(cfg)
    rows = [{"x": "enumerated", "y": enum["failed"], "err": 0, "n": enum["checked"]},
            {"x": "clusters", "y": bad, "err": 0, "n": len(recs)}]
    return {"enumerated": enum, "clusters_checked": len(recs), "clusters_failed": bad,
            "all_hold": enum["failed"] == 0 and bad == 0}, rows


def _rep_qscan(cfg, r):
    h = sample_field(cfg.params["L"], cfg.distribution, cfg.seed, r)
    rep = scan_q_event(h, cfg.model_params(), cfg.params["perimeter_budget"], cfg.params["ground_state"])
    p = cfg.model_params()
    return {"violators": len(rep.violators), "sets_tested": rep.sets_tested, "truncated": rep.truncated,
            "reverified": all(v.reverify(h, p) for v in rep.violators)}


def _sum_qscan(cfg, recs):
    n = len(recs)
    f = sum(1 for rec in recs if rec["violators"]) / n
    row = {"x": cfg.model_params().eps, "y": f, "err": binomial_half_width(f, n), "n": n}
    return {"q_frequency": f, "half_width": row["err"], "all_reverified": all(rec["reverified"] for rec in recs),
            "exhaustive_within_budget": True}, [row]


def _replicates_bounds(cfg):
    return list(cfg.params["jeps"])


def _rep_bounds(cfg, jeps):
    try:
        return {"jeps": jeps, **evaluate_bound_chain(jeps, cfg.constants, cfg.params["ell"]).as_dict()}
    except BoundDomainError as e:
        return {"jeps": jeps, "domain_error": str(e)}


def _sum_bounds(cfg, recs):
    rows = [{"x": rec["jeps"], "y": rec.get("log_zeta1_bound"), "err": 0.0,
             "zeta2_bound": rec.get("zeta2_bound"), "alpha": rec.get("alpha")} for rec in recs]
    conventional = [k for k in CONSTANTS if k not in cfg.constants]
    return {"rows": rows, "conventional_constants": conventional,
            "note": "conventional constants are defaults, not derived values"}, rows


@dataclasses.dataclass(frozen=True)
class _Pipeline:
    replicate: Callable
    summarize: Callable
    tasks: Callable | None = None  # config -> list of task descriptors (default range(n))


PIPELINES = {
    "order-parameter": _Pipeline(_rep_order, _sum_order),
    "zeta2": _Pipeline(_rep_zeta2, _sum_zeta2, _replicates_zeta2),
    "crossing-stats": _Pipeline(_rep_crossing, _sum_crossing),
    "tortuosity": _Pipeline(_rep_tortuosity, _sum_tortuosity),
    "coarse-grain-verify": _Pipeline(_rep_coarse, _sum_coarse),
    "q-scan": _Pipeline(_rep_qscan, _sum_qscan),
    "bound-chain": _Pipeline(_rep_bounds, _sum_bounds, _replicates_bounds),
}


def _run_task(args):
    cfg_map, index, task = args
    cfg = ExperimentConfig.from_mapping(cfg_map)
    return index, PIPELINES[cfg.kind].replicate(cfg, task)


def _tasks(cfg):
    pipe = PIPELINES[cfg.kind]
    return pipe.tasks(cfg) if pipe.tasks else list(range(cfg.n))


def summarize(cfg: ExperimentConfig, records: list[dict]) -> tuple[dict, list[dict]]:
    """Summary and plot rows from records in any order."""
    recs = sorted((r for r in records if r.get("status", "ok") == "ok"), key=lambda r: r["index"])
    if not recs:
        raise ExperimentFailure("no completed records to summarize")
    summary, rows = PIPELINES[cfg.kind].summarize(cfg, recs)
    return {"kind": cfg.kind, "seed": cfg.seed, "version": artifact_version(), "records": len(recs),
            **summary}, rows


@dataclasses.dataclass(frozen=True)
class RunResult:
    config: ExperimentConfig
    records: list
    summary: dict
    rows: list
    out: Path | None


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, allow_nan=False, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _write_csv(path: Path, rows: list[dict]) -> None:
    cols = []
    for row in rows:
        cols.extend(k for k in row if k not in cols)
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: ("" if row.get(k) is None else row.get(k)) for k in cols})
    path.write_text(buf.getvalue())


def run_experiment(config: ExperimentConfig | dict) -> RunResult:
    """Run a configured experiment, persisting records and summary when ``out`` is set."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_mapping(config)
    cfg.validate()
    version = artifact_version()
    out = Path(cfg.out) if cfg.out else None
    fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(_dumps(cfg.to_mapping()) + "\n")
        fh = open(out / "records.jsonl", "w")
    tasks = _tasks(cfg)
    records = []
    cfg_map = cfg.to_mapping()
    try:
        for start in range(0, len(tasks), CHUNK * cfg.threads):
            batch = [(cfg_map, i, tasks[i]) for i in range(start, min(len(tasks), start + CHUNK * cfg.threads))]
            for index, rec in map_replicates(_run_task, batch, cfg.threads):
                full = {"kind": cfg.kind, "seed": cfg.seed, "replicate": _replicate_of(tasks[index]),
                        "index": index, "version": version, "status": "ok", **rec}
                records.append(full)
                if fh:
                    fh.write(_dumps(full) + "\n")
            if fh:
                fh.flush()
    except Exception as e:
        if fh:
            fh.write(_dumps({"kind": cfg.kind, "seed": cfg.seed, "version": version, "status": "failed",
                             "error": f"{type(e).__name__}: {e}", "completed": len(records)}) + "\n")
            fh.close()
            (out / "summary.json").write_text(_dumps({"status": "failed", "completed": len(records)}) + "\n")
        raise ExperimentFailure(f"{cfg.kind} failed after {len(records)} records: {e}") from e
    if fh:
        fh.close()
    summary, rows = summarize(cfg, records)
    summary["status"] = "ok"
    if out is not None:
        (out / "summary.json").write_text(_dumps(summary) + "\n")
        _write_csv(out / "summary.csv", rows)
    return RunResult(cfg, records, summary, rows, out)


def _replicate_of(task) -> Any:
    # zeta2 tasks are (L, r); bound-chain tasks are J/eps values
    if isinstance(task, tuple):
        return task[1]
    return task


def load_records(path: str | Path) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]


def replay_record(config: ExperimentConfig | dict, record: dict) -> dict:
    """Recompute the single replicate a record came from."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_mapping(config)
    if record["seed"] != cfg.seed:
        raise ConfigError("seed", "record was produced under a different master seed")
    task = _tasks(cfg)[record["index"]]
    return PIPELINES[cfg.kind].replicate(cfg, task)


# -- invariant suite ---------------------------------------------------------------

def invariant_suite(seed: int = 0) -> list[tuple[str, bool, str]]:
    """Fast end-to-end invariant checks; returns (name, ok, detail) rows."""
    from .coarsegrain import _corridor_shapes, coarse_grain
    from .lattice import VertexSet
    results = []

    def check(name, fn):
        try:
            ok, detail = fn()
        except Exception as e:  # report, do not abort the suite
            ok, detail = False, f"{type(e).__name__}: {e}"
        results.append((name, bool(ok), detail))

    def ground_exact():
        bad = 0
        for r in range(20):
            for p in (ModelParams(1, 0.5, 0.3), ModelParams(1, 2.0, 0.0, "opposed")):
                h = sample_field(1, "gaussian", seed, r)
                e = energy(ground_state(h, p, "plus"), h, p)
                emin, _ = brute_force_ground_energy(h, p, "plus")
                bad += abs(e - emin) > 1e-9 * max(1.0, abs(emin))
        return bad == 0, f"{bad} mismatches in 40"

    def coupling():
        bad = 0
        for r in range(20):
            plus, minus = ground_state_pair(sample_field(8, "gaussian", seed, r), ModelParams(1, 1))
            bad += bool(np.any(minus.spins > plus.spins))
        return bad == 0, f"{bad} violations in 20"

    def key_lemma():
        fails = sum(1 for G in enumerate_simply_connected(10) for k in (2, 3, 4)
                    if not key_lemma1_check(G, k).passes)
        return fails == 0, f"{fails} failures"

    def scale():
        sp = choose_scale_params(1e-2)
        return sp.invariants_hold(), str(sp.invariant_report())

    def bounds():
        a = evaluate_bound_chain(2.0).as_dict()
        b = evaluate_bound_chain(2.0).as_dict()
        try:
            evaluate_bound_chain(1.0)
            raised = False
        except BoundDomainError:
            raised = True
        return a == b and raised, "pure and domain-checked" if a == b and raised else "mismatch"

    def corridor():
        spec = corridor_constants(6, ModelParams(1, 1.0))
        h = sample_field(3, "gaussian", seed, 0)
        fast = corridor_violations(h, spec, 1)
        slow = 0
        for shape in _corridor_shapes(6):
            x0, x1, y0, y1 = shape.bounds()
            for dx in range(-3 - x0, 4 - x1):
                for dy in range(-3 - y0, 4 - y1):
                    G = shape.translate(dx, dy)
                    A, B = coarse_grain(G, 2), coarse_grain(G, 1)
                    sums = [sum(h.at(x, y) for x, y in q.points() if abs(x) <= 3 and abs(y) <= 3)
                            for q in (A - B, B - A)]
                    slow += any(abs(s) > spec.c for s in sums)
        return fast == slow, f"fast {fast} vs direct {slow}"

    def qscan():
        vals = np.zeros((9, 9))
        vals[4:6, 4:6] = 1.0
        p = ModelParams(1, 1)
        h = planted_field(4, vals)
        rep = scan_q_event(h, p, 10)
        target = VertexSet.from_points([(0, 0), (0, 1), (1, 0), (1, 1)])
        ok = any(v.gamma == target for v in rep.violators) and all(v.reverify(h, p) for v in rep.violators)
        zero = scan_q_event(planted_field(4, np.zeros((9, 9))), p, 10)
        return ok and not zero.violators, f"{len(rep.violators)} violators on the planted field"

    for name, fn in (("ground state exactness", ground_exact), ("monotone coupling", coupling),
                     ("coarse graining key inequalities", key_lemma), ("scale parameter invariants", scale),
                     ("bound chain", bounds), ("corridor sums", corridor), ("Q scan", qscan)):
        check(name, fn)
    return results


# -- command line ----------------------------------------------------------------------

SUBCOMMANDS = {"orderparam": "order-parameter", "zeta2": "zeta2", "crossings": "crossing-stats",
               "tortuosity": "tortuosity", "coarsegrain": "coarse-grain-verify", "qscan": "q-scan",
               "bounds": "bound-chain"}


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rfimlab", description="Zero-temperature random-field Ising laboratory")
    sub = ap.add_subparsers(dest="command", required=True)
    names = ["field", "groundstate", *SUBCOMMANDS, "verify"]
    for name in names:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="YAML or JSON config file")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--threads", type=int, help="worker processes")
        sp.add_argument("--override", action="append", default=[], metavar="NAME=VALUE",
                        help="set a config entry; repeatable")
        if name in ("field", "groundstate"):
            sp.add_argument("--L", type=int, default=4)
            sp.add_argument("--replicate", type=int, default=0)
    return ap


def _config_from_args(args, kind: str) -> ExperimentConfig:
    data = load_config(args.config) if args.config else {}
    data.setdefault("kind", kind)
    if data["kind"] != kind:
        raise ConfigError("kind", f"config is for {data['kind']!r}, command runs {kind!r}")
    for key in ("seed", "out", "threads"):
        v = getattr(args, key)
        if v is not None:
            data[key] = v
    for o in args.override:
        apply_override(data, o)
    return ExperimentConfig.from_mapping(data)


def _single(args, kind: str) -> dict:
    data = load_config(args.config) if args.config else {}
    data.setdefault("kind", kind)
    if args.seed is not None:
        data["seed"] = args.seed
    for o in args.override:
        apply_override(data, o)
    data.setdefault("params", {})
    data.setdefault("seed", None)
    if data["seed"] is None:
        raise ConfigError("seed", "is mandatory")
    model = data.get("model", {})
    cfg = ExperimentConfig.from_mapping({"kind": "order-parameter", "seed": data["seed"], "model": model,
                                         "params": {"L": args.L}})
    h = sample_field(args.L, cfg.distribution, cfg.seed, args.replicate)
    rec = {"seed": cfg.seed, "replicate": args.replicate, "version": artifact_version(), "L": args.L,
           "distribution": cfg.distribution}
    if kind == "field":
        rec["values"] = h.values.tolist()
    else:
        p = cfg.model_params()
        plus, minus = ground_state_pair(h, p)
        rec.update({"model": dataclasses.asdict(p), "plus": plus.spins.tolist(), "minus": minus.spins.tolist(),
                    "energy_plus": energy(plus, h, p), "energy_minus": energy(minus, h, p),
                    "disagreements": int((plus.spins != minus.spins).sum())})
    return rec


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "verify":
            rows = invariant_suite(args.seed or 0)
            for name, ok, detail in rows:
                print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                (Path(args.out) / "verify.json").write_text(
                    _dumps([{"check": n, "ok": ok, "detail": d} for n, ok, d in rows]) + "\n")
            return EXIT_OK if all(ok for _, ok, _ in rows) else EXIT_INVARIANT
        if args.command in ("field", "groundstate"):
            rec = _single(args, args.command)
            text = _dumps(rec)
            if args.out:
                Path(args.out).mkdir(parents=True, exist_ok=True)
                (Path(args.out) / f"{args.command}.json").write_text(text + "\n")
            else:
                print(text)
            return EXIT_OK
        cfg = _config_from_args(args, SUBCOMMANDS[args.command])
        res = run_experiment(cfg)
        print(_dumps(res.summary))
        return EXIT_OK
    except (ConfigError, ModelError, GeometryError, LatticeError, BoundDomainError, OSError,
            yaml.YAMLError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ExperimentFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
