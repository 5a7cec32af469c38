"""Batch experiments: parameter grids, seed ensembles, run records and aggregation.

A plan is the cross product ``grid x presets x seeds``. Each point is run
independently and deterministically from its settings; failures are caught
and stored in the record. Records come back (and are written to sinks) in
plan order whatever the number of worker processes.

Plan files are JSON objects with the fields of :class:`ExperimentPlan`::

    {"model": "villain", "grid": {"beta": [0.3, 0.5]},
     "presets": ["simple_bp", "factor_graph_plaquettes"],
     "seeds": [0], "engine": {"damping": 0.3, "epsilon": 1e-10},
     "oracle": true, "fixed": {"extents": [4, 4]}}

Seeds are either listed explicitly or derived from ``master_seed`` and
``n_seeds``: seed ``k`` is the first 32-bit word of the state of the
``k``-th child of ``numpy.random.SeedSequence(master_seed)``, so reruns of
any subset of an ensemble reproduce the same seeds.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .engine import (
    DEFAULT_DAMPING,
    DEFAULT_EPSILON,
    DEFAULT_MAX_ITERS,
    GbpState,
    init_messages,
    is_nonphysical,
    kikuchi_free_energy,
    run,
    write_trace_csv,
)
from .errors import EmptyGroup, GbpError
from .regions import build_regions, preset_regions

__all__ = [
    "ExperimentPlan",
    "RunRecord",
    "MODELS",
    "derive_seeds",
    "build_model",
    "expand_plan",
    "run_settings",
    "run_plan",
    "aggregate",
    "CsvSink",
    "JsonlSink",
    "records_to_csv",
    "load_plan",
]

MODELS = ("villain", "ice", "aklt", "random")
STATISTICS = ("mean", "median", "fraction_converged", "max_abs_error")


@dataclass
class ExperimentPlan:
    """What to run.

    Attributes
    ----------
    model : {"villain", "ice", "aklt", "random"}
    grid : dict
        Parameter name -> list of values; the cross product is run.
    presets : list of str
        Region presets.
    seeds : list of int, optional
        Explicit seeds; otherwise derived from ``master_seed``/``n_seeds``.
    engine : dict
        ``damping``, ``epsilon``, ``max_iters``, ``init`` (``uniform`` or
        ``noisy``), ``init_noise``, ``schedule``.
    oracle : bool
        Attach reference values and errors to every record.
    fixed : dict
        Model parameters shared by all runs (for example ``extents``).
    """

    model: str
    grid: dict
    presets: list
    seeds: list | None = None
    master_seed: int = 0
    n_seeds: int = 1
    engine: dict = field(default_factory=dict)
    oracle: bool = True
    fixed: dict = field(default_factory=dict)

    def validate(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if not self.presets:
            raise ValueError("plan has no presets")
        for k, v in self.grid.items():
            if not list(v):
                raise ValueError(f"grid axis {k!r} is empty")
        if self.seeds is not None and not self.seeds:
            raise ValueError("plan has an empty seed list")
        if self.seeds is None and self.n_seeds < 1:
            raise ValueError("n_seeds must be positive")

    def seed_list(self) -> list:
        if self.seeds is not None:
            return [int(s) for s in self.seeds]
        return derive_seeds(self.master_seed, self.n_seeds)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentPlan":
        return cls(**d)


def load_plan(path) -> ExperimentPlan:
    with open(path) as fh:
        return ExperimentPlan.from_dict(json.load(fh))


def derive_seeds(master_seed: int, n: int) -> list:
    children = np.random.SeedSequence(int(master_seed)).spawn(int(n))
    return [int(c.generate_state(1)[0]) for c in children]


@dataclass
class RunRecord:
    """Outcome of one run: settings, convergence, observables, oracles, errors."""

    index: int
    settings: dict
    converged: bool = False
    iterations: int = 0
    metric: float = math.inf
    free_energy: complex = complex("nan")
    nonphysical: bool = False
    observables: dict = field(default_factory=dict)
    oracle: dict = field(default_factory=dict)
    errors: dict = field(default_factory=dict)
    failure: str = ""
    wall_time: float = 0.0
    version: str = __version__

    def flat(self) -> dict:
        """One-level mapping used by the CSV and JSON-lines sinks."""
        row = {"index": self.index}
        for k in sorted(self.settings):
            v = self.settings[k]
            row[f"set.{k}"] = json.dumps(v) if isinstance(v, (list, tuple, dict)) else v
        row.update({"converged": self.converged, "iterations": self.iterations,
                    "metric": self.metric, "F_real": self.free_energy.real,
                    "F_imag": self.free_energy.imag, "nonphysical": self.nonphysical})
        for prefix, d in (("obs", self.observables), ("oracle", self.oracle),
                          ("err", self.errors)):
            for k in sorted(d):
                row[f"{prefix}.{k}"] = d[k]
        row.update({"failure": self.failure, "version": self.version,
                    "wall_time": self.wall_time})
        return row


# -- models and observables -----------------------------------------------------

def build_model(model: str, params: dict):
    """Model instance for ``model`` with keyword parameters ``params``."""
    p = dict(params)
    if model == "villain":
        from .models.villain import villain_network
        return villain_network(float(p["beta"]), tuple(p.get("extents", (4, 4))),
                               p.get("representation", "factor_graph"))
    if model == "ice":
        from .models.ice import ice_network
        ext = p.get("extents")
        return ice_network(p.get("lattice", "square"), tuple(ext) if ext else None,
                           sparse=bool(p.get("sparse", False)), voxels=bool(p.get("voxels", False)))
    if model == "aklt":
        from .models.aklt import aklt_norm_network
        return aklt_norm_network(float(p["a"]), tuple(p.get("extents", (3, 3))))
    if model == "random":
        from .models.random_norm import random_norm_network
        return random_norm_network(int(p.get("n", 6)), int(p.get("chi", 3)),
                                   float(p.get("alpha", 0.0)), int(p.get("seed", 0)))
    raise ValueError(f"unknown model {model!r}")


def _observe(model: str, inst, state, params: dict, preset: str) -> dict:
    from .observables import ObservableSpec, energy_entropy_densities, expectation
    f = kikuchi_free_energy(state).real / inst.n_sites
    if model == "villain":
        f, e, s = energy_entropy_densities(inst, state, float(params["beta"]))
        return {"f": f, "e": e, "s": s}
    if model == "ice":
        return {"f": f, "exp_s0": math.exp(-f)}
    if model == "aklt":
        from .models.aklt import spin_matrices
        S = spin_matrices()
        i, j, _ = inst.lattice.bonds[0]
        out = {"f": f}
        for name, op in (("xx", "Sx"), ("yy", "Sy"), ("zz", "Sz")):
            out[name] = expectation(ObservableSpec({i: S[op], j: S[op]}), state, inst.kets).real
        for name, op in (("x", "Sx"), ("y", "Sy"), ("z", "Sz")):
            out[f"one_point_{name}"] = expectation(ObservableSpec({i: S[op]}), state,
                                                   inst.kets).real
        out["xx_minus_yy"] = out["xx"] - out["yy"]
        return out
    return {"f": f}


def _oracle(model: str, inst, params: dict, preset: str) -> dict:
    if model == "villain":
        from .oracles.villain import villain_exact_fes
        f, e, s = villain_exact_fes(float(params["beta"]))
        return {"f": f, "e": e, "s": s}
    if model == "ice":
        from .oracles.ice import LIEB_SQUARE, PAULING, ice_gbp_analytic
        lattice = inst.params["lattice"]
        out = {}
        if preset == "simple_bp":
            out["exp_s0"] = PAULING
        elif preset == "r1_plaquettes":
            out["exp_s0"] = ice_gbp_analytic(lattice).derived["exp_s0"]
        if lattice == "square":
            out["exact_exp_s0"] = LIEB_SQUARE
        return out
    if model == "aklt":
        if preset != "simple_bp":
            return {}
        from .oracles.aklt import aklt_bp_analytic
        d = aklt_bp_analytic(float(params["a"])).derived
        return {k: d[k] for k in ("xx", "yy", "zz")}
    if model == "random":
        from .oracles.exact import exact_log_z
        return {"f": -exact_log_z(inst.network).real / inst.n_sites}
    return {}


def run_settings(settings: dict, index: int = 0, *, trace=None, dump_regions=None) -> RunRecord:
    """Execute one run; never raises for model or engine failures.

    ``trace`` and ``dump_regions`` are optional file paths for the per-sweep
    convergence trace (CSV) and the region graph (JSON).
    """
    rec = RunRecord(index, dict(settings))
    t0 = time.perf_counter()
    try:
        model = settings["model"]
        params = dict(settings.get("params", {}))
        if model == "random":
            params.setdefault("seed", settings.get("seed", 0))
        inst = build_model(model, params)
        eng = settings.get("engine", {})
        preset = settings["preset"]
        g = build_regions(preset_regions(inst.network, preset, inst.geometry), inst.network)
        if dump_regions is not None:
            g.dump_json(dump_regions)
        init = eng.get("init", "noisy" if eng.get("init_noise", 0.1) else "uniform")
        msgs = init_messages(g, init, c=float(eng.get("init_noise", 0.1)),
                             seed=int(settings.get("seed", 0)), pair_dims=inst.pair_dims)
        state = GbpState(g, msgs, damping=float(eng.get("damping", DEFAULT_DAMPING)),
                         epsilon=float(eng.get("epsilon", DEFAULT_EPSILON)),
                         max_iters=int(eng.get("max_iters", DEFAULT_MAX_ITERS)),
                         schedule=eng.get("schedule", "sequential"),
                         pair_dims=inst.pair_dims if trace is not None else None)
        energies: list = []
        callback = None
        if trace is not None:
            def callback(st, _metric):
                try:
                    energies.append(kikuchi_free_energy(st))
                except GbpError:
                    energies.append(complex("nan"))
        res = run(state, callback=callback)
        if trace is not None:
            write_trace_csv(trace, state, energies)
        rec.converged = bool(res.converged)
        rec.iterations = int(res.iterations)
        rec.metric = float(res.metric if res.converged else res.best_metric)
        try:
            rec.free_energy = complex(kikuchi_free_energy(state))
            rec.nonphysical = is_nonphysical(rec.free_energy)
            if res.converged:
                rec.observables = _observe(model, inst, state, params, preset)
        except (GbpError, ArithmeticError, ValueError) as exc:
            rec.failure = f"{type(exc).__name__}: {exc}"
        if settings.get("oracle", True):
            rec.oracle = _oracle(model, inst, params, preset)
            rec.errors = {k: abs(rec.observables[k] - v) for k, v in rec.oracle.items()
                          if k in rec.observables}
    except Exception as exc:  # recorded, never aborts the batch
        rec.failure = f"{type(exc).__name__}: {exc}"
    rec.wall_time = time.perf_counter() - t0
    return rec


def expand_plan(plan: ExperimentPlan) -> list:
    """Settings dicts in plan order: grid points, then presets, then seeds."""
    plan.validate()
    axes = list(plan.grid)
    engine = {"damping": DEFAULT_DAMPING, "epsilon": DEFAULT_EPSILON,
              "max_iters": DEFAULT_MAX_ITERS, "schedule": "sequential",
              # ice: noisy messages can flow to a frozen zero-entropy fixed point
              "init_noise": 0.0 if plan.model == "ice" else 0.1}
    engine.update(plan.engine)
    out = []
    for values in itertools.product(*(plan.grid[a] for a in axes)):
        params = dict(plan.fixed)
        params.update(dict(zip(axes, values)))
        for preset in plan.presets:
            for seed in plan.seed_list():
                out.append({"model": plan.model, "params": params, "preset": preset,
                            "seed": seed, "engine": dict(engine), "oracle": plan.oracle})
    return out


def _run_indexed(args):
    index, settings = args
    return run_settings(settings, index)


def run_plan(plan: ExperimentPlan, sinks: Sequence = (), workers: int = 1) -> list:
    """Run every point of ``plan``; records are returned and streamed in plan order."""
    jobs = list(enumerate(expand_plan(plan)))
    records = []
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = pool.map(_run_indexed, jobs)
            for rec in results:
                records.append(rec)
                for s in sinks:
                    s.write(rec)
    else:
        for job in jobs:
            rec = _run_indexed(job)
            records.append(rec)
            for s in sinks:
                s.write(rec)
    for s in sinks:
        s.close()
    return records


# -- aggregation -------------------------------------------------------------------

def _group_key(rec: RunRecord) -> tuple:
    params = rec.settings.get("params", {})
    return tuple(sorted((k, json.dumps(v)) for k, v in params.items()
                        if k != "seed")) + (("preset", rec.settings.get("preset")),)


def aggregate(records: Iterable[RunRecord], statistic: str, quantity: str | None = None) -> list:
    """Grouped statistic keyed by grid point and preset.

    ``mean`` and ``median`` summarize the observable ``quantity`` over the
    records that have it; ``max_abs_error`` takes the largest error of
    ``quantity``; ``fraction_converged`` needs no quantity. Rows are dicts
    with the group's parameters, ``preset``, ``n`` and ``value``.
    """
    if statistic not in STATISTICS:
        raise ValueError(f"unknown statistic {statistic!r}")
    if statistic != "fraction_converged" and quantity is None:
        raise ValueError(f"statistic {statistic!r} needs a quantity")
    groups: dict = {}
    for rec in records:
        groups.setdefault(_group_key(rec), []).append(rec)
    if not groups:
        raise EmptyGroup("no records to aggregate")
    rows = []
    for key, recs in groups.items():
        if statistic == "fraction_converged":
            vals = [1.0 if r.converged else 0.0 for r in recs]
            value = sum(vals) / len(vals)
        else:
            src = "errors" if statistic == "max_abs_error" else "observables"
            vals = [getattr(r, src)[quantity] for r in recs if quantity in getattr(r, src)]
            if not vals:
                raise EmptyGroup(f"no values of {quantity!r} in group {dict(key)!r}")
            if statistic == "mean":
                value = statistics.fmean(vals)
            elif statistic == "median":
                value = statistics.median(vals)
            else:
                value = max(abs(v) for v in vals)
        row = {k: json.loads(v) for k, v in key if k != "preset"}
        row.update({"preset": dict(key)["preset"], "n": len(vals), "value": value})
        rows.append(row)
    return rows


# -- sinks ---------------------------------------------------------------------------

def _cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def records_to_csv(records: Sequence[RunRecord], fh=None) -> str:
    """CSV text with one record per row; the header is the union of flat keys.

    The header starts with ``index`` and the settings columns, then the
    run outcome (``converged``, ``iterations``, ``metric``, ``F_real``,
    ``F_imag``, ``nonphysical``), then ``obs.*``, ``oracle.*`` and
    ``err.*`` columns, and ends with ``failure``, ``version`` and
    ``wall_time``. Floats are written with ``repr`` so reruns are
    byte-identical apart from ``wall_time``.
    """
    rows = [r.flat() for r in records]
    header: list = []
    for row in rows:
        for k in row:
            if k not in header:
                header.append(k)
    tail = ["failure", "version", "wall_time"]
    header = [k for k in header if k not in tail] + tail
    out = fh if fh is not None else io.StringIO()
    w = csv.DictWriter(out, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: _cell(v) for k, v in row.items()})
    return out.getvalue() if fh is None else ""


class CsvSink:
    """Collects records and writes the CSV file on :meth:`close`."""

    def __init__(self, path):
        self.path = path
        self.records: list = []

    def write(self, rec: RunRecord):
        self.records.append(rec)

    def close(self):
        with open(self.path, "w", newline="") as fh:
            records_to_csv(self.records, fh)


def _json_default(v):
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, np.generic):
        return v.item()
    raise TypeError(f"cannot serialize {type(v).__name__}")


class JsonlSink:
    """Appends one JSON object per record as soon as it is produced."""

    def __init__(self, path):
        self.fh = open(path, "w")

    def write(self, rec: RunRecord):
        self.fh.write(json.dumps(rec.flat(), default=_json_default) + "\n")
        self.fh.flush()

    def close(self):
        self.fh.close()
