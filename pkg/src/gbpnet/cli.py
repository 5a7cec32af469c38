"""Command-line entry point: ``gbpnet <subcommand> [flags]``.

Model subcommands (``villain``, ``ice``, ``aklt``, ``random``) accept several
values per parameter and several seeds; the cross product is run through
:mod:`gbpnet.runner`. ``contract`` runs the engine on a JSON network file,
``regions`` describes a region graph and ``oracle`` prints reference values.

Numeric results go to ``--out`` (or, without it, to
``$GBPNET_OUT_DIR/<subcommand>.<csv|jsonl>`` when that variable is set); a
readable summary goes to standard output.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from collections import Counter

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
from .regions import PRESETS, build_regions, preset_regions
from .runner import CsvSink, ExperimentPlan, JsonlSink, RunRecord, build_model, expand_plan, \
    run_settings

__all__ = ["main", "build_parser"]

OUT_DIR_ENV = "GBPNET_OUT_DIR"
PRESET_CHOICES = sorted(set(PRESETS) | {p.replace("_", "-") for p in PRESETS})


def _engine_flags(p: argparse.ArgumentParser, default_preset: str, default_noise: float = 0.1):
    g = p.add_argument_group("engine")
    g.add_argument("--preset", default=default_preset, choices=PRESET_CHOICES,
                   help="region preset (default: %(default)s)")
    g.add_argument("--damping", type=float, default=DEFAULT_DAMPING,
                   help="weight of the new message when mixing (default: %(default)s)")
    g.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON,
                   help="convergence threshold on the sweep metric (default: %(default)s)")
    g.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERS,
                   help="maximum number of sweeps (default: %(default)s)")
    g.add_argument("--init-noise", type=float, default=default_noise,
                   help="initial messages are 1 + c*U(0,1); 0 gives all-ones (default: %(default)s)")
    g.add_argument("--seed", type=int, nargs="+", default=[0],
                   help="seeds for the initial noise and random models (default: %(default)s)")
    g.add_argument("--schedule", choices=("sequential", "jacobi"), default="sequential",
                   help="update order of child groups (default: %(default)s)")


def _output_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("output")
    g.add_argument("--out", default=None,
                   help=f"file for numeric results (default: ${OUT_DIR_ENV}/<subcommand>.<ext> "
                        "when set, otherwise none)")
    g.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="csv, or json for one JSON object per line (default: %(default)s)")
    g.add_argument("--dump-regions", default=None, metavar="PATH",
                   help="write the region graph of the first run as JSON (default: none)")
    g.add_argument("--trace", default=None, metavar="PATH",
                   help="write the per-sweep convergence trace of the first run as CSV "
                        "(default: none)")
    g.add_argument("--oracle", action="store_true",
                   help="attach reference values and errors to every record (default: off)")
    g.add_argument("--workers", type=int, default=1,
                   help="worker processes for multi-point runs (default: %(default)s)")
    g.add_argument("--save-network", default=None, metavar="PATH",
                   help="write the generated network (first grid point) as JSON (default: none)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gbpnet",
                                     description="Generalized belief propagation for tensor networks")
    parser.add_argument("--version", action="version", version=f"gbpnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("villain", help="fully frustrated Ising model on a torus")
    p.add_argument("--beta", type=float, nargs="+", required=True)
    p.add_argument("--extents", type=int, nargs=2, default=[4, 4],
                   help="2x2 unit cells per direction (default: %(default)s)")
    p.add_argument("--representation", choices=("factor_graph", "vertex_tensor"),
                   default="factor_graph", help="(default: %(default)s)")
    _engine_flags(p, "factor_graph_plaquettes")
    _output_flags(p)

    p = sub.add_parser("ice", help="ice-rule models and their residual entropy")
    p.add_argument("--lattice", choices=("square", "diamond", "hexagonal", "diamond_cubic",
                                         "hexagonal_ice"), default="square")
    p.add_argument("--extents", type=int, nargs="+", default=None,
                   help="unit cells per direction (default: lattice-dependent)")
    p.add_argument("--sparse", action="store_true", help="coordinate storage for vertex tensors")
    # noisy messages can flow to a frozen zero-entropy fixed point here
    _engine_flags(p, "r1_plaquettes", default_noise=0.0)
    _output_flags(p)

    p = sub.add_parser("aklt", help="deformed AKLT norm network on the honeycomb lattice")
    p.add_argument("--a", type=float, nargs="+", required=True, help="deformation parameter")
    p.add_argument("--extents", type=int, nargs=2, default=[3, 3],
                   help="two-site cells per direction (default: %(default)s)")
    _engine_flags(p, "simple_bp")
    _output_flags(p)

    p = sub.add_parser("random", help="norm network of a random PEPS on an open square lattice")
    p.add_argument("--n", type=int, default=6, help="linear size (default: %(default)s)")
    p.add_argument("--chi", type=int, default=3, help="bond dimension (default: %(default)s)")
    p.add_argument("--alpha", type=float, nargs="+", default=[0.0],
                   help="entries uniform on (-alpha, 1 - alpha) (default: %(default)s)")
    _engine_flags(p, "r1_plaquettes")
    _output_flags(p)

    p = sub.add_parser("contract", help="run the engine on a network file")
    p.add_argument("--network", required=True, help="JSON network file (gbpnet-network/1)")
    _engine_flags(p, "simple_bp")
    _output_flags(p)

    p = sub.add_parser("regions", help="describe the region graph of a network file")
    p.add_argument("--network", required=True, help="JSON network file (gbpnet-network/1)")
    p.add_argument("--preset", default="simple_bp", choices=PRESET_CHOICES,
                   help="region preset (default: %(default)s)")
    p.add_argument("--dump-regions", default=None, metavar="PATH",
                   help="write the region graph as JSON (default: none)")

    p = sub.add_parser("oracle", help="print reference values")
    p.add_argument("model", choices=("villain", "ice", "aklt"))
    p.add_argument("--beta", type=float, default=1.0, help="(villain, default: %(default)s)")
    p.add_argument("--lattice", default="square",
                   choices=("square", "diamond", "hexagonal"), help="(ice, default: %(default)s)")
    p.add_argument("--a", type=float, default=math.sqrt(3), help="(aklt, default: sqrt(3))")
    return parser


def _out_path(args) -> str | None:
    if args.out:
        return args.out
    base = os.environ.get(OUT_DIR_ENV)
    if base:
        ext = "csv" if args.format == "csv" else "jsonl"
        return os.path.join(base, f"{args.command}.{ext}")
    return None


def _sinks(args) -> list:
    path = _out_path(args)
    if path is None:
        return []
    return [CsvSink(path) if args.format == "csv" else JsonlSink(path)]


def _engine_settings(args) -> dict:
    return {"damping": args.damping, "epsilon": args.epsilon, "max_iters": args.max_iters,
            "init": "noisy" if args.init_noise else "uniform", "init_noise": args.init_noise,
            "schedule": args.schedule}


def _plan(args) -> ExperimentPlan:
    preset = args.preset.replace("-", "_")
    if args.command == "villain":
        return ExperimentPlan("villain", {"beta": args.beta}, [preset], seeds=args.seed,
                              engine=_engine_settings(args), oracle=args.oracle,
                              fixed={"extents": args.extents,
                                     "representation": args.representation})
    if args.command == "ice":
        lattice = {"diamond": "diamond_cubic", "hexagonal": "hexagonal_ice"}.get(args.lattice,
                                                                               args.lattice)
        fixed = {"lattice": lattice, "sparse": args.sparse, "voxels": "voxel" in preset}
        if args.extents:
            fixed["extents"] = args.extents
        return ExperimentPlan("ice", {"lattice": [lattice]}, [preset], seeds=args.seed,
                              engine=_engine_settings(args), oracle=args.oracle, fixed=fixed)
    if args.command == "aklt":
        return ExperimentPlan("aklt", {"a": args.a}, [preset], seeds=args.seed,
                              engine=_engine_settings(args), oracle=args.oracle,
                              fixed={"extents": args.extents})
    return ExperimentPlan("random", {"alpha": args.alpha}, [preset], seeds=args.seed,
                          engine=_engine_settings(args), oracle=args.oracle,
                          fixed={"n": args.n, "chi": args.chi})


def _summary(rec: RunRecord) -> str:
    params = rec.settings.get("params", {})
    shown = " ".join(f"{k}={v}" for k, v in params.items()
                     if k not in ("extents", "sparse", "voxels", "representation"))
    status = (f"converged in {rec.iterations} sweeps" if rec.converged
              else f"NotConverged after {rec.iterations} sweeps (best metric {rec.metric:.3g})")
    parts = [f"{rec.settings['model']} {shown} preset={rec.settings['preset']} "
             f"seed={rec.settings['seed']}: {status}"]
    if rec.nonphysical:
        parts.append("  nonphysical free energy")
    for k, v in rec.observables.items():
        line = f"  {k} = {v:.10g}"
        if k in rec.oracle:
            line += f"  oracle {rec.oracle[k]:.10g}  diff {rec.errors[k]:.3g}"
        parts.append(line)
    for k, v in rec.oracle.items():
        if k not in rec.observables:
            parts.append(f"  oracle {k} = {v:.10g}")
    if rec.failure:
        parts.append(f"  failure: {rec.failure}")
    return "\n".join(parts)


def _run_models(args) -> int:
    plan = _plan(args)
    settings = expand_plan(plan)
    if args.save_network:
        from .io import save_network
        inst = build_model(plan.model, dict(settings[0]["params"],
                                            **({"seed": settings[0]["seed"]}
                                               if plan.model == "random" else {})))
        save_network(args.save_network, inst.network, inst.geometry,
                     {"n_sites": inst.n_sites, "model": plan.model})
    sinks = _sinks(args)
    records = []
    if args.workers > 1 and len(settings) > 1 and not (args.trace or args.dump_regions):
        from .runner import run_plan
        records = run_plan(plan, sinks, workers=args.workers)
    else:
        for i, s in enumerate(settings):
            first = i == 0
            rec = run_settings(s, i, trace=args.trace if first else None,
                               dump_regions=args.dump_regions if first else None)
            records.append(rec)
            for sink in sinks:
                sink.write(rec)
        for sink in sinks:
            sink.close()
    for rec in records:
        print(_summary(rec))
    # non-convergence is a result, not an error; exceptions inside a run are
    return 1 if any(r.failure for r in records) else 0


def _contract(args) -> int:
    from .io import load_network
    from .oracles.exact import exact_log_z
    network, geometry, meta = load_network(args.network)
    preset = args.preset.replace("-", "_")
    g = build_regions(preset_regions(network, preset, geometry), network)
    if args.dump_regions:
        g.dump_json(args.dump_regions)
    msgs = init_messages(g, "noisy" if args.init_noise else "uniform", c=args.init_noise,
                         seed=args.seed[0])
    state = GbpState(g, msgs, damping=args.damping, epsilon=args.epsilon,
                     max_iters=args.max_iters, schedule=args.schedule)
    energies: list = []
    res = run(state, callback=(lambda st, m: energies.append(kikuchi_free_energy(st)))
              if args.trace else None)
    if args.trace:
        write_trace_csv(args.trace, state, energies)
    settings = {"model": "network", "params": {"network": args.network}, "preset": preset,
                "seed": args.seed[0], "engine": _engine_settings(args), "oracle": args.oracle}
    rec = RunRecord(0, settings, converged=res.converged, iterations=res.iterations,
                    metric=res.metric if res.converged else res.best_metric)
    rec.free_energy = complex(kikuchi_free_energy(state))
    rec.nonphysical = is_nonphysical(rec.free_energy)
    rec.observables = {"F": rec.free_energy.real}
    if args.oracle:
        rec.oracle = {"F": -exact_log_z(network).real}
        rec.errors = {"F": abs(rec.observables["F"] - rec.oracle["F"])}
    for sink in _sinks(args):
        sink.write(rec)
        sink.close()
    print(_summary(rec))
    return 0


def _regions(args) -> int:
    from .io import load_network
    network, geometry, _ = load_network(args.network)
    g = build_regions(preset_regions(network, args.preset.replace("-", "_"), geometry), network)
    hist = Counter(g.regions[b].counting_number for b in g.children)
    print(f"{len(network)} tensors, {len(g.parents)} parent regions, {len(g.children)} children")
    print("child counting numbers: " + ", ".join(f"{c}: {n}" for c, n in sorted(hist.items())))
    print(f"counting-number identity holds: {g.check_counting_numbers()}")
    if args.dump_regions:
        g.dump_json(args.dump_regions)
    return 0


def _oracle(args) -> int:
    if args.model == "villain":
        from .oracles.villain import villain_bp_analytic, villain_exact_fes, villain_gbp_analytic
        f, e, s = villain_exact_fes(args.beta)
        gbp = villain_gbp_analytic(args.beta).derived
        bp = villain_bp_analytic(args.beta)
        out = {"beta": args.beta, "exact_f": f, "exact_e": e, "exact_s": s,
               "gbp_f": gbp["f"], "gbp_e": gbp["e"], "gbp_s": gbp["s"],
               "bp_energy_per_spin": bp.derived["energy_per_spin"], "bp_stable": bp.stable}
    elif args.model == "ice":
        from .oracles.ice import LIEB_SQUARE, PAULING, ice_gbp_analytic
        fp = ice_gbp_analytic(args.lattice)
        out = {"lattice": args.lattice, "gbp_exp_s0": fp.derived["exp_s0"], "bp_exp_s0": PAULING}
        if args.lattice == "square":
            out["exact_exp_s0"] = LIEB_SQUARE
    else:
        from .oracles.aklt import aklt_bp_analytic
        fp = aklt_bp_analytic(args.a)
        out = {"a": args.a, "regime": fp.solution["regime"], "mu": fp.solution["mu"],
               "c": fp.solution["c"], "stable": fp.stable}
        out.update(fp.derived)
    print(json.dumps(out, indent=1))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("villain", "ice", "aklt", "random"):
            return _run_models(args)
        if args.command == "contract":
            return _contract(args)
        if args.command == "regions":
            return _regions(args)
        return _oracle(args)
    except Exception as exc:
        print(f"gbpnet: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
