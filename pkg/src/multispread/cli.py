"""Command-line driver: ``generate``, ``run``, ``average`` and ``bench``."""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bench import edge_sweep, layer_sweep, node_sweep, write_table
from .engine import InitialCondition, RunConfig, StopCondition
from .ensemble import run_ensemble
from .errors import MultispreadError
from .generators import KINDS, generate
from .model import _load_toml, compile_model, load_model_config
from .network import write_edge_list
from .observables import counts_on_grid, ensemble_mean, read_log

log = logging.getLogger("multispread")


class UsageError(MultispreadError, ValueError):
    pass


def _number_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _counts(text):
    """``"I=10,R=2"`` -> ``{"I": 10, "R": 2}``."""
    out = {}
    for item in filter(None, (p.strip() for p in text.split(","))):
        name, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected STATE=COUNT, got {item!r}")
        key = int(name) if name.strip().isdigit() else name.strip()
        try:
            out[key] = int(value)
        except ValueError:
            raise argparse.ArgumentTypeError(f"count for {name!r} is not an integer") from None
    return out


def _grid(text):
    """``"T_MAX:POINTS"`` -> evenly spaced grid from 0 to T_MAX."""
    t_max, sep, points = text.partition(":")
    try:
        return float(t_max), int(points) if sep else 101
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected T_MAX[:POINTS], got {text!r}") from None


# -- generate ------------------------------------------------------------------

def cmd_generate(args):
    params = {
        k: v for k, v in (
            ("p", args.p), ("radius", args.radius), ("target_degree", args.target_degree),
            ("m", args.m), ("k", args.k), ("p_rewire", args.p_rewire),
        ) if v is not None
    }
    g = generate(args.kind, args.n, seed=args.seed, **params)
    if args.out == "-":
        write_edge_list(g, sys.stdout)
    else:
        write_edge_list(g, args.out)
    log.info("%s: %d nodes, %d edges, mean degree %.3f", args.kind, g.n_nodes, g.n_arcs // 2, g.mean_degree)
    return 0


# -- run -----------------------------------------------------------------------

def _initial_condition(args, cfg, schema):
    if args.init_file:
        states = np.loadtxt(args.init_file, dtype=np.int64, ndmin=1)
        return InitialCondition.from_states(states)
    counts = args.init
    fill = args.fill
    if counts is None:
        section = cfg.get("initial", {})
        counts = {k: v for k, v in section.items() if k != "fill"}
        fill = fill if fill is not None else section.get("fill")
    if not counts:
        raise UsageError("no initial condition: pass --init STATE=COUNT or add an [initial] table to the model")
    return InitialCondition.from_counts(counts, fill=fill if fill is not None else schema.state_names[0])


def cmd_run(args):
    model_path = Path(args.model)
    if not model_path.exists():
        raise UsageError(f"model file {model_path} does not exist")
    if args.runs < 1:
        raise UsageError("--runs must be at least 1")
    cfg = _load_toml(model_path)
    schema, network = load_model_config(model_path)
    model = compile_model(schema, network)
    stop = StopCondition.parse(args.stop)
    run_cfg = RunConfig(
        _initial_condition(args, cfg, schema), stop, seed=args.seed, mode=args.mode, audit_every=args.audit_every,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = None
    if args.grid is not None:
        t_max, points = args.grid
        grid = np.linspace(0.0, t_max, points)

    results = run_ensemble(model, run_cfg, args.runs, engine=args.engine, jobs=args.jobs, grid=grid, log_dir=str(out))
    manifest = {
        "version": __version__,
        "model": str(model_path.resolve()),
        "networks": [str((model_path.parent / lay["network"]).resolve()) for lay in cfg.get("layers", [])],
        "model_digest": model.digest,
        "seed": args.seed,
        "runs": args.runs,
        "engine": args.engine,
        "mode": args.mode,
        "stop": args.stop,
        "audit_every": args.audit_every,
        "out": str(out.resolve()),
    }
    absorbed = [r.final_time for r in results if r.stop_reason == "absorption"]
    loop = sum(r.loop_seconds for r in results)
    events = sum(r.events for r in results)
    summary = {
        "runs": len(results),
        "state_names": list(schema.state_names),
        "mean_final_counts": np.mean([r.final_counts for r in results], axis=0).tolist(),
        "absorbed_runs": len(absorbed),
        "mean_absorption_time": float(np.mean(absorbed)) if absorbed else None,
        "wall_seconds": sum(r.wall_seconds for r in results),
        "events": events,
        "events_per_second": events / loop if loop > 0 else None,
        "per_run": [r.summary() for r in results],
    }
    _write_json(out / "manifest.json", manifest)
    _write_json(out / "summary.json", summary)
    if grid is not None:
        ensemble_mean([r.series for r in results]).to_csv(out / "average.csv")
    log.info("%d runs, %d events, logs in %s", len(results), events, out)
    return 0


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


# -- average -------------------------------------------------------------------

def cmd_average(args):
    paths = sorted(Path(args.logs).glob("run_*.csv")) if Path(args.logs).is_dir() else [Path(args.logs)]
    if not paths:
        raise UsageError(f"no run_*.csv logs in {args.logs}")
    logs = [read_log(p) for p in paths]
    if args.grid is not None:
        t_max, points = args.grid
    else:
        # the latest time every log still describes
        cut = [lg.final_time for lg in logs if lg.stop_reason != "absorption"]
        t_max = min(cut) if cut else max(lg.final_time for lg in logs)
        points = 101
    grid = np.linspace(0.0, t_max, points)
    mean = ensemble_mean(counts_on_grid(lg, grid) for lg in logs)
    mean.to_csv(args.out)
    log.info("averaged %d logs onto %d grid points -> %s", len(logs), points, args.out)
    return 0


# -- bench ---------------------------------------------------------------------

def cmd_bench(args):
    values = args.range
    common = dict(trials=args.trials, events_per_trial=args.events, seed=args.seed, mode=args.mode)
    if args.scaling == "nodes":
        rows = node_sweep(values or [1e2, 1e3, 1e4, 1e5], engine=args.engine, weighted=args.weighted, **common)
    elif args.scaling == "edges":
        rows = edge_sweep(values or [10, 50, 200, 999], **common)
    else:
        rows = layer_sweep(values or [1, 4, 16], weighted=args.weighted, **common)
    if args.out == "-":
        write_table(rows, sys.stdout)
    else:
        write_table(rows, args.out)
    return 0


# -- entry point ---------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="multispread", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", parents=[common], help="write a random network as an edge list")
    gen.add_argument("kind", choices=sorted(set(KINDS) | {"er", "rgg", "ba", "ws"}))
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--p", type=float, help="edge probability (erdos_renyi)")
    gen.add_argument("--radius", type=float, help="connection radius (geometric)")
    gen.add_argument("--target-degree", type=float, help="expected mean degree (geometric)")
    gen.add_argument("--m", type=int, help="edges per new node (barabasi_albert)")
    gen.add_argument("--k", type=int, help="ring neighbors (watts_strogatz)")
    gen.add_argument("--p-rewire", type=float, help="rewiring probability (watts_strogatz)")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="-", help="output path, '-' for stdout")
    gen.set_defaults(func=cmd_generate)

    run = sub.add_parser("run", parents=[common], help="simulate an ensemble and write one event log per run")
    run.add_argument("--model", required=True, help="TOML model file")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--runs", type=int, default=1)
    run.add_argument("--engine", choices=("fast", "oracle"), default="fast")
    run.add_argument("--mode", choices=("sparse", "dense", "auto"), default="auto")
    run.add_argument("--stop", default="absorption",
                     help="comma list of max_time=T, max_events=K, state_count=STATE:COUNT, absorption")
    run.add_argument("--init", type=_counts, help="initial counts, e.g. I=10; the rest go to --fill")
    run.add_argument("--fill", help="state holding nodes not named in --init (default: first state)")
    run.add_argument("--init-file", help="file with one initial state index per node")
    run.add_argument("--grid", type=_grid, help="also write average.csv on T_MAX[:POINTS]")
    run.add_argument("--audit-every", type=int, help="recompute rates from scratch every K events")
    run.add_argument("--jobs", type=int, default=1)
    run.add_argument("--out", required=True, help="output directory")
    run.set_defaults(func=cmd_run)

    avg = sub.add_parser("average", parents=[common], help="mean state fractions over a directory of event logs")
    avg.add_argument("logs", help="directory of run_*.csv logs, or a single log")
    avg.add_argument("--grid", type=_grid, help="T_MAX[:POINTS]; defaults to the common time span")
    avg.add_argument("--out", required=True)
    avg.set_defaults(func=cmd_average)

    bench = sub.add_parser("bench", parents=[common], help="per-event time against nodes, edges or layers")
    bench.add_argument("--scaling", choices=("nodes", "edges", "layers"), required=True)
    bench.add_argument("--range", type=_number_list, help="comma-separated sweep values")
    bench.add_argument("--trials", type=int, default=5)
    bench.add_argument("--events", type=int, default=20_000, help="events per trial")
    bench.add_argument("--engine", choices=("fast", "oracle"), default="fast", help="node sweep only")
    bench.add_argument("--mode", choices=("sparse", "dense", "auto"), default="auto")
    bench.add_argument("--weighted", action="store_true")
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", default="-")
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (MultispreadError, OSError) as exc:
        print(f"multispread {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
