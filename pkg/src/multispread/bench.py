"""Scaling sweeps: per-event wall time versus nodes, edges or layers.

Timing covers the event loop only; building the network, compiling the model
and initializing rates are excluded.
"""
import csv
import time
from dataclasses import dataclass

import numpy as np

from .engine import InitialCondition, RunConfig, Simulation, StopCondition
from .generators import generate_edges
from .model import compile_model, competitive_sis, sir
from .network import LayerGraph, MultilayerNetwork
from .oracle import OracleSimulation


@dataclass
class BenchRow:
    param: float
    mean_event_time_s: float
    std: float
    events: int

    def as_tuple(self):
        return (self.param, self.mean_event_time_s, self.std, self.events)


def _layer(n, src, dst, weighted, rng):
    w = rng.uniform(0.5, 1.5, size=src.size) if weighted else None
    return LayerGraph.from_edges(n, src, dst, w, directed=False)


def time_events(model, initial, *, engine="fast", mode="auto", events_per_trial=20_000, trials=5,
                max_runs_per_trial=10_000, seed=0):
    """Per-event loop time for ``trials`` trials of at least ``events_per_trial`` events.

    A trial chains fresh runs (each with its own stream) until enough events
    have fired, so small networks that absorb quickly are measured over many runs.
    Returns ``(mean, std, total_events)`` of the per-trial mean event time.
    An untimed warm-up run comes first so loading compiled code is not measured.
    """
    warm = RunConfig(initial, StopCondition(max_events=min(events_per_trial, 1000)), seed=seed, mode=mode)
    if engine == "fast":
        Simulation(model, warm, 0).run()
    per_trial = []
    total = 0
    run = 0
    for trial in range(trials):
        spent, fired = 0.0, 0
        for _ in range(max_runs_per_trial):
            remaining = events_per_trial - fired
            if remaining <= 0:
                break
            cfg = RunConfig(initial, StopCondition(max_events=remaining), seed=seed, mode=mode)
            if engine == "fast":
                sim = Simulation(model, cfg, run)
                log = sim.run()
                spent += sim.loop_seconds
            else:
                sim = OracleSimulation(model, cfg, run)
                t0 = time.perf_counter()
                log = sim.run()
                spent += time.perf_counter() - t0
            fired += len(log)
            run += 1
        if fired:
            per_trial.append(spent / fired)
        total += fired
    arr = np.asarray(per_trial)
    return float(arr.mean()), float(arr.std(ddof=1) if arr.size > 1 else 0.0), total


def node_sweep(sizes, *, degree=11.0, beta=0.005, delta=0.01, infected_fraction=0.01, engine="fast",
               trials=5, events_per_trial=20_000, seed=0, weighted=False, mode="auto"):
    """SIR on random geometric layers of growing size at constant mean degree."""
    rows = []
    for n in sizes:
        n = int(n)
        rng = np.random.default_rng(seed)
        src, dst = generate_edges("geometric", n, seed=seed, target_degree=degree)
        net = MultilayerNetwork((_layer(n, src, dst, weighted, rng),))
        model = compile_model(sir(beta, delta), net)
        init = InitialCondition.from_counts({"I": max(1, int(round(infected_fraction * n)))}, fill="S")
        mean, std, events = time_events(model, init, engine=engine, mode=mode, trials=trials,
                                        events_per_trial=events_per_trial, seed=seed)
        rows.append(BenchRow(n, mean, std, events))
    return rows


def edge_sweep(degrees, *, n=1000, beta=0.005, delta=0.01, infected=10, trials=5, events_per_trial=20_000,
               seed=0, mode="auto"):
    """SIR on Erdos-Renyi layers of fixed size and growing mean degree (up to complete)."""
    rows = []
    for k in degrees:
        k = float(k)
        p = min(1.0, k / (n - 1))
        src, dst = generate_edges("erdos_renyi", n, seed=seed, p=p)
        net = MultilayerNetwork((LayerGraph.from_edges(n, src, dst, directed=False),))
        model = compile_model(sir(beta, delta), net)
        init = InitialCondition.from_counts({"I": infected}, fill="S")
        mean, std, events = time_events(model, init, mode=mode, trials=trials,
                                        events_per_trial=events_per_trial, seed=seed)
        rows.append(BenchRow(k, mean, std, events))
    return rows


def layer_sweep(layer_counts, *, n=10_000, degree=11.0, beta=0.05, delta=0.1, seeds_per_layer=20,
                weighted=False, trials=5, events_per_trial=20_000, seed=0, mode="auto"):
    """Competitive SIS with one infection type per layer, all layers sharing one topology."""
    src, dst = generate_edges("geometric", n, seed=seed, target_degree=degree)
    rows = []
    for n_layers in layer_counts:
        n_layers = int(n_layers)
        rng = np.random.default_rng(seed)
        layer = _layer(n, src, dst, weighted, rng)
        net = MultilayerNetwork((layer,) * n_layers)
        model = compile_model(competitive_sis([beta] * n_layers, delta), net)
        counts = {f"I{k + 1}": seeds_per_layer for k in range(n_layers)}
        init = InitialCondition.from_counts(counts, fill="S")
        mean, std, events = time_events(model, init, mode=mode, trials=trials,
                                        events_per_trial=events_per_trial, seed=seed)
        rows.append(BenchRow(n_layers, mean, std, events))
    return rows


def write_table(rows, path_or_file):
    header = ("param", "mean_event_time_s", "std", "events")
    if hasattr(path_or_file, "write"):
        w = csv.writer(path_or_file, lineterminator="\n")
        w.writerow(header)
        w.writerows(r.as_tuple() for r in rows)
        return
    with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
        write_table(rows, fh)
