"""Exact stochastic simulation of multi-compartment spreading on multilayer networks."""
from .engine import (
    InitialCondition,
    RunConfig,
    Simulation,
    StopCondition,
    make_rng,
    node_rate,
    run,
    sample_waiting_time,
    select_mode,
)
from .eventqueue import IndexedQueue
from .generators import generate
from .model import (
    CompiledModel,
    EdgeMechanism,
    ModelSchema,
    compile_model,
    competitive_sis,
    dtmc_to_ctmc_rate,
    load_model_config,
    preset,
    seir,
    sir,
    sis,
    validate,
)
from .network import LayerGraph, MultilayerNetwork, load_edge_list
from .observables import EventLog, EventRecord, TimeSeries, counts_on_grid, ensemble_mean, read_log, write_log

__version__ = "0.1.0"
