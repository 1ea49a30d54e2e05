"""Exact event-driven simulation with absolute event times and cautious updates.

Every node with a positive exit rate holds one scheduled absolute time. After an
event only the transitioning node and the out-neighbors whose rate actually
changed get new times; all other scheduled times stay valid because exponential
waiting times are memoryless.

Random numbers are drawn in a fixed order per event: the destination state, the
transitioning node's next time, then neighbor reschedules by increasing
``(layer, node)``. Sparse and dense modes therefore produce identical runs.
"""
from __future__ import annotations

import math
import re
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import ConfigError, ConsistencyError, DomainError
from .observables import EventLog, EventRecord

DENSE_FRACTION = 0.05


def make_rng(seed, run=0):
    """Counter-based (Philox) stream for run ``run`` of an ensemble seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(run),))))


@dataclass(frozen=True)
class StopCondition:
    """When to end a run. Absorption (no node can move) always ends it.

    ``state``/``threshold`` stop the run as soon as the count of ``state``
    equals ``threshold`` (checked at start and after every event).
    """

    max_time: float = math.inf
    max_events: int | None = None
    state: int | str | None = None
    threshold: int | None = None

    def __post_init__(self):
        if not self.max_time >= 0:
            raise ConfigError("max_time must be nonnegative")
        if self.max_events is not None and self.max_events < 0:
            raise ConfigError("max_events must be nonnegative")
        if (self.state is None) != (self.threshold is None):
            raise ConfigError("state_count needs both a state and a threshold")

    @classmethod
    def parse(cls, text):
        """``"max_time=100,max_events=5000,state_count=I:0"``; ``absorption`` alone means no extra condition."""
        kw = {}
        for item in filter(None, (p.strip() for p in (text or "").split(","))):
            if item == "absorption":
                continue
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"bad stop condition {item!r}")
            try:
                if key == "max_time":
                    kw["max_time"] = float(value)
                elif key == "max_events":
                    kw["max_events"] = int(value)
                elif key == "state_count":
                    state, _, thr = value.partition(":")
                    kw["state"] = int(state) if re.fullmatch(r"\d+", state) else state
                    kw["threshold"] = int(thr)
                else:
                    raise ConfigError(f"unknown stop condition {key!r}")
            except ValueError:
                raise ConfigError(f"bad value in stop condition {item!r}") from None
        return cls(**kw)


@dataclass(frozen=True)
class InitialCondition:
    """Per-node states, or per-state counts placed uniformly at random.

    ``counts`` maps state (name or index) to a count. If ``fill`` names a
    state, it absorbs whatever the counts leave over; otherwise counts must sum
    to the number of nodes.
    """

    states: tuple | None = None
    counts: dict | None = None
    fill: int | str | None = None

    @classmethod
    def from_states(cls, states):
        return cls(states=tuple(int(s) for s in np.asarray(states).ravel()))

    @classmethod
    def from_counts(cls, counts, fill=None):
        if not isinstance(counts, dict):
            counts = dict(enumerate(counts))
        return cls(counts=dict(counts), fill=fill)

    def realize(self, schema, n_nodes, rng):
        m = schema.n_states
        if self.states is not None:
            x = np.asarray(self.states, dtype=np.int64)
            if x.shape != (n_nodes,):
                raise ConfigError(f"initial state vector has {x.size} entries for {n_nodes} nodes")
            if x.size and (x.min() < 0 or x.max() >= m):
                raise ConfigError("initial state index out of range")
            return x.copy()
        if self.counts is None:
            raise ConfigError("initial condition needs states or counts")
        counts = np.zeros(m, dtype=np.int64)
        for key, value in self.counts.items():
            if value < 0:
                raise ConfigError("negative initial count")
            counts[schema.state_index(key)] += int(value)
        if self.fill is not None:
            rest = n_nodes - counts.sum()
            if rest < 0:
                raise ConfigError(f"initial counts exceed {n_nodes} nodes")
            counts[schema.state_index(self.fill)] += rest
        if counts.sum() != n_nodes:
            raise ConfigError(f"initial counts sum to {counts.sum()}, expected {n_nodes}")
        order = rng.permutation(n_nodes)
        x = np.empty(n_nodes, dtype=np.int64)
        x[order] = np.repeat(np.arange(m), counts)
        return x


@dataclass(frozen=True)
class RunConfig:
    initial: InitialCondition
    stop: StopCondition = field(default_factory=StopCondition)
    seed: int = 0
    mode: str = "auto"
    audit_every: int | None = None
    resync_every: int | None = None

    def __post_init__(self):
        init = self.initial
        if isinstance(init, dict):
            init = InitialCondition.from_counts(init)
        elif not isinstance(init, InitialCondition):
            init = InitialCondition.from_states(init)
        object.__setattr__(self, "initial", init)
        if self.mode not in ("sparse", "dense", "auto"):
            raise ConfigError(f"mode must be sparse, dense or auto, got {self.mode!r}")
        for name in ("audit_every", "resync_every"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise ConfigError(f"{name} must be a positive event count")


def select_mode(net, requested="auto"):
    """Explicit requests win; ``auto`` picks dense when the mean degree exceeds 5% of N."""
    if requested in ("sparse", "dense"):
        return requested
    if requested != "auto":
        raise ConfigError(f"unknown mode {requested!r}")
    return "dense" if net.mean_degree > DENSE_FRACTION * net.n_nodes else "sparse"


def node_rate(model, X, w_row, i):
    """Total exit rate of node ``i`` given its per-layer inducing weights ``w_row``."""
    x = int(X[i])
    return float(model.node_exit[x] + np.dot(model.edge_exit[:, x], np.asarray(w_row, dtype=np.float64)))


def sample_waiting_time(lam, rng):
    """``-ln(u) / lam`` with ``u`` uniform on (0, 1]."""
    if not lam > 0:
        raise DomainError(f"waiting times need a positive rate, got {lam}")
    return -math.log(1.0 - rng.random()) / lam


def scratch_influence(model, X):
    """Inducing weight ``W`` and inducer counts ``C`` (both N x L), computed from scratch."""
    n, n_layers = model.n_nodes, model.n_layers
    W = np.zeros((n, n_layers))
    C = np.zeros((n, n_layers), dtype=np.int64)
    for layer, g in enumerate(model.network.layers):
        # in-arcs of every target: in_idx holds sources, grouped by target
        active = X[g.in_idx] == model.inducer[layer]
        targets = np.repeat(np.arange(n), np.diff(g.in_ptr))
        W[:, layer] = np.bincount(targets, weights=g.in_w * active, minlength=n)
        C[:, layer] = np.bincount(targets, weights=active, minlength=n).astype(np.int64)
    W[C == 0] = 0.0
    return W, C


def scratch_rates(model, X, W):
    return model.node_exit[X] + np.einsum("nl,ln->n", W, model.edge_exit[:, X])


def kernel_arrays(model):
    """Network and rate tables in the flat layout the compiled loop expects (cached on the model)."""
    cached = getattr(model, "_kernel_arrays", None)
    if cached is not None:
        return cached
    layers = model.network.layers
    n, n_layers, m = model.n_nodes, model.n_layers, model.n_states
    out_ptr = np.zeros((n_layers, n + 1), dtype=np.int64)
    base = 0
    for k, g in enumerate(layers):
        out_ptr[k] = g.out_ptr + base
        base += g.n_arcs
    net = K.NetArrays(
        out_ptr,
        np.concatenate([g.out_idx for g in layers]).astype(np.int64),
        np.concatenate([g.out_w for g in layers]).astype(np.float64),
    )
    etr = [[] for _ in range(m)]
    sl = [[] for _ in range(m)]
    for x in range(m):
        for layer in range(n_layers):
            for s in range(m):
                r = model.edge_rates[layer, x, s]
                if r != 0:
                    etr[x].append((layer, s, r))
            if model.edge_exit[layer, x] > 0:
                sl[x].append(layer)
    flat = [e for row in etr for e in row]
    rates = K.RateArrays(
        np.ascontiguousarray(model.node_rates, dtype=np.float64),
        model.inducer.astype(np.int64),
        model.node_exit.astype(np.float64),
        np.ascontiguousarray(model.edge_exit, dtype=np.float64),
        np.cumsum([0] + [len(r) for r in etr]).astype(np.int64),
        np.array([e[0] for e in flat], dtype=np.int64),
        np.array([e[1] for e in flat], dtype=np.int64),
        np.array([e[2] for e in flat], dtype=np.float64),
        np.cumsum([0] + [len(r) for r in sl]).astype(np.int64),
        np.array([v for row in sl for v in row], dtype=np.int64),
    )
    touched_cap = sum(int(g.out_degree().max()) if g.n_nodes else 0 for g in layers) + 1
    model._kernel_arrays = (net, rates, touched_cap)
    return model._kernel_arrays


_STOP_NAMES = {K.ABSORBED: "absorption", K.HORIZON: "max_time", K.STATE_COUNT: "state_count"}


class Simulation:
    """Mutable state of one run: node states, influence sums, rates and the schedule."""

    def __init__(self, model, config, run=0):
        self.model = model
        self.config = config
        self.run_index = int(run)
        self.mode = select_mode(model.network, config.mode)
        self.rng = make_rng(config.seed, run)
        self._net, self._rates, touched_cap = kernel_arrays(model)
        n, n_layers, m = model.n_nodes, model.n_layers, model.n_states

        X = config.initial.realize(model.schema, n, self.rng)
        self.initial_states = X.copy()
        W, C = scratch_influence(model, X)
        lam = scratch_rates(model, X, W)
        dense = self.mode == "dense"
        self.st = K.SimArrays(
            X=X, W=W, C=C, lam=lam,
            counts=np.bincount(X, minlength=m).astype(np.int64),
            heap_node=np.zeros(0 if dense else n, dtype=np.int64),
            heap_time=np.zeros(0 if dense else n),
            pos=np.full(n, -1, dtype=np.int64),
            dense_time=np.full(n if dense else 0, np.inf),
            meta=np.array([0, 0, int(dense), -1], dtype=np.int64),
            clock=np.zeros(1),
            scratch=np.zeros(m),
            touched=np.zeros(touched_cap, dtype=np.int64),
        )
        active = np.flatnonzero(lam > 0)
        times = -np.log(1.0 - self.rng.random(active.size)) / lam[active]
        if dense:
            self.st.dense_time[active] = times
        else:
            K.heap_build(self.st.heap_node, self.st.heap_time, self.st.pos, self.st.meta, active, times)
        self.loop_seconds = 0.0

    # -- views ----------------------------------------------------------------

    @property
    def X(self):
        return self.st.X

    @property
    def W(self):
        return self.st.W

    @property
    def lam(self):
        return self.st.lam

    @property
    def counts(self):
        return self.st.counts

    @property
    def t_current(self):
        return float(self.st.clock[0])

    @property
    def event_count(self):
        return int(self.st.meta[K.EVENTS])

    def scheduled_mask(self):
        if self.mode == "dense":
            return np.isfinite(self.st.dense_time)
        return self.st.pos >= 0

    def scheduled(self):
        """Queued ``(node, absolute time)`` pairs in pop order."""
        if self.mode == "dense":
            nodes = np.flatnonzero(np.isfinite(self.st.dense_time))
            times = self.st.dense_time[nodes]
        else:
            size = self.st.meta[K.SIZE]
            nodes, times = self.st.heap_node[:size], self.st.heap_time[:size]
        order = np.lexsort((nodes, times))
        return list(zip(nodes[order].tolist(), times[order].tolist()))

    # -- dynamics ---------------------------------------------------------------

    def _raise_kernel_error(self):
        node = int(self.st.meta[K.BAD_NODE])
        raise ConsistencyError(
            f"inconsistent rate at node {node} (lambda={self.st.lam[node]!r}) after {self.event_count} events"
        )

    def step(self, horizon=math.inf):
        """One event as an ``EventRecord``, or ``None`` if absorbed (or the next event lies past ``horizon``)."""
        status, node, old, new, t = K.step_kernel(self._net, self._rates, self.st, self.rng, horizon)
        if status == K.ERROR:
            self._raise_kernel_error()
        if status != K.EVENT:
            return None
        return EventRecord(float(t), int(node), int(old), int(new))

    def cautious_update(self, node, old, new):
        """Apply neighbor updates for ``node`` having moved ``old -> new`` (X already updated)."""
        n = K.cautious_update_k(self._net, self._rates, self.st, self.rng, node, old, new, self.st.clock[0])
        if n < 0:
            self._raise_kernel_error()
        return set(self.st.touched[:n].tolist())

    def audit(self, rtol=1e-9):
        """Compare incremental state with a from-scratch recomputation; raise on any mismatch."""
        model, st = self.model, self.st
        W, C = scratch_influence(model, st.X)
        problems = []
        if not np.array_equal(C, st.C):
            problems.append(f"inducer counts differ at {np.argwhere(C != st.C)[:5].tolist()}")
        bad = ~np.isclose(st.W, W, rtol=rtol, atol=0.0)
        if bad.any():
            problems.append(f"W differs at {np.argwhere(bad)[:5].tolist()}")
        lam = scratch_rates(model, st.X, W)
        bad = ~np.isclose(st.lam, lam, rtol=rtol, atol=0.0)
        if bad.any():
            problems.append(f"lambda differs at nodes {np.flatnonzero(bad)[:5].tolist()}")
        queued = self.scheduled_mask()
        bad = queued != (st.lam > 0)
        if bad.any():
            problems.append(f"schedule membership wrong at nodes {np.flatnonzero(bad)[:5].tolist()}")
        if self.mode == "sparse" and K.heap_check(st.heap_node, st.heap_time, st.pos, st.meta) >= 0:
            problems.append("heap order broken")
        if self.mode == "dense" and np.any(st.dense_time[queued] < self.t_current):
            problems.append("scheduled time in the past")
        if not np.array_equal(np.bincount(st.X, minlength=model.n_states), st.counts):
            problems.append("state counts drifted")
        if problems:
            raise ConsistencyError(f"audit after {self.event_count} events: " + "; ".join(problems))

    def resync(self):
        """Recompute influence sums and rates from scratch, dropping accumulated rounding."""
        st = self.st
        W, C = scratch_influence(self.model, st.X)
        st.W[:] = W
        st.C[:] = C
        st.lam[:] = scratch_rates(self.model, st.X, W)
        queued = self.scheduled_mask()
        t = st.clock[0]
        for v in np.flatnonzero(queued & (st.lam <= 0)).tolist():
            K.sched_discard(st, v)
        for v in np.flatnonzero(~queued & (st.lam > 0)).tolist():
            K.sched_set(st, v, t + sample_waiting_time(st.lam[v], self.rng))

    def run(self):
        """Step until the configured stop condition; returns the ``EventLog``."""
        cfg, st = self.config, self.st
        stop = cfg.stop
        horizon = float(stop.max_time)
        max_events = math.inf if stop.max_events is None else int(stop.max_events)
        stop_state, threshold = -1, -1
        if stop.state is not None:
            stop_state = self.model.schema.state_index(stop.state)
            threshold = int(stop.threshold)
        checkpoints = [k for k in (cfg.audit_every, cfg.resync_every) if k]

        cap = 1024 if max_events == math.inf else int(min(max(max_events - self.event_count, 1), 1 << 16))
        buf = [np.empty(cap), np.empty(cap, np.int64), np.empty(cap, np.int64), np.empty(cap, np.int64)]
        filled = 0
        reason = None
        if stop_state >= 0 and st.counts[stop_state] == threshold:
            reason = "state_count"
        elif self.event_count >= max_events:
            reason = "max_events"
        while reason is None:
            limit = max_events
            for k in checkpoints:
                limit = min(limit, (self.event_count // k + 1) * k)
            limit = np.iinfo(np.int64).max if limit == math.inf else int(limit)
            t0 = _time.perf_counter()
            status, filled = K.run_kernel(
                self._net, self._rates, st, self.rng, horizon, limit, stop_state, threshold,
                buf[0], buf[1], buf[2], buf[3], filled,
            )
            self.loop_seconds += _time.perf_counter() - t0
            if status == K.ERROR:
                self._raise_kernel_error()
            if status == K.FULL:
                grow = len(buf[0])
                buf = [np.concatenate([b, np.empty(grow, b.dtype)]) for b in buf]
                continue
            if status == K.LIMIT:
                if cfg.audit_every and self.event_count % cfg.audit_every == 0:
                    self.audit()
                if cfg.resync_every and self.event_count % cfg.resync_every == 0:
                    self.resync()
                if self.event_count >= max_events:
                    reason = "max_events"
                continue
            reason = _STOP_NAMES[status]
        if cfg.audit_every:
            self.audit()
        final_time = horizon if reason == "max_time" else self.t_current
        return EventLog(
            self.model.state_names, self.initial_states,
            buf[0][:filled].copy(), buf[1][:filled].copy(), buf[2][:filled].copy(), buf[3][:filled].copy(),
            final_time, reason, seed=cfg.seed, run=self.run_index, model_digest=self.model.digest, engine="fast",
        )


def init(model, config, run=0):
    return Simulation(model, config, run)


def step(sim):
    return sim.step()


def cautious_update(sim, node, old, new):
    return sim.cautious_update(node, old, new)


def run(model, config, run=0):
    return Simulation(model, config, run).run()
