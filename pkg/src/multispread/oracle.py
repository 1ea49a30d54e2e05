"""Conventional stochastic simulator used as ground truth.

Every event recomputes all node rates from the model matrices, draws a fresh
exponential waiting time for every active node, and fires the earliest one.
This costs O(N + E) per event and shares no code with the fast engine beyond
the model definition and the random stream constructor.
"""
import math

import numpy as np
import scipy.sparse as sp

from .engine import make_rng
from .observables import EventLog, EventRecord


class OracleSimulation:
    def __init__(self, model, config, run=0):
        self.model = model
        self.config = config
        self.run_index = int(run)
        self.rng = make_rng(config.seed, run)
        n = model.n_nodes
        self.X = config.initial.realize(model.schema, n, self.rng)
        self.initial_states = self.X.copy()
        self.t_current = 0.0
        self.event_count = 0
        # transposed adjacency: row i lists the weights of arcs j -> i
        self._inbound = [sp.csr_matrix(g.to_csr().T) for g in model.network.layers]
        self._a_delta = np.asarray(model.schema.node_rates, dtype=np.float64)
        self._a_beta = [np.asarray(e.rates, dtype=np.float64) for e in model.schema.layers]
        self._inducer = [int(e.inducer) for e in model.schema.layers]

    def influence(self):
        """(N, L) inducing weight, recomputed from the adjacency."""
        cols = [a @ (self.X == q).astype(np.float64) for a, q in zip(self._inbound, self._inducer)]
        return np.column_stack(cols) if cols else np.zeros((self.X.size, 0))

    def destination_rates(self, node, W=None):
        if W is None:
            W = self.influence()
        x = self.X[node]
        rates = self._a_delta[x].copy()
        for layer, a_beta in enumerate(self._a_beta):
            rates += a_beta[x] * W[node, layer]
        return rates

    def rates(self):
        W = self.influence()
        lam = self._a_delta.sum(axis=1)[self.X]
        for layer, a_beta in enumerate(self._a_beta):
            lam = lam + a_beta.sum(axis=1)[self.X] * W[:, layer]
        return lam, W

    def step(self, horizon=math.inf):
        lam, W = self.rates()
        active = np.flatnonzero(lam > 0)
        if active.size == 0:
            return None
        tau = -np.log(1.0 - self.rng.random(active.size)) / lam[active]
        j = int(np.argmin(tau))
        t = self.t_current + tau[j]
        if t > horizon:
            return None
        node = int(active[j])
        rates = self.destination_rates(node, W)
        cum = np.cumsum(rates)
        new = int(np.searchsorted(cum, self.rng.random() * cum[-1], side="right"))
        new = min(new, int(np.flatnonzero(rates > 0)[-1]))
        old = int(self.X[node])
        self.X[node] = new
        self.t_current = t
        self.event_count += 1
        return EventRecord(float(t), node, old, new)

    def run(self):
        stop = self.config.stop
        horizon = float(stop.max_time)
        max_events = math.inf if stop.max_events is None else stop.max_events
        stop_state = None if stop.state is None else self.model.schema.state_index(stop.state)
        records = []
        reason = None
        if stop_state is not None and np.count_nonzero(self.X == stop_state) == stop.threshold:
            reason = "state_count"
        while reason is None:
            if self.event_count >= max_events:
                reason = "max_events"
                break
            rec = self.step(horizon)
            if rec is None:
                lam, _ = self.rates()
                reason = "absorption" if not np.any(lam > 0) else "max_time"
                break
            records.append(rec)
            if stop_state is not None and np.count_nonzero(self.X == stop_state) == stop.threshold:
                reason = "state_count"
        arr = np.array(records, dtype=np.float64).reshape(-1, 4)
        final_time = horizon if reason == "max_time" else self.t_current
        return EventLog(
            self.model.state_names, self.initial_states,
            arr[:, 0], arr[:, 1].astype(np.int64), arr[:, 2].astype(np.int64), arr[:, 3].astype(np.int64),
            final_time, reason, seed=self.config.seed, run=self.run_index,
            model_digest=self.model.digest, engine="oracle",
        )


def oracle_step(sim):
    return sim.step()


def oracle_run(model, config, run=0):
    return OracleSimulation(model, config, run).run()
