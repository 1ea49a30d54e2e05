"""Multi-compartment mechanistic models.

A model has ``M`` states, a node-based rate matrix (transitions that ignore
neighbors) and, per network layer, an edge-based rate matrix together with the
single inducer state whose occupants drive that layer's transitions. For a node
in state ``m`` the rate of moving to ``n`` is::

    node_rates[m, n] + sum_l edge_rates[l, m, n] * (weight of in-arcs on layer l
                                                    from nodes in inducer[l])
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import CompileError, ConfigError, DomainError, ValidationError


@dataclass(frozen=True, eq=False)
class EdgeMechanism:
    name: str
    inducer: int
    rates: np.ndarray  # (M, M), per unit of inducing edge weight


@dataclass(frozen=True, eq=False)
class ModelSchema:
    state_names: tuple
    node_rates: np.ndarray  # (M, M)
    layers: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "state_names", tuple(str(s) for s in self.state_names))
        object.__setattr__(self, "node_rates", np.array(self.node_rates, dtype=np.float64))
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def n_states(self):
        return len(self.state_names)

    @property
    def n_layers(self):
        return len(self.layers)

    def state_index(self, name):
        if isinstance(name, (int, np.integer)):
            return int(name)
        try:
            return self.state_names.index(name)
        except ValueError:
            raise ValidationError(f"unknown state {name!r}; states are {list(self.state_names)}") from None

    @classmethod
    def build(cls, states, node_transitions=(), layers=()):
        """Assemble a schema from named transitions.

        ``node_transitions`` is an iterable of ``(from, to, rate)``; each layer is
        ``(name, inducer, [(from, to, rate), ...])``. States may be given by name
        or index. Repeated transitions add up.
        """
        states = tuple(states)
        m = len(states)
        probe = cls(states, np.zeros((m, m)))
        a_delta = np.zeros((m, m))
        for src, dst, rate in node_transitions:
            a_delta[probe.state_index(src), probe.state_index(dst)] += float(rate)
        mechs = []
        for name, inducer, transitions in layers:
            a_beta = np.zeros((m, m))
            for src, dst, rate in transitions:
                a_beta[probe.state_index(src), probe.state_index(dst)] += float(rate)
            mechs.append(EdgeMechanism(str(name), probe.state_index(inducer), a_beta))
        return cls(states, a_delta, tuple(mechs))

    def to_dict(self):
        return {
            "states": list(self.state_names),
            "node_rates": self.node_rates.tolist(),
            "layers": [
                {"name": e.name, "inducer": int(e.inducer), "rates": np.asarray(e.rates, float).tolist()}
                for e in self.layers
            ],
        }

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def raise_if_invalid(self):
        if self.violations:
            raise ValidationError("invalid model: " + "; ".join(self.violations))


def _check_rates(label, a, m, out):
    a = np.asarray(a, dtype=np.float64)
    if a.shape != (m, m):
        out.append(f"{label}: shape {a.shape}, expected ({m}, {m})")
        return
    if not np.all(np.isfinite(a)):
        out.append(f"{label}: non-finite rate")
    if np.any(a < 0):
        out.append(f"{label}: negative rate")
    if np.any(np.diag(a) != 0):
        out.append(f"{label}: nonzero diagonal")


def validate(schema):
    """Collect every structural problem of ``schema``; never raises."""
    out = []
    m = schema.n_states
    if m < 2:
        out.append(f"need at least 2 states, got {m}")
    if len(set(schema.state_names)) != m:
        out.append("duplicate state names")
    _check_rates("node rates", schema.node_rates, m, out)
    seen = set()
    for k, mech in enumerate(schema.layers):
        label = f"layer {k} ({mech.name})"
        if mech.name in seen:
            out.append(f"{label}: duplicate layer name")
        seen.add(mech.name)
        if not (isinstance(mech.inducer, (int, np.integer)) and 0 <= mech.inducer < m):
            out.append(f"{label}: inducer out of range ({mech.inducer!r})")
        _check_rates(f"{label} edge rates", mech.rates, m, out)
    return ValidationReport(out)


class CompiledModel:
    """A validated schema bound to a network, with the lookup tables the simulators need.

    Attributes
    ----------
    node_rates : (M, M) array
    edge_rates : (L, M, M) array
    inducer : (L,) int array
    node_exit : (M,) total node-based exit rate per state
    edge_exit : (L, M) total edge-based exit rate per unit influence, per layer and state
    susceptible_states : tuple of frozensets
        Per layer, the states with a nonzero edge-rate row (their rate depends on that layer).
    relevant_states : tuple of frozensets
        Per layer, the states with a nonzero edge-rate row or column.
    has_exit : (M,) bool
        States with any outgoing node- or edge-based rate.
    """

    def __init__(self, schema, network):
        validate(schema).raise_if_invalid()
        if schema.n_layers != network.n_layers:
            raise CompileError(
                f"model defines {schema.n_layers} layer mechanism(s) but the network has {network.n_layers} layer(s)"
            )
        self.schema = schema
        self.network = network
        m, n_layers = schema.n_states, schema.n_layers
        self.node_rates = np.ascontiguousarray(schema.node_rates, dtype=np.float64)
        self.edge_rates = np.zeros((n_layers, m, m))
        for k, mech in enumerate(schema.layers):
            self.edge_rates[k] = mech.rates
        self.inducer = np.array([mech.inducer for mech in schema.layers], dtype=np.int64)
        self.node_exit = self.node_rates.sum(axis=1)
        self.edge_exit = self.edge_rates.sum(axis=2)
        rows = self.edge_rates.any(axis=2)
        cols = self.edge_rates.any(axis=1)
        self.susceptible_states = tuple(frozenset(np.flatnonzero(rows[k]).tolist()) for k in range(n_layers))
        self.relevant_states = tuple(
            frozenset(np.flatnonzero(rows[k] | cols[k]).tolist()) for k in range(n_layers)
        )
        self.has_exit = (self.node_exit > 0) | rows.any(axis=0)

    @property
    def n_states(self):
        return self.schema.n_states

    @property
    def n_layers(self):
        return self.schema.n_layers

    @property
    def n_nodes(self):
        return self.network.n_nodes

    @property
    def state_names(self):
        return self.schema.state_names

    @cached_property
    def digest(self):
        h = hashlib.sha256()
        h.update(self.schema.digest().encode())
        h.update(self.network.digest().encode())
        return h.hexdigest()[:32]

    def __getstate__(self):
        d = dict(self.__dict__)
        d.pop("digest", None)
        return d


def compile_model(schema, network):
    """Bind ``schema`` to ``network``; raises on an invalid schema or layer-count mismatch."""
    return CompiledModel(schema, network)


# -- presets -----------------------------------------------------------------

def _nonneg(**rates):
    for name, value in rates.items():
        if not (math.isfinite(value) and value >= 0):
            raise ValidationError(f"{name} must be a nonnegative finite rate, got {value}")


def sis(beta, delta, layer="contact"):
    _nonneg(beta=beta, delta=delta)
    return ModelSchema.build(["S", "I"], [("I", "S", delta)], [(layer, "I", [("S", "I", beta)])])


def sir(beta, delta, layer="contact"):
    _nonneg(beta=beta, delta=delta)
    return ModelSchema.build(["S", "I", "R"], [("I", "R", delta)], [(layer, "I", [("S", "I", beta)])])


def seir(beta, sigma, delta, layer="contact"):
    _nonneg(beta=beta, sigma=sigma, delta=delta)
    return ModelSchema.build(
        ["S", "E", "I", "R"],
        [("E", "I", sigma), ("I", "R", delta)],
        [(layer, "I", [("S", "E", beta)])],
    )


def competitive_sis(betas, delta):
    """S, I1..IL: layer k carries infection k (induced by Ik); every Ik recovers to S at ``delta``."""
    betas = [float(b) for b in betas]
    if not betas:
        raise ValidationError("competitive_sis needs at least one layer")
    _nonneg(delta=delta, **{f"beta{k + 1}": b for k, b in enumerate(betas)})
    infected = [f"I{k + 1}" for k in range(len(betas))]
    return ModelSchema.build(
        ["S", *infected],
        [(i, "S", delta) for i in infected],
        [(f"layer{k + 1}", i, [("S", i, b)]) for k, (i, b) in enumerate(zip(infected, betas))],
    )


PRESETS = {"sis": sis, "sir": sir, "seir": seir, "competitive_sis": competitive_sis}


def preset(name, **params):
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return factory(**params)


def dtmc_to_ctmc_rate(p, dt=1.0):
    """Continuous-time rate matching a per-step transition probability ``p`` over step ``dt``."""
    if not dt > 0:
        raise DomainError(f"time step must be positive, got {dt}")
    if not 0.0 <= p < 1.0:
        raise DomainError(f"probability must lie in [0, 1), got {p}")
    return -math.log1p(-p) / dt


# -- config files -------------------------------------------------------------

def _load_toml(path):
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None


def schema_from_config(cfg):
    try:
        states = cfg["states"]
        node_transitions = [(t["from"], t["to"], t["rate"]) for t in cfg.get("node_transitions", [])]
        layers = [
            (lay.get("name", f"layer{k + 1}"), lay["inducer"],
             [(t["from"], t["to"], t["rate"]) for t in lay.get("edge_transitions", [])])
            for k, lay in enumerate(cfg.get("layers", []))
        ]
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"model config is missing or has a malformed field: {exc}") from None
    schema = ModelSchema.build(states, node_transitions, layers)
    validate(schema).raise_if_invalid()
    return schema


def load_model_config(path):
    """Read a TOML model file and the edge lists it references.

    Returns ``(schema, network)``. Relative network paths are resolved against
    the config file's directory; a file used by several layers is read once
    per distinct (path, directed, weighted, default_weight) combination.
    """
    from .network import MultilayerNetwork, load_edge_list

    path = Path(path)
    cfg = _load_toml(path)
    schema = schema_from_config(cfg)
    cache = {}
    layers = []
    for k, lay in enumerate(cfg.get("layers", [])):
        if "network" not in lay:
            raise ConfigError(f"{path}: layer {k} has no 'network' path")
        net_path = Path(lay["network"])
        if not net_path.is_absolute():
            net_path = path.parent / net_path
        if not net_path.exists():
            raise ConfigError(f"{path}: network file {net_path} does not exist")
        key = (str(net_path), bool(lay.get("directed", False)), bool(lay.get("weighted", True)),
               float(lay.get("default_weight", 1.0)))
        if key not in cache:
            cache[key] = load_edge_list(net_path, directed=key[1], default_weight=key[3], weighted=key[2])
        layers.append(cache[key])
    if not layers:
        raise ConfigError(f"{path}: model declares no layers")
    n_nodes = cfg.get("n_nodes")
    if n_nodes is not None:
        layers = [g.padded(int(n_nodes)) for g in layers]
    return schema, MultilayerNetwork.padded(layers)
