"""Seeded synthetic contact layers (undirected, unit weight)."""
import math

import networkx as nx
import numpy as np
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .errors import ValidationError
from .network import LayerGraph

KINDS = ("erdos_renyi", "geometric", "barabasi_albert", "watts_strogatz", "complete")


def _pairs_from_linear(k):
    # linear index over {(i, j): 0 <= j < i} in row order -> (i, j)
    i = np.floor((1.0 + np.sqrt(1.0 + 8.0 * k.astype(np.float64))) / 2.0).astype(np.int64)
    # float sqrt may be off by one near perfect squares
    i -= (i * (i - 1) // 2) > k
    i += ((i + 1) * i // 2) <= k
    j = k - i * (i - 1) // 2
    return i, j


def erdos_renyi_edges(n, p, rng):
    """Undirected G(n, p) edge arrays, drawn by geometric skipping over the pair index."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    total = n * (n - 1) // 2
    if p == 0.0 or total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    if p == 1.0:
        k = np.arange(total, dtype=np.int64)
        return _pairs_from_linear(k)
    chunks = []
    last = -1
    batch = max(1024, int(total * p * 1.05) + 64)
    while True:
        gaps = rng.geometric(p, size=batch).astype(np.int64)
        pos = last + np.cumsum(gaps)
        done = pos[-1] >= total
        pos = pos[pos < total]
        chunks.append(pos)
        if done:
            break
        last = int(pos[-1])
        batch = max(1024, int((total - last) * p * 1.05) + 64)
    k = np.concatenate(chunks)
    return _pairs_from_linear(k)


def geometric_radius(n, target_degree):
    """Radius giving expected degree ``target_degree`` for ``n`` uniform points in the unit square.

    Uses the exact boundary-corrected pair probability
    ``pi r^2 - 8 r^3 / 3 + r^4 / 2`` (valid for ``r <= 1``).
    """
    if n < 2:
        raise ValidationError("need at least two nodes to target a degree")
    if not 0 < target_degree < n - 1:
        raise ValidationError(f"target degree must lie in (0, {n - 1})")

    def expected(r):
        return (n - 1) * (math.pi * r * r - 8.0 * r**3 / 3.0 + r**4 / 2.0) - target_degree

    return brentq(expected, 0.0, 1.0, xtol=1e-15)


def geometric_edges(n, radius, rng):
    if not radius >= 0:
        raise ValidationError(f"radius must be nonnegative, got {radius}")
    pts = rng.random((n, 2))
    pairs = cKDTree(pts).query_pairs(radius, output_type="ndarray")
    if pairs.size == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return pairs[:, 0].astype(np.int64), pairs[:, 1].astype(np.int64)


def _nx_edges(graph):
    e = np.asarray(list(graph.edges()), dtype=np.int64).reshape(-1, 2)
    return e[:, 0], e[:, 1]


def generate_edges(kind, n, seed=0, **params):
    """Undirected edge arrays ``(src, dst)``, one entry per edge, for a generator ``kind``."""
    n = int(n)
    if n < 1:
        raise ValidationError("n must be at least 1")
    rng = np.random.default_rng(seed)
    if kind in ("erdos_renyi", "er"):
        return erdos_renyi_edges(n, float(params.get("p", 0.0)), rng)
    if kind in ("geometric", "rgg"):
        radius = params.get("radius")
        target = params.get("target_degree")
        if (radius is None) == (target is None):
            raise ValidationError("geometric needs exactly one of radius / target_degree")
        if radius is None:
            radius = geometric_radius(n, float(target))
        return geometric_edges(n, float(radius), rng)
    if kind in ("barabasi_albert", "ba"):
        m = int(params.get("m", 1))
        if not 1 <= m < n:
            raise ValidationError(f"barabasi_albert needs 1 <= m < n, got m={m}")
        return _nx_edges(nx.barabasi_albert_graph(n, m, seed=int(rng.integers(2**31))))
    if kind in ("watts_strogatz", "ws"):
        k = int(params.get("k", 2))
        p = float(params.get("p_rewire", params.get("p", 0.0)))
        if not 0 <= p <= 1:
            raise ValidationError("p_rewire must lie in [0, 1]")
        if not 0 <= k < n:
            raise ValidationError(f"watts_strogatz needs 0 <= k < n, got k={k}")
        return _nx_edges(nx.watts_strogatz_graph(n, k, p, seed=int(rng.integers(2**31))))
    if kind == "complete":
        i, j = np.triu_indices(n, k=1)
        return i.astype(np.int64), j.astype(np.int64)
    raise ValidationError(f"unknown generator {kind!r}; choose from {', '.join(KINDS)}")


def generate(kind, n, seed=0, **params):
    """Seeded undirected unit-weight layer. Same ``(kind, n, seed, params)`` gives the same layer."""
    src, dst = generate_edges(kind, n, seed, **params)
    return LayerGraph.from_edges(n, src, dst, directed=False)
