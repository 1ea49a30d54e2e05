"""Weighted, directed multilayer contact networks.

Each layer keeps its arcs twice: row-compressed by source (who does node ``i``
influence?) and column-compressed by target (who influences node ``i``?).
Node ids are dense 0-based integers shared by all layers.
"""
from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import ParseError, ValidationError


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class LayerGraph:
    """One contact layer in dual CSR/CSC form.

    ``out_ptr/out_idx/out_w`` hold arcs grouped by source, ``in_ptr/in_idx/in_w``
    the same arcs grouped by target. Within a group neighbor ids are strictly
    increasing.
    """

    n_nodes: int
    out_ptr: np.ndarray
    out_idx: np.ndarray
    out_w: np.ndarray
    in_ptr: np.ndarray
    in_idx: np.ndarray
    in_w: np.ndarray
    _digest: list = field(default_factory=list, repr=False, compare=False)

    @classmethod
    def from_edges(cls, n_nodes, src, dst, weights=None, directed=True):
        """Build a layer from parallel arc arrays.

        Undirected input is symmetrically closed. Repeated arcs are merged by
        summing their weights.
        """
        n_nodes = int(n_nodes)
        if n_nodes < 0:
            raise ValidationError("node count must be nonnegative")
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise ValidationError("src and dst must have the same length")
        if weights is None:
            w = np.ones(src.shape[0], dtype=np.float64)
        else:
            w = np.asarray(weights, dtype=np.float64).ravel()
            if w.shape != src.shape:
                raise ValidationError("weights must match the number of arcs")
        if src.size:
            if src.min() < 0 or dst.min() < 0 or max(src.max(), dst.max()) >= n_nodes:
                raise ValidationError(f"node id out of range for {n_nodes} nodes")
            loops = np.flatnonzero(src == dst)
            if loops.size:
                raise ValidationError(f"self-loop on node {int(src[loops[0]])}")
            bad = np.flatnonzero(~np.isfinite(w) | (w <= 0))
            if bad.size:
                raise ValidationError(f"weight must be positive and finite, got {w[bad[0]]!r}")
        if not directed:
            src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
            w = np.concatenate([w, w])
        # coo -> csr sums duplicates and sorts column indices
        out = sp.csr_matrix((w, (src, dst)), shape=(n_nodes, n_nodes))
        out.sum_duplicates()
        out.sort_indices()
        return cls._from_csr(out)

    @classmethod
    def _from_csr(cls, out):
        inn = out.tocsc()
        inn.sort_indices()
        return cls(
            n_nodes=out.shape[0],
            out_ptr=_readonly(out.indptr.astype(np.int64)),
            out_idx=_readonly(out.indices.astype(np.int64)),
            out_w=_readonly(out.data.astype(np.float64)),
            in_ptr=_readonly(inn.indptr.astype(np.int64)),
            in_idx=_readonly(inn.indices.astype(np.int64)),
            in_w=_readonly(inn.data.astype(np.float64)),
        )

    @property
    def n_arcs(self):
        return int(self.out_idx.shape[0])

    def _check(self, node):
        if not 0 <= node < self.n_nodes:
            raise IndexError(f"node {node} out of range for {self.n_nodes} nodes")

    def out_neighbors(self, node):
        """Arcs ``node -> j`` as ``[(j, w), ...]`` sorted by ``j``."""
        self._check(node)
        lo, hi = self.out_ptr[node], self.out_ptr[node + 1]
        return list(zip(self.out_idx[lo:hi].tolist(), self.out_w[lo:hi].tolist()))

    def in_weights(self, node):
        """Arcs ``j -> node`` as ``[(j, w), ...]`` sorted by ``j``: the potential inducers of ``node``."""
        self._check(node)
        lo, hi = self.in_ptr[node], self.in_ptr[node + 1]
        return list(zip(self.in_idx[lo:hi].tolist(), self.in_w[lo:hi].tolist()))

    def out_degree(self):
        return np.diff(self.out_ptr)

    def in_degree(self):
        return np.diff(self.in_ptr)

    @property
    def max_degree(self):
        if self.n_nodes == 0:
            return 0
        return int(max(self.out_degree().max(), self.in_degree().max()))

    @property
    def mean_degree(self):
        return self.n_arcs / self.n_nodes if self.n_nodes else 0.0

    def to_csr(self):
        return sp.csr_matrix((self.out_w, self.out_idx, self.out_ptr), shape=(self.n_nodes,) * 2)

    def is_symmetric(self):
        a = self.to_csr()
        return (a != a.T).nnz == 0

    def with_weights(self, weights):
        """Same topology, new per-arc weights given in out (CSR) order."""
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != self.out_w.shape:
            raise ValidationError("one weight per arc required")
        if not np.all(np.isfinite(w) & (w > 0)):
            raise ValidationError("weights must be positive and finite")
        out = sp.csr_matrix((w, self.out_idx, self.out_ptr), shape=(self.n_nodes,) * 2)
        return LayerGraph._from_csr(out)

    def padded(self, n_nodes):
        """Copy with isolated nodes appended up to ``n_nodes``."""
        if n_nodes < self.n_nodes:
            raise ValidationError("cannot shrink a layer")
        if n_nodes == self.n_nodes:
            return self
        ptr = np.concatenate([self.out_ptr, np.full(n_nodes - self.n_nodes, self.out_ptr[-1])])
        out = sp.csr_matrix((self.out_w, self.out_idx, ptr), shape=(n_nodes, n_nodes))
        return LayerGraph._from_csr(out)

    def digest(self):
        if not self._digest:
            h = hashlib.sha256()
            h.update(str(self.n_nodes).encode())
            for a in (self.out_ptr, self.out_idx, self.out_w):
                h.update(a.tobytes())
            self._digest.append(h.hexdigest())
        return self._digest[0]


@dataclass(frozen=True, eq=False)
class MultilayerNetwork:
    """``L >= 1`` layers over one shared node set (multiplex reading: no inter-layer arcs)."""

    layers: tuple
    n_nodes: int = field(init=False)
    max_degree: int = field(init=False)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValidationError("a network needs at least one layer")
        n = layers[0].n_nodes
        for k, g in enumerate(layers):
            if not isinstance(g, LayerGraph):
                raise ValidationError(f"layer {k} is not a LayerGraph")
            if g.n_nodes != n:
                raise ValidationError(f"layer {k} has {g.n_nodes} nodes, expected {n}")
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "n_nodes", n)
        object.__setattr__(self, "max_degree", max(g.max_degree for g in layers))

    @classmethod
    def padded(cls, layers):
        """Build from layers of possibly different sizes, padding with isolated nodes."""
        n = max(g.n_nodes for g in layers)
        return cls(tuple(g.padded(n) for g in layers))

    @property
    def n_layers(self):
        return len(self.layers)

    @property
    def mean_degree(self):
        return float(np.mean([g.mean_degree for g in self.layers]))

    def __len__(self):
        return len(self.layers)

    def __getitem__(self, k):
        return self.layers[k]

    def digest(self):
        h = hashlib.sha256()
        for g in self.layers:
            h.update(g.digest().encode())
        return h.hexdigest()


_NODES_RE = re.compile(r"\bnodes=(\d+)")


def _parse_edge_lines(path, labels=None):
    src, dst, wts = [], [], []
    declared = None
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.decode("utf-8").strip()
            if not line:
                continue
            if line.startswith("#"):
                m = _NODES_RE.search(line)
                if m and declared is None:
                    declared = int(m.group(1))
                continue
            parts = line.split()
            if len(parts) not in (2, 3):
                raise ParseError(f"expected 'src dst [weight]', got {line!r}", path=path, line=lineno)
            try:
                if labels is None:
                    i, j = int(parts[0]), int(parts[1])
                else:
                    i = labels.setdefault(parts[0], len(labels))
                    j = labels.setdefault(parts[1], len(labels))
                w = float(parts[2]) if len(parts) == 3 else math.nan
            except ValueError:
                raise ParseError(f"bad number in {line!r}", path=path, line=lineno) from None
            if i < 0 or j < 0:
                raise ParseError(f"negative node id in {line!r}", path=path, line=lineno)
            if i == j:
                raise ValidationError(f"{path}: line {lineno}: self-loop on node {i}")
            if len(parts) == 3:
                if not (math.isfinite(w) and w > 0):
                    raise ValidationError(f"{path}: line {lineno}: weight must be positive and finite, got {parts[2]}")
            src.append(i)
            dst.append(j)
            wts.append(w)
    return src, dst, wts, declared


def load_edge_list(path, directed=False, default_weight=1.0, *, weighted=True, n_nodes=None):
    """Read a whitespace-separated ``src dst [weight]`` file into a layer.

    Lines starting with ``#`` are skipped. Missing weights (or all weights, when
    ``weighted`` is false) become ``default_weight``.
    """
    if not (math.isfinite(default_weight) and default_weight > 0):
        raise ValidationError("default_weight must be positive and finite")
    src, dst, wts, declared = _parse_edge_lines(Path(path))
    w = np.asarray(wts, dtype=np.float64)
    if not weighted:
        w[:] = default_weight
    else:
        w[np.isnan(w)] = default_weight
    n = max(max(src, default=-1), max(dst, default=-1)) + 1
    if declared is not None:
        n = max(n, declared)
    if n_nodes is not None:
        if n_nodes < n:
            raise ValidationError(f"{path}: node id {n - 1} exceeds n_nodes={n_nodes}")
        n = n_nodes
    return LayerGraph.from_edges(n, src, dst, w, directed=directed)


def load_labeled_edge_list(path, directed=False, default_weight=1.0, *, weighted=True):
    """Like :func:`load_edge_list` for string node labels.

    Returns ``(layer, labels)`` where ``labels[k]`` is the label of node ``k``
    (ids assigned in first-seen order).
    """
    mapping = {}
    src, dst, wts, _ = _parse_edge_lines(Path(path), labels=mapping)
    w = np.asarray(wts, dtype=np.float64)
    w[np.isnan(w) | (not weighted)] = default_weight
    labels = [None] * len(mapping)
    for name, k in mapping.items():
        labels[k] = name
    return LayerGraph.from_edges(len(labels), src, dst, w, directed=directed), labels


def write_edge_list(g, path, *, undirected=None, precision=17):
    """Write ``g`` in edge-list format to a path or an open text file.

    Symmetric layers are written one line per undirected edge (``i < j``).
    Weights are omitted when every weight equals 1.
    """
    if undirected is None:
        undirected = g.is_symmetric()
    coo = g.to_csr().tocoo()
    keep = coo.row < coo.col if undirected else np.ones(coo.nnz, dtype=bool)
    rows, cols, data = coo.row[keep], coo.col[keep], coo.data[keep]
    unit = bool(np.all(data == 1.0))
    if not hasattr(path, "write"):
        with open(path, "w", encoding="utf-8") as fh:
            _write_edges(fh, g.n_nodes, undirected, rows, cols, None if unit else data, precision)
        return
    _write_edges(path, g.n_nodes, undirected, rows, cols, None if unit else data, precision)


def _write_edges(fh, n, undirected, rows, cols, data, precision):
    fh.write(f"# nodes={n} {'undirected' if undirected else 'directed'}\n")
    if data is None:
        fh.writelines(f"{i} {j}\n" for i, j in zip(rows.tolist(), cols.tolist()))
    else:
        fh.writelines(f"{i} {j} {w:.{precision}g}\n" for i, j, w in zip(rows.tolist(), cols.tolist(), data.tolist()))
