"""Event logs, state-count time series and ensemble averages."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import AggregationError, ConsistencyError, MultispreadError, ParseError


class RangeError(MultispreadError, ValueError):
    """Grid point outside the time span a log describes."""


class EventRecord(NamedTuple):
    time: float
    node: int
    from_state: int
    to_state: int


STOP_REASONS = ("absorption", "max_time", "max_events", "state_count")
LOG_MAGIC = "# multispread event log v1"
COLUMNS = "time,node,from,to"


@dataclass(eq=False)
class EventLog:
    """Ordered node transitions of one run plus what is needed to replay them."""

    state_names: tuple
    initial_states: np.ndarray
    times: np.ndarray
    nodes: np.ndarray
    from_states: np.ndarray
    to_states: np.ndarray
    final_time: float
    stop_reason: str
    seed: int | None = None
    run: int = 0
    model_digest: str = ""
    engine: str = "fast"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.state_names = tuple(self.state_names)
        self.initial_states = np.asarray(self.initial_states, dtype=np.int64)
        self.times = np.asarray(self.times, dtype=np.float64)
        self.nodes = np.asarray(self.nodes, dtype=np.int64)
        self.from_states = np.asarray(self.from_states, dtype=np.int64)
        self.to_states = np.asarray(self.to_states, dtype=np.int64)

    @classmethod
    def empty(cls, state_names, initial_states, final_time=0.0, stop_reason="absorption", **kw):
        z = np.empty(0)
        return cls(state_names, initial_states, z, z, z, z, final_time, stop_reason, **kw)

    @property
    def n_nodes(self):
        return int(self.initial_states.shape[0])

    @property
    def n_states(self):
        return len(self.state_names)

    def __len__(self):
        return int(self.times.shape[0])

    def __iter__(self):
        for rec in zip(self.times.tolist(), self.nodes.tolist(), self.from_states.tolist(), self.to_states.tolist()):
            yield EventRecord(*rec)

    def __getitem__(self, k):
        return EventRecord(float(self.times[k]), int(self.nodes[k]), int(self.from_states[k]), int(self.to_states[k]))

    def initial_counts(self):
        return np.bincount(self.initial_states, minlength=self.n_states)

    def replay(self):
        """Final per-node states; raises ``ConsistencyError`` if a record's from-state disagrees."""
        x = self.initial_states.copy()
        if len(self) and np.any(np.diff(self.times) < 0):
            raise ConsistencyError("event times are not sorted")
        for k, (node, a, b) in enumerate(zip(self.nodes.tolist(), self.from_states.tolist(), self.to_states.tolist())):
            if x[node] != a:
                raise ConsistencyError(f"record {k}: node {node} is in state {x[node]}, log says {a}")
            if a == b:
                raise ConsistencyError(f"record {k}: from-state equals to-state")
            x[node] = b
        return x

    final_states = replay

    def final_counts(self):
        counts = self.initial_counts().copy()
        np.subtract.at(counts, self.from_states, 1)
        np.add.at(counts, self.to_states, 1)
        return counts

    def ever_left(self, state=0):
        """Number of distinct nodes that left ``state`` at least once."""
        return int(np.unique(self.nodes[self.from_states == state]).size)

    def digest(self):
        h = hashlib.sha256()
        h.update(json.dumps([list(self.state_names), self.final_time, self.stop_reason]).encode())
        for a in (self.initial_states, self.times, self.nodes, self.from_states, self.to_states):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


@dataclass(eq=False)
class TimeSeries:
    """Per-state values on a time grid: counts for a single run, mean fractions for ensembles."""

    grid: np.ndarray
    values: np.ndarray  # (K, M)
    state_names: tuple
    n_nodes: int
    std: np.ndarray | None = None
    runs: int = 1

    @property
    def fractions(self):
        if np.issubdtype(self.values.dtype, np.integer):
            return self.values / self.n_nodes
        return self.values

    def to_csv(self, path):
        cols = ["t", *self.state_names]
        blocks = [self.grid[:, None], self.values]
        if self.std is not None:
            cols += [f"{s}_std" for s in self.state_names]
            blocks.append(self.std)
        data = np.hstack([np.asarray(b, dtype=np.float64) for b in blocks])
        integer = np.issubdtype(self.values.dtype, np.integer)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# n_nodes={self.n_nodes} runs={self.runs}\n")
            fh.write(",".join(cols) + "\n")
            for row, vals in zip(data, self.values):
                head = f"{row[0]:.17g}"
                body = [str(int(v)) for v in vals] if integer else [f"{v:.17g}" for v in row[1:1 + len(vals)]]
                tail = [f"{v:.17g}" for v in row[1 + len(vals):]]
                fh.write(",".join([head, *body, *tail]) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path, encoding="utf-8") as fh:
            meta = dict(kv.split("=") for kv in fh.readline().lstrip("#").split())
            cols = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)
        names = [c for c in cols[1:] if not c.endswith("_std")]
        m = len(names)
        values = data[:, 1:1 + m]
        std = data[:, 1 + m:] if len(cols) > 1 + m else None
        if int(meta.get("runs", 1)) == 1 and std is None:
            values = values.astype(np.int64)
        return cls(data[:, 0], values, tuple(names), int(meta["n_nodes"]), std, int(meta.get("runs", 1)))


def counts_on_grid(log, grid):
    """Compartment counts right after all events with time <= t, for each grid time t."""
    grid = np.asarray(grid, dtype=np.float64).ravel()
    if grid.size and (np.any(np.diff(grid) < 0) or grid[0] < 0):
        raise RangeError("grid must be non-decreasing and start at or after 0")
    if grid.size and grid[-1] > log.final_time and log.stop_reason != "absorption":
        raise RangeError(
            f"grid reaches t={grid[-1]:g} beyond the end of the log (t={log.final_time:g}, stopped by {log.stop_reason})"
        )
    k = np.searchsorted(log.times, grid, side="right")
    values = np.empty((grid.size, log.n_states), dtype=np.int64)
    init = log.initial_counts()
    for s in range(log.n_states):
        delta = (log.to_states == s).astype(np.int64) - (log.from_states == s)
        cum = np.concatenate([[0], np.cumsum(delta)])
        values[:, s] = init[s] + cum[k]
    return TimeSeries(grid, values, log.state_names, log.n_nodes)


def ensemble_mean(series):
    """Element-wise mean (and sample std) of population fractions across runs."""
    series = list(series)
    if not series:
        raise AggregationError("no runs to average")
    ref = series[0]
    for s in series[1:]:
        if s.values.shape != ref.values.shape or not np.array_equal(s.grid, ref.grid):
            raise AggregationError("runs use different grids or state counts")
        if s.n_nodes != ref.n_nodes or tuple(s.state_names) != tuple(ref.state_names):
            raise AggregationError("runs describe different populations")
    stack = np.stack([s.fractions for s in series])
    mean = stack.mean(axis=0)
    std = stack.std(axis=0, ddof=1) if len(series) > 1 else np.zeros_like(mean)
    return TimeSeries(ref.grid.copy(), mean, ref.state_names, ref.n_nodes, std, sum(s.runs for s in series))


# -- log files -------------------------------------------------------------------

def write_log(log, path):
    n = len(log)
    header = [
        LOG_MAGIC,
        f"# n_nodes={log.n_nodes}",
        f"# states={json.dumps(list(log.state_names))}",
        f"# seed={log.seed if log.seed is not None else ''}",
        f"# run={log.run}",
        f"# engine={log.engine}",
        f"# model_digest={log.model_digest}",
        f"# stop={log.stop_reason}",
        f"# final_time={log.final_time:.17g}",
        f"# events={n}",
        f"# initial={','.join(map(str, log.initial_states.tolist()))}",
        COLUMNS,
    ]
    rows = [
        f"{t:.17g},{v},{a},{b}"
        for t, v, a, b in zip(log.times.tolist(), log.nodes.tolist(), log.from_states.tolist(), log.to_states.tolist())
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(header) + "\n")
        if rows:
            fh.write("\n".join(rows) + "\n")
        fh.write(f"# end events={n}\n")


_REQUIRED = ("n_nodes", "states", "seed", "run", "engine", "model_digest", "stop", "final_time", "events", "initial")


def read_log(path):
    path = Path(path)
    data = path.read_bytes()
    offset = 0
    lines = data.split(b"\n")
    if data.endswith(b"\n"):
        lines = lines[:-1]
    else:
        raise ParseError("file does not end with a newline (truncated?)", path=path, offset=len(data))
    header = {}
    k = 0

    def fail(msg):
        raise ParseError(msg, path=path, line=k + 1, offset=offset)

    if not lines or lines[0].decode().rstrip("\r") != LOG_MAGIC:
        fail("not an event log (bad magic line)")
    for k, raw in enumerate(lines):
        line = raw.decode("utf-8").rstrip("\r")
        if k == 0:
            offset += len(raw) + 1
            continue
        if line == COLUMNS:
            offset += len(raw) + 1
            break
        if not line.startswith("# ") or "=" not in line:
            fail(f"bad header line {line!r}")
        key, _, value = line[2:].partition("=")
        header[key] = value
        offset += len(raw) + 1
    else:
        fail("missing column line")
    missing = [key for key in _REQUIRED if key not in header]
    if missing:
        fail(f"header lacks {', '.join(missing)}")
    try:
        n_events = int(header["events"])
        n_nodes = int(header["n_nodes"])
        states = json.loads(header["states"])
        initial = np.array([int(v) for v in header["initial"].split(",")] if n_nodes else [], dtype=np.int64)
        final_time = float(header["final_time"])
    except ValueError as exc:
        fail(f"bad header value: {exc}")
    if initial.shape[0] != n_nodes:
        fail("initial state vector length differs from n_nodes")
    body = lines[k + 1:]
    if len(body) != n_events + 1:
        offset_end = len(data)
        raise ParseError(
            f"expected {n_events} records and an end marker, found {len(body)} lines", path=path, offset=offset_end
        )
    times = np.empty(n_events)
    nodes = np.empty(n_events, dtype=np.int64)
    src = np.empty(n_events, dtype=np.int64)
    dst = np.empty(n_events, dtype=np.int64)
    for r in range(n_events):
        raw = body[r]
        k += 1
        parts = raw.decode("utf-8").rstrip("\r").split(",")
        try:
            if len(parts) != 4:
                raise ValueError("expected 4 fields")
            times[r] = float(parts[0])
            nodes[r], src[r], dst[r] = int(parts[1]), int(parts[2]), int(parts[3])
        except ValueError as exc:
            fail(f"bad record: {exc}")
        offset += len(raw) + 1
    k += 1
    if body[-1].decode().rstrip("\r") != f"# end events={n_events}":
        fail("missing or inconsistent end marker (truncated?)")
    return EventLog(
        states, initial, times, nodes, src, dst, final_time, header["stop"],
        seed=int(header["seed"]) if header["seed"] else None, run=int(header["run"]),
        model_digest=header["model_digest"], engine=header["engine"],
    )
