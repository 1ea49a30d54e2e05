"""Indexed priority queue of absolute event times, one entry per node.

Entries are ordered by ``(time, node)``, so ties go to the smaller node id.
``push``, ``update``, ``remove`` and ``pop_min`` are O(log n); ``peek_min`` is O(1).
"""
import math

import numpy as np

from . import _kernels as K
from .errors import EmptyQueueError, QueueContractError


class IndexedQueue:
    """Binary min-heap over node ids ``0 .. capacity-1`` with a position index.

    Times must be finite and never earlier than the last popped time, which
    keeps event times monotone within a run.

    >>> q = IndexedQueue(10)
    >>> q.push(2, 5.0); q.push(7, 1.0)
    >>> q.pop_min()
    (7, 1.0)
    """

    def __init__(self, capacity):
        capacity = int(capacity)
        self._node = np.zeros(capacity, dtype=np.int64)
        self._time = np.zeros(capacity, dtype=np.float64)
        self._pos = np.full(capacity, -1, dtype=np.int64)
        self._meta = np.zeros(1, dtype=np.int64)
        self.last_popped = -math.inf

    @classmethod
    def from_items(cls, capacity, nodes, times):
        """Bulk-build in O(n) from distinct ``nodes`` and their ``times``."""
        q = cls(capacity)
        nodes = np.asarray(nodes, dtype=np.int64)
        times = np.asarray(times, dtype=np.float64)
        if nodes.shape != times.shape:
            raise QueueContractError("nodes and times differ in length")
        if nodes.size:
            if nodes.min() < 0 or nodes.max() >= capacity:
                raise IndexError("node id out of range")
            if np.unique(nodes).size != nodes.size:
                raise QueueContractError("duplicate node in bulk load")
            if not np.all(np.isfinite(times)):
                raise QueueContractError("non-finite time")
        K.heap_build(q._node, q._time, q._pos, q._meta, nodes, times)
        return q

    @property
    def capacity(self):
        return self._pos.shape[0]

    def __len__(self):
        return int(self._meta[0])

    def __bool__(self):
        return bool(self._meta[0] > 0)

    def __contains__(self, node):
        return 0 <= node < self.capacity and bool(self._pos[node] >= 0)

    def _check_node(self, node):
        if not 0 <= node < self.capacity:
            raise IndexError(f"node {node} out of range for capacity {self.capacity}")

    def _check_time(self, time):
        if not math.isfinite(time):
            raise QueueContractError(f"time must be finite, got {time!r}")
        if time < self.last_popped:
            raise QueueContractError(f"time {time!r} precedes the last popped time {self.last_popped!r}")

    def push(self, node, time):
        self._check_node(node)
        if self._pos[node] >= 0:
            raise QueueContractError(f"node {node} already queued")
        self._check_time(time)
        K.heap_push(self._node, self._time, self._pos, self._meta, node, float(time))

    def update(self, node, time):
        self._check_node(node)
        if self._pos[node] < 0:
            raise QueueContractError(f"node {node} is not queued")
        self._check_time(time)
        K.heap_update(self._node, self._time, self._pos, self._meta, node, float(time))

    def remove(self, node):
        self._check_node(node)
        if self._pos[node] < 0:
            raise QueueContractError(f"node {node} is not queued")
        K.heap_remove(self._node, self._time, self._pos, self._meta, node)

    def pop_min(self):
        if self._meta[0] == 0:
            raise EmptyQueueError("pop from an empty queue")
        node, time = K.heap_pop(self._node, self._time, self._pos, self._meta)
        self.last_popped = time
        return int(node), float(time)

    def peek_min(self):
        if self._meta[0] == 0:
            raise EmptyQueueError("peek into an empty queue")
        return int(self._node[0]), float(self._time[0])

    def time_of(self, node):
        self._check_node(node)
        i = self._pos[node]
        if i < 0:
            raise QueueContractError(f"node {node} is not queued")
        return float(self._time[i])

    def items(self):
        """All entries as ``(node, time)`` in pop order (does not modify the queue)."""
        n = len(self)
        order = np.lexsort((self._node[:n], self._time[:n]))
        return list(zip(self._node[:n][order].tolist(), self._time[:n][order].tolist()))

    def check(self):
        """Raise if the heap order or the position index is inconsistent."""
        bad = K.heap_check(self._node, self._time, self._pos, self._meta)
        if bad >= 0:
            raise QueueContractError(f"heap invariant broken at slot {bad}")
