"""Randomized mixed workloads for the event queue, checked against a sorted-list reference."""
import numpy as np
from sortedcontainers import SortedList

from multispread import IndexedQueue


class ReferenceQueue:
    """Ordered map keyed by (time, node); the obviously-correct model of the queue contract."""

    def __init__(self):
        self.entries = SortedList()
        self.time = {}

    def __len__(self):
        return len(self.time)

    def push(self, node, t):
        assert node not in self.time
        self.time[node] = t
        self.entries.add((t, node))

    def update(self, node, t):
        self.entries.remove((self.time[node], node))
        self.push_unchecked(node, t)

    def push_unchecked(self, node, t):
        self.time[node] = t
        self.entries.add((t, node))

    def remove(self, node):
        self.entries.remove((self.time.pop(node), node))

    def pop_min(self):
        t, node = self.entries.pop(0)
        del self.time[node]
        return node, t


def run_workload(seed, n_ops=100_000, capacity=2_000):
    """Apply the same random operations to both queues; returns the number of mismatches.

    Times are drawn at or after the last popped time, and a quarter of them are
    snapped to a coarse grid so equal times (and the node-id tie-break) occur often.
    """
    rng = np.random.default_rng(seed)
    q, ref = IndexedQueue(capacity), ReferenceQueue()
    queued = np.zeros(capacity, dtype=bool)
    members = []  # queued nodes, for O(1) random choice
    where = np.full(capacity, -1)
    now = 0.0
    mismatches = 0
    kinds = rng.choice(4, size=n_ops, p=[0.35, 0.3, 0.1, 0.25])
    picks = rng.random(n_ops)
    gaps = rng.exponential(5.0, size=n_ops)
    snap = rng.random(n_ops) < 0.25

    def forget(node):
        k = where[node]
        last = members.pop()
        if last != node:
            members[k] = last
            where[last] = k
        where[node] = -1
        queued[node] = False

    for k in range(n_ops):
        op = kinds[k]
        t = now + gaps[k]
        if snap[k]:
            t = now + float(np.ceil(gaps[k]))
        if op == 0 or not members:
            free = np.flatnonzero(~queued)
            if free.size == 0:
                op = 3
            else:
                node = int(free[int(picks[k] * free.size)])
                q.push(node, t)
                ref.push(node, t)
                queued[node] = True
                where[node] = len(members)
                members.append(node)
                continue
        if op == 1:
            node = members[int(picks[k] * len(members))]
            q.update(node, t)
            ref.update(node, t)
        elif op == 2:
            node = members[int(picks[k] * len(members))]
            q.remove(node)
            ref.remove(node)
            forget(node)
        else:
            got, want = q.pop_min(), ref.pop_min()
            if got != want:
                mismatches += 1
            now = want[1]
            forget(want[0])
        if len(q) != len(ref):
            mismatches += 1
    # drain: the remaining order must agree too
    while len(ref):
        if q.pop_min() != ref.pop_min():
            mismatches += 1
    if len(q):
        mismatches += 1
    return mismatches
