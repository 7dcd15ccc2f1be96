"""Randomize a structured stream through a fixed-size buffer.

The buffer holds ``B`` pending items; each output is drawn uniformly from
it and its slot is refilled by the next input.  Once the input runs out
the remaining items are drained in uniformly random order, so the output
is always a permutation of the input.
"""
from __future__ import annotations

import numpy as np

from ._validation import check_positive_int


class ScrambleBuffer:
    """Fixed-capacity scrambling buffer.

    Call :meth:`fill` with the first ``capacity`` items, then :meth:`next`
    once per further input item, and ``next()`` with no argument to drain.
    """

    def __init__(self, capacity, seed=None):
        self.capacity = check_positive_int(capacity, "capacity")
        self.rng = np.random.default_rng(seed)
        self.slots = []

    def __len__(self):
        return len(self.slots)

    def fill(self, items):
        """Load initial items; returns how many were taken."""
        taken = 0
        for item in items:
            if len(self.slots) >= self.capacity:
                break
            self.slots.append(item)
            taken += 1
        return taken

    _EMPTY = object()

    def next(self, incoming=_EMPTY):
        """Draw one item; refill its slot with ``incoming`` when given.

        Returns ``None`` once the buffer is drained and no input is left.
        """
        if not self.slots:
            if incoming is self._EMPTY:
                return None
            self.slots.append(incoming)
            incoming = self._EMPTY
        j = int(self.rng.integers(len(self.slots)))
        out = self.slots[j]
        if incoming is self._EMPTY:
            # swap-remove keeps draining O(1)
            last = self.slots.pop()
            if j < len(self.slots):
                self.slots[j] = last
        else:
            self.slots[j] = incoming
        return out


def scramble(stream, capacity, seed=None):
    """Generator yielding the scrambled version of ``stream``."""
    buf = ScrambleBuffer(capacity, seed)
    it = iter(stream)
    for item in it:
        buf.slots.append(item)
        if len(buf.slots) == capacity:
            break
    for item in it:
        yield buf.next(item)
    while len(buf):
        yield buf.next()


def selection_probability(k, i, capacity):
    """Probability that the ``k``-th output is the ``i``-th input (1-based)."""
    B = capacity
    if k < 1 or i < 1:
        raise ValueError("k and i are 1-based")
    if i <= B:
        return (1.0 / B) * (1.0 - 1.0 / B) ** (k - 1)
    if i <= B + k - 1:
        return (1.0 / B) * (1.0 - 1.0 / B) ** (k - 1 + B - i)
    return 0.0
