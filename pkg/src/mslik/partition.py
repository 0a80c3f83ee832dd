"""Intervals, recursive partition trees, unbalanced Haar vectors and sum pyramids.

All intervals live in leaf-index units on a grid of ``n_leaves`` cells:
``Interval(start, end)`` covers cells ``start, ..., end - 1``.  A tree is a
binary split hierarchy rooted at ``[0, n_leaves)``; when every leaf is a unit
cell the tree is a complete recursive partition (C-RP).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import InvalidArgument, InvalidSplit, ResourceLimit

__all__ = [
    "Interval",
    "PartitionTree",
    "HaarVector",
    "SumPyramid",
    "dyadic_crp",
    "balanced_crp",
    "comb_crp",
    "crp_from_splits",
    "enumerate_crps",
    "random_crp",
    "haar_vector",
    "haar_coefficient",
    "sum_pyramid",
    "is_refinement",
    "is_power_of_two",
    "midpoint_nodes",
]

ENUMERATE_CAP = 10


def is_power_of_two(n: int) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (int(n) & (int(n) - 1)) == 0


@dataclass(frozen=True, order=True)
class Interval:
    """Half-open run of grid cells ``[start, end)``."""

    start: int
    end: int

    def __post_init__(self):
        if not (0 <= self.start < self.end):
            raise InvalidArgument(f"empty or negative interval [{self.start},{self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start

    def key(self) -> tuple[int, int]:
        return (self.start, self.end)

    def __repr__(self):
        return f"[{self.start},{self.end})"


def _as_key(interval) -> tuple[int, int]:
    if isinstance(interval, Interval):
        return interval.key()
    start, end = interval
    return (int(start), int(end))


def midpoint_nodes(start: int, end: int) -> list[tuple[int, int, int]]:
    """Internal nodes of the midpoint-split C-RP of ``[start, end)``, parents first."""
    nodes = []
    stack = [(start, end)]
    while stack:
        a, b = stack.pop()
        if b - a < 2:
            continue
        s = (a + b) // 2
        nodes.append((a, b, s))
        stack.append((s, b))
        stack.append((a, s))
    return nodes


class PartitionTree:
    """Immutable binary split hierarchy over ``[0, n_leaves)``.

    Internal nodes are kept as three integer arrays (start, end, split) in an
    order where every parent precedes its children.  Node identity is the
    ``(start, end)`` pair.

    Parameters
    ----------
    n_leaves : int
        Number of grid cells covered by the root.
    nodes : iterable of (start, end, split)
        Internal nodes, parents before children.
    """

    def __init__(self, n_leaves: int, nodes: Iterable[tuple[int, int, int]] = (), *, _validate=True):
        if n_leaves < 1:
            raise InvalidArgument("n_leaves must be >= 1")
        self.n_leaves = int(n_leaves)
        arr = np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes, dtype=np.int64)
        arr = arr.reshape(-1, 3)
        self._start = arr[:, 0].copy()
        self._end = arr[:, 1].copy()
        self._split = arr[:, 2].copy()
        for a in (self._start, self._end, self._split):
            a.setflags(write=False)
        self._flags = {}
        if _validate:
            self._check()

    @classmethod
    def _from_arrays(cls, n_leaves, start, end, split, **flags):
        tree = cls.__new__(cls)
        tree.n_leaves = int(n_leaves)
        tree._start, tree._end, tree._split = start, end, split
        for a in (start, end, split):
            a.setflags(write=False)
        tree._flags = dict(flags)
        return tree

    def _check(self):
        n = self.n_leaves
        table = {}
        for a, b, s in zip(self._start.tolist(), self._end.tolist(), self._split.tolist()):
            if not (0 <= a < s < b <= n):
                raise InvalidSplit(f"split {s} not interior to [{a},{b})")
            if (a, b) in table:
                raise InvalidSplit(f"interval [{a},{b}) split twice")
            table[(a, b)] = s
        if not table:
            return
        if (0, n) not in table:
            raise InvalidSplit("root interval is not split but other nodes are")
        seen = 0
        stack = [(0, n)]
        while stack:
            key = stack.pop()
            s = table.get(key)
            if s is None:
                continue
            seen += 1
            stack.append((key[0], s))
            stack.append((s, key[1]))
        if seen != len(table):
            raise InvalidSplit("some split intervals are not reachable from the root")

    # ------------------------------------------------------------------ access

    @property
    def root(self) -> Interval:
        return Interval(0, self.n_leaves)

    @property
    def n_internal(self) -> int:
        return int(self._start.size)

    def node_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Read-only (start, end, split) arrays of the internal nodes."""
        return self._start, self._end, self._split

    @cached_property
    def _table(self) -> dict[tuple[int, int], int]:
        return dict(zip(zip(self._start.tolist(), self._end.tolist()), self._split.tolist()))

    @cached_property
    def _triples(self) -> frozenset:
        return frozenset(zip(self._start.tolist(), self._end.tolist(), self._split.tolist()))

    def internal_nodes(self) -> list[tuple[Interval, int]]:
        """Internal nodes as ``(interval, split)``, parents before children."""
        return [
            (Interval(a, b), s)
            for a, b, s in zip(self._start.tolist(), self._end.tolist(), self._split.tolist())
        ]

    def iter_nodes(self) -> Iterator[tuple[int, int, int]]:
        return zip(self._start.tolist(), self._end.tolist(), self._split.tolist())

    def split_of(self, interval) -> int | None:
        return self._table.get(_as_key(interval))

    def children(self, interval) -> tuple[Interval, Interval] | None:
        a, b = _as_key(interval)
        s = self._table.get((a, b))
        if s is None:
            return None
        return Interval(a, s), Interval(s, b)

    def leaves(self) -> list[Interval]:
        """Leaf cells read left to right."""
        if self.n_internal == 0:
            return [self.root]
        bounds = np.union1d(self._split, [0, self.n_leaves])
        return [Interval(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]

    @property
    def is_complete(self) -> bool:
        return self.n_internal == self.n_leaves - 1

    @property
    def is_dyadic(self) -> bool:
        """True when ``n_leaves`` is a power of two and every split is at the midpoint."""
        flag = self._flags.get("dyadic")
        if flag is None:
            length = self._end - self._start
            flag = bool(
                is_power_of_two(self.n_leaves)
                and np.all(length % 2 == 0)
                and np.all(self._split == self._start + length // 2)
            )
            self._flags["dyadic"] = flag
        return flag

    @property
    def depth(self) -> int:
        if self.n_internal == 0:
            return 0
        depth = {(0, self.n_leaves): 1}
        best = 1
        for a, b, s in self.iter_nodes():
            d = depth[(a, b)]
            best = max(best, d)
            depth[(a, s)] = d + 1
            depth[(s, b)] = d + 1
        return best

    def prune(self, keep: Iterable) -> "PartitionTree":
        """Partial tree retaining only the internal nodes in ``keep``.

        ``keep`` must be upward closed (each kept node's parent is kept).
        """
        keys = {_as_key(k) for k in keep}
        nodes = [(a, b, s) for a, b, s in self.iter_nodes() if (a, b) in keys]
        if len(nodes) != len(keys):
            raise InvalidArgument("pruning set contains intervals that are not internal nodes")
        return PartitionTree(self.n_leaves, nodes)

    def all_prunings(self, cap: int = 100_000) -> list["PartitionTree"]:
        """Every upward-closed subset of this tree's internal nodes, as trees."""

        def rec(a, b):
            s = self._table.get((a, b))
            if s is None:
                return [[]]
            out = [[]]
            for left in rec(a, s):
                for right in rec(s, b):
                    out.append([(a, b, s)] + left + right)
                    if len(out) > cap:
                        raise ResourceLimit("too many prunings")
            return out

        return [PartitionTree(self.n_leaves, nodes, _validate=False) for nodes in rec(0, self.n_leaves)]

    # ------------------------------------------------------------ comparison

    def __eq__(self, other):
        if not isinstance(other, PartitionTree):
            return NotImplemented
        return self.n_leaves == other.n_leaves and self._triples == other._triples

    def __hash__(self):
        return hash((self.n_leaves, self._triples))

    def __repr__(self):
        return f"PartitionTree(n_leaves={self.n_leaves}, internal={self.n_internal})"

    # --------------------------------------------------------- serialization

    def to_dict(self) -> dict:
        """Nested ``{"start","end","split","left","right"}``; leaves omit ``split``."""

        def rec(a, b):
            s = self._table.get((a, b))
            if s is None:
                return {"start": a, "end": b}
            return {"start": a, "end": b, "split": s, "left": rec(a, s), "right": rec(s, b)}

        return rec(0, self.n_leaves)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_dict(cls, data: dict) -> "PartitionTree":
        if data.get("start") != 0:
            raise InvalidArgument("root must start at 0")
        n = int(data["end"])
        nodes = []
        stack = [data]
        while stack:
            node = stack.pop()
            if "split" not in node:
                continue
            a, b, s = int(node["start"]), int(node["end"]), int(node["split"])
            left, right = node["left"], node["right"]
            if (left["start"], left["end"], right["start"], right["end"]) != (a, s, s, b):
                raise InvalidSplit(f"children of [{a},{b}) do not tile it at {s}")
            nodes.append((a, b, s))
            stack.append(right)
            stack.append(left)
        return cls(n, nodes)

    @classmethod
    def from_json(cls, text: str) -> "PartitionTree":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------- builders


@lru_cache(maxsize=32)
def dyadic_crp(n_leaves: int) -> PartitionTree:
    """Complete recursive dyadic partition of ``n_leaves`` (a power of two) cells.

    Trees are immutable, so results are cached and shared between callers.

    Nodes are stored level by level, coarsest first: level ``j`` holds the
    ``2**j`` intervals of length ``n_leaves >> j``.
    """
    if not is_power_of_two(n_leaves):
        raise InvalidArgument(f"n_leaves={n_leaves} is not a positive power of two")
    n = int(n_leaves)
    levels = int(n).bit_length() - 1
    starts, ends, splits = [], [], []
    for j in range(levels):
        size = n >> j
        a = np.arange(1 << j, dtype=np.int64) * size
        starts.append(a)
        ends.append(a + size)
        splits.append(a + size // 2)
    if levels:
        start, end, split = (np.concatenate(v) for v in (starts, ends, splits))
    else:
        start = end = split = np.empty(0, dtype=np.int64)
    return PartitionTree._from_arrays(n, start, end, split, dyadic=True)


def balanced_crp(n_leaves: int) -> PartitionTree:
    """Midpoint-split C-RP for any ``n_leaves``; splits at ``(start + end) // 2``.

    Coincides with :func:`dyadic_crp` when ``n_leaves`` is a power of two.
    """
    if n_leaves < 1:
        raise InvalidArgument("n_leaves must be >= 1")
    return PartitionTree(n_leaves, midpoint_nodes(0, int(n_leaves)), _validate=False)


def comb_crp(n_leaves: int) -> PartitionTree:
    """C-RP that peels off the leftmost cell at every step."""
    if n_leaves < 1:
        raise InvalidArgument("n_leaves must be >= 1")
    return PartitionTree(n_leaves, [(k, n_leaves, k + 1) for k in range(n_leaves - 1)], _validate=False)


def crp_from_splits(n_leaves: int, splits: Sequence) -> PartitionTree:
    """Build a tree by applying ``(interval, split_point)`` refinements in order.

    Each refinement must target a current leaf of length >= 2 at an interior
    point.  Supplying ``n_leaves - 1`` splits yields a C-RP.
    """
    if n_leaves < 1:
        raise InvalidArgument("n_leaves must be >= 1")
    leaves = {(0, int(n_leaves))}
    nodes = []
    for interval, s in splits:
        a, b = _as_key(interval)
        s = int(s)
        if (a, b) not in leaves:
            raise InvalidSplit(f"[{a},{b}) is not a current leaf")
        if not a < s < b:
            raise InvalidSplit(f"split {s} not interior to [{a},{b})")
        leaves.remove((a, b))
        leaves.update({(a, s), (s, b)})
        nodes.append((a, b, s))
    return PartitionTree(n_leaves, nodes, _validate=False)


def enumerate_crps(n_leaves: int) -> list[PartitionTree]:
    """Every distinct C-RP of ``n_leaves`` cells (Catalan(n_leaves - 1) of them)."""
    if n_leaves < 1:
        raise InvalidArgument("n_leaves must be >= 1")
    if n_leaves > ENUMERATE_CAP:
        raise ResourceLimit(f"enumerate_crps is capped at n_leaves={ENUMERATE_CAP}")
    memo: dict[tuple[int, int], list[list[tuple[int, int, int]]]] = {}

    def rec(a, b):
        if b - a == 1:
            return [[]]
        if (a, b) in memo:
            return memo[(a, b)]
        out = []
        for s in range(a + 1, b):
            for left in rec(a, s):
                for right in rec(s, b):
                    out.append([(a, b, s)] + left + right)
        memo[(a, b)] = out
        return out

    return [PartitionTree(n_leaves, nodes, _validate=False) for nodes in rec(0, n_leaves)]


def random_crp(n_leaves: int, rng) -> PartitionTree:
    """C-RP with every split point drawn uniformly from its interval's interior."""
    if n_leaves < 1:
        raise InvalidArgument("n_leaves must be >= 1")
    nodes = []
    stack = [(0, int(n_leaves))]
    while stack:
        a, b = stack.pop()
        if b - a < 2:
            continue
        s = int(rng.integers(a + 1, b))
        nodes.append((a, b, s))
        stack.extend([(s, b), (a, s)])
    return PartitionTree(n_leaves, nodes, _validate=False)


# -------------------------------------------------------------------- Haar


@dataclass(frozen=True)
class HaarVector:
    """Unbalanced Haar function attached to the split of ``parent`` at ``split``.

    Takes ``left_value`` on ``[parent.start, split)``, ``right_value`` on
    ``[split, parent.end)`` and zero elsewhere.
    """

    parent: Interval
    split: int

    @property
    def n_left(self) -> int:
        return self.split - self.parent.start

    @property
    def n_right(self) -> int:
        return self.parent.end - self.split

    @property
    def c_prime(self) -> float:
        return (1.0 / self.n_left + 1.0 / self.n_right) ** -0.5

    @property
    def left_value(self) -> float:
        return -self.c_prime / self.n_left

    @property
    def right_value(self) -> float:
        return self.c_prime / self.n_right

    def as_array(self, n_leaves: int) -> np.ndarray:
        if self.parent.end > n_leaves:
            raise InvalidArgument("grid too short for this Haar vector")
        h = np.zeros(n_leaves)
        h[self.parent.start : self.split] = self.left_value
        h[self.split : self.parent.end] = self.right_value
        return h


def haar_vector(parent, split: int) -> HaarVector:
    parent = parent if isinstance(parent, Interval) else Interval(*parent)
    if not parent.start < split < parent.end:
        raise InvalidSplit(f"split {split} leaves an empty child of {parent!r}")
    return HaarVector(parent, int(split))


def haar_coefficient(x, h: HaarVector) -> float:
    """Inner product ``sum_i x_i h(i)``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or h.parent.end > x.size:
        raise InvalidArgument(f"vector of length {x.size} does not cover {h.parent!r}")
    left = x[h.parent.start : h.split].sum()
    right = x[h.split : h.parent.end].sum()
    return float(h.c_prime * (right / h.n_right - left / h.n_left))


# ----------------------------------------------------------------- pyramid


class SumPyramid:
    """Interval sums ``X_I`` over every interval of a tree.

    Internal sums are formed bottom-up as left + right, so additivity is exact
    in the input's arithmetic.
    """

    def __init__(self, sums: dict[tuple[int, int], float]):
        self._sums = sums

    def __getitem__(self, interval):
        return self._sums[_as_key(interval)]

    def __contains__(self, interval):
        return _as_key(interval) in self._sums

    def __len__(self):
        return len(self._sums)

    def items(self):
        return self._sums.items()


def sum_pyramid(x, tree: PartitionTree) -> SumPyramid:
    x = np.asarray(x)
    if x.ndim != 1 or x.size != tree.n_leaves:
        raise InvalidArgument(f"vector of length {x.size} does not match tree of {tree.n_leaves} leaves")
    sums: dict[tuple[int, int], float] = {}
    for leaf in tree.leaves():
        sums[leaf.key()] = x[leaf.start : leaf.end].sum().item()
    start, end, split = tree.node_arrays()
    for a, b, s in zip(start[::-1].tolist(), end[::-1].tolist(), split[::-1].tolist()):
        sums[(a, b)] = sums[(a, s)] + sums[(s, b)]
    return SumPyramid(sums)


def is_refinement(p1: PartitionTree, p2: PartitionTree) -> bool:
    """``p1`` is refined by ``p2``: every split made in ``p1`` is also made in ``p2``."""
    if p1.n_leaves != p2.n_leaves:
        raise InvalidArgument("trees have different roots")
    return p1._triples <= p2._triples


def catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)
