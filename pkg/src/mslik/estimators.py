"""Complexity-penalized maximum-likelihood estimators.

Each estimator minimizes ``-log p(x | theta') + 2 * lam * k(theta')`` where
``lam = gamma * ln(N)`` and ``k`` counts the nontrivial multiscale
parameters of ``theta'``.  The three families differ in where ``theta'`` may
range:

* ``threshold``: any keep/kill pattern over the splits of the dyadic C-RP.
* ``rdp``: prunings of the dyadic C-RP (kept splits are hereditary).
* ``rp``: prunings of any C-RP, i.e. any segmentation of the grid.

Oracles used by the test suite (exhaustive enumeration, a change-point DP,
and the quantized estimator over a finite grid of candidate vectors) live
here too.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import InvalidArgument, InvalidConfig, ResourceLimit
from .models import (
    Gaussian,
    ModelSpec,
    Multinomial,
    MultiscaleParams,
    Poisson,
    decompose,
    loglik_direct,
    reconstruct,
)
from .partition import Interval, PartitionTree, dyadic_crp, is_power_of_two, midpoint_nodes

__all__ = [
    "PenaltyConfig",
    "EstimateResult",
    "CostTable",
    "QuantizationGrid",
    "objective",
    "estimate",
    "estimate_threshold",
    "estimate_rdp",
    "estimate_rp",
    "segmentation_dp",
    "brute_force_oracle",
    "quantized_penalized_mle",
    "quantized_candidates",
    "count_runs",
    "ESTIMATORS",
]

NONTRIVIAL_TOL = 1e-12
THEORY_GAMMA = 1.5
BRUTE_CAPS = {"T": 8, "RP": 8, "RDP": 16}
QUANTIZED_CAP = 6


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty ``lam = gamma * ln(n_leaves)`` (natural log)."""

    gamma: float
    n_leaves: int

    def __post_init__(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise InvalidArgument("gamma must be finite and >= 0")
        if self.n_leaves < 1:
            raise InvalidArgument("n_leaves must be >= 1")

    @property
    def lam(self) -> float:
        return self.gamma * math.log(self.n_leaves)

    @property
    def theory_ok(self) -> bool:
        """Whether ``gamma >= 3/2`` and ``n_leaves >= 3`` (the risk bounds' regime)."""
        return self.gamma >= THEORY_GAMMA and self.n_leaves >= 3


def _penalty(pen, n: int) -> PenaltyConfig:
    if isinstance(pen, PenaltyConfig):
        if pen.n_leaves != n:
            raise InvalidArgument(f"penalty built for n={pen.n_leaves}, data has n={n}")
        return pen
    return PenaltyConfig(float(pen), n)


@dataclass
class CostTable:
    """Per-split costs, one row per internal node of the tree used."""

    start: np.ndarray
    end: np.ndarray
    split: np.ndarray
    kill_cost: np.ndarray
    keep_data_cost: np.ndarray
    omega_hat: np.ndarray
    kept: np.ndarray

    def __len__(self):
        return int(self.start.size)

    def rows(self):
        for i in range(len(self)):
            yield {
                "start": int(self.start[i]),
                "end": int(self.end[i]),
                "split": int(self.split[i]),
                "kill_cost": float(self.kill_cost[i]),
                "keep_data_cost": float(self.keep_data_cost[i]),
                "omega_hat": float(self.omega_hat[i]),
                "kept": bool(self.kept[i]),
            }


@dataclass
class EstimateResult:
    """Fitted vector plus the selected structure and its penalized objective (nats)."""

    model: ModelSpec
    gamma: float
    lam: float
    theta_hat: np.ndarray
    kept: list
    partition: list
    objective: float
    family: str
    tree: PartitionTree | None = None
    cost_source: object = field(default=None, repr=False)

    @property
    def costs(self) -> CostTable | None:
        """Per-split cost table (built on first access)."""
        if callable(self.cost_source):
            self.cost_source = self.cost_source()
        return self.cost_source

    @property
    def n_kept(self) -> int:
        return len(self.kept)

    def to_dict(self) -> dict:
        model = {"name": self.model.name}
        if isinstance(self.model, Gaussian):
            model["sigma"] = self.model.sigma
        if isinstance(self.model, Multinomial):
            model["n_total"] = self.model.n_total
        return {
            "model": self.model.name,
            "model_params": model,
            "estimator": self.family,
            "gamma": self.gamma,
            "lambda": self.lam,
            "objective_nats": self.objective,
            "kept": [
                {"start": iv.start, "end": iv.end, "split": s, "omega": w} for iv, s, w in self.kept
            ],
            "partition": [
                {"start": iv.start, "end": iv.end, "value": float(self.theta_hat[iv.start])}
                for iv in self.partition
            ],
            "theta_hat": [float(v) for v in self.theta_hat],
        }


def _check_x(x, model):
    x = model.check_x(x)
    if x.size < 1:
        raise InvalidArgument("need at least one observation")
    return x


def objective(x, theta_prime, tree: PartitionTree, model: ModelSpec, pen) -> float:
    """Penalized objective of a candidate vector, counting its nontrivial omegas on ``tree``."""
    x = _check_x(x, model)
    pen = _penalty(pen, x.size)
    ms = decompose(theta_prime, tree, model)
    start, end, split = tree.node_arrays()
    trivial = model.trivial_omega((split - start).astype(float), (end - split).astype(float))
    omega = np.array([ms.omega[node] for node in tree.iter_nodes()], dtype=float)
    k = int(np.sum(np.abs(omega - trivial) > NONTRIVIAL_TOL))
    return -loglik_direct(x, theta_prime, model) + 2.0 * pen.lam * k


# --------------------------------------------------------- dyadic machinery


def _dyadic_tree(x, tree):
    n = x.size
    if not is_power_of_two(n):
        raise InvalidArgument(f"dyadic estimators need a power-of-two length, got {n}; pad the data explicitly")
    if tree is None:
        return dyadic_crp(n)
    if tree.n_leaves != n or not tree.is_complete or not tree.is_dyadic:
        raise InvalidArgument("tree must be the complete dyadic partition of the data grid")
    return tree


BLOCK_LEAVES = 1 << 15  # bottom levels are swept per block so the working set stays in cache


def _sweep(x, model, n, two_lam, out, offset):
    """Bottom-up pass over one complete dyadic subtree with leaf values ``x``.

    Writes split costs (and pruning choices when ``two_lam`` is given) for
    every subtree level into ``out`` at block ``offset``.  Returns the
    subtree's total and, when pruning, its all-trivial and optimal values.
    """
    depth = x.size.bit_length() - 1
    top = len(out) - depth  # global level of this subtree's root
    sums = [x]
    for _ in range(depth):
        prev = sums[-1]
        sums.append(prev[0::2] + prev[1::2])
    sums.reverse()
    null = opt = np.zeros(x.size)
    for j in range(depth - 1, -1, -1):
        half = float(n >> (top + j + 1))
        kill, keep, omega_hat = model.split_costs(sums[j], sums[j + 1][0::2], half, half)
        sl = slice(offset << j, (offset + 1) << j)
        row = out[top + j]
        row[0][sl], row[1][sl], row[2][sl] = kill, keep, omega_hat
        if two_lam is not None:
            null = kill + null[0::2] + null[1::2]
            split_val = keep + two_lam + opt[0::2] + opt[1::2]
            choose = split_val < null
            row[3][sl] = choose
            opt = np.where(choose, split_val, null)
    return sums[0], null, opt


def _dyadic_levels(x, model, two_lam=None):
    """Per-level split costs on the dyadic tree, coarsest level first.

    Each level is ``(kill, keep, omega_hat, choose)``; ``choose`` holds the
    bottom-up pruning decisions when ``two_lam`` is given.  Returns the
    levels and the optimal pruned value below the root.
    """
    n = x.size
    depth = n.bit_length() - 1
    out = [(np.empty(1 << j), np.empty(1 << j), np.empty(1 << j), np.zeros(1 << j, dtype=bool)) for j in range(depth)]
    block = min(n, BLOCK_LEAVES)
    n_blocks = n // block
    roots = [_sweep(x[b * block : (b + 1) * block], model, n, two_lam, out[: depth - 0], b) for b in range(n_blocks)]
    if n_blocks == 1:
        return out, float(roots[0][2][0]) if depth else 0.0
    # the coarse levels above the blocks, again bottom-up
    sums = np.concatenate([r[0] for r in roots])
    null = np.concatenate([r[1] for r in roots])
    opt = np.concatenate([r[2] for r in roots])
    tail = sums.size.bit_length() - 1
    coarse = [sums]
    for _ in range(tail):
        prev = coarse[-1]
        coarse.append(prev[0::2] + prev[1::2])
    coarse.reverse()
    for j in range(tail - 1, -1, -1):
        half = float(n >> (j + 1))
        kill, keep, omega_hat = model.split_costs(coarse[j], coarse[j + 1][0::2], half, half)
        row = out[j]
        row[0][:], row[1][:], row[2][:] = kill, keep, omega_hat
        if two_lam is not None:
            null = kill + null[0::2] + null[1::2]
            split_val = keep + two_lam + opt[0::2] + opt[1::2]
            row[3][:] = split_val < null
            opt = np.where(row[3], split_val, null)
    return out, float(opt[0])


def _dyadic_fit(model, total, levels, active, n):
    """Top-down reconstruction with fitted omegas on ``active`` nodes and trivial ones elsewhere."""
    sums = np.array([model.root_fit(total)])
    deepest = max((j for j, act in enumerate(active) if act.any()), default=-1)
    for j, ((_, _, omega_hat, _), act) in enumerate(zip(levels[: deepest + 1], active)):
        half = float(n >> (j + 1))
        omega = np.where(act, omega_hat, model.trivial_omega(half, half))
        left = model.left_sum(sums, omega, half, half)
        nxt = np.empty(2 * sums.size)
        nxt[0::2] = left
        nxt[1::2] = sums - left
        sums = nxt
    # below the deepest kept split every omega is trivial, i.e. an even spread
    size = n // sums.size
    return np.repeat(sums / size, size) if size > 1 else sums


def _dyadic_result(x, model, pen, tree, levels, kept_levels, obj, family):
    n = x.size
    theta_hat = _dyadic_fit(model, x.sum(), levels, kept_levels, n)
    depth = len(levels)
    # upward closure of the kept set gives the selected partition
    closure = [None] * depth
    below = None
    for j in range(depth - 1, -1, -1):
        c = kept_levels[j].copy()
        if below is not None:
            c |= below[0::2] | below[1::2]
        closure[j] = c
        below = c
    kept, cells = [], []
    present = np.array([True])
    for j in range(depth):
        size = n >> j
        idx = np.flatnonzero(kept_levels[j])
        for k in idx.tolist():
            a = k * size
            kept.append((Interval(a, a + size), a + size // 2, float(levels[j][2][k])))
        for k in np.flatnonzero(present & ~closure[j]).tolist():
            cells.append(Interval(k * size, (k + 1) * size))
        present = present & closure[j]
        if not present.any():
            break
        present = np.repeat(present, 2)
    for k in np.flatnonzero(present).tolist():
        cells.append(Interval(k, k + 1))
    kept.sort(key=lambda item: (item[0].start, -item[0].end))
    cells.sort()
    def costs():
        start, end, split = tree.node_arrays()
        if not depth:
            empty = np.empty(0)
            return CostTable(start, end, split, empty, empty, empty, np.empty(0, dtype=bool))
        return CostTable(
            start, end, split,
            np.concatenate([lv[0] for lv in levels]),
            np.concatenate([lv[1] for lv in levels]),
            np.concatenate([lv[2] for lv in levels]),
            np.concatenate(kept_levels),
        )

    return EstimateResult(model, pen.gamma, pen.lam, theta_hat, kept, cells, float(obj), family, tree, costs)


def estimate_threshold(x, model: ModelSpec, pen, tree: PartitionTree | None = None) -> EstimateResult:
    """Keep-or-kill each dyadic split independently.

    A split is kept iff its likelihood-ratio gain ``kill - keep`` strictly
    exceeds ``2 * lam``.  Linear time in ``len(x)``.
    """
    x = _check_x(x, model)
    pen = _penalty(pen, x.size)
    tree = _dyadic_tree(x, tree)
    levels, _ = _dyadic_levels(x, model)
    two_lam = 2.0 * pen.lam
    kept_levels = [(kill - keep) > two_lam for kill, keep, _, _ in levels]
    obj = model.root_fit_cost(x.sum(), x.size)
    for (kill, keep, _, _), k in zip(levels, kept_levels):
        obj += float(np.sum(np.where(k, keep + two_lam, kill)))
    return _dyadic_result(x, model, pen, tree, levels, kept_levels, obj, "threshold")


def estimate_rdp(x, model: ModelSpec, pen, tree: PartitionTree | None = None) -> EstimateResult:
    """Optimal pruning of the dyadic tree (bottom-up, CART-style); ties prune."""
    x = _check_x(x, model)
    pen = _penalty(pen, x.size)
    tree = _dyadic_tree(x, tree)
    two_lam = 2.0 * pen.lam
    levels, opt_root = _dyadic_levels(x, model, two_lam)
    depth = len(levels)
    kept_levels = []
    alive = np.array([True])
    for j in range(depth):
        eff = alive & levels[j][3]
        kept_levels.append(eff)
        alive = np.repeat(eff, 2)
    obj = model.root_fit_cost(x.sum(), x.size) + opt_root
    return _dyadic_result(x, model, pen, tree, levels, kept_levels, obj, "rdp")


# ------------------------------------------------------ general partitions


def _prefix(values):
    return np.concatenate([[0.0], np.cumsum(values)])


def _splits_costs_table(model, P, nodes):
    if not nodes:
        empty = np.empty(0)
        return empty, empty, empty
    arr = np.asarray(nodes, dtype=np.int64)
    a, b, s = arr[:, 0], arr[:, 1], arr[:, 2]
    return model.split_costs(P[b] - P[a], P[s] - P[a], (s - a).astype(float), (b - s).astype(float))


def _partition_result(x, model, pen, kept_nodes, cells, obj, family):
    """Assemble a result from kept splits and leaf cells of a pruned C-RP."""
    n = x.size
    P = _prefix(x)
    theta_hat = np.empty(n)
    for c in cells:
        theta_hat[c.start : c.end] = model.cell_fit(P[c.end] - P[c.start], c.length)
    kept_nodes = sorted(kept_nodes, key=lambda t: (t[0], -t[1]))
    nodes = list(kept_nodes)
    for c in cells:
        nodes.extend(midpoint_nodes(c.start, c.end))
    nodes.sort(key=lambda t: (t[0], -t[1]))  # preorder: parents first
    tree = PartitionTree(n, nodes)
    kill, keep, omega_hat = _splits_costs_table(model, P, nodes)
    kept_set = set(kept_nodes)
    arr = np.asarray(nodes, dtype=np.int64).reshape(-1, 3)
    flags = np.array([t in kept_set for t in nodes], dtype=bool)
    costs = CostTable(arr[:, 0], arr[:, 1], arr[:, 2], kill, keep, omega_hat, flags)
    omega_of = dict(zip(nodes, np.asarray(omega_hat, dtype=float).tolist()))
    kept = [(Interval(a, b), s, omega_of[(a, b, s)]) for a, b, s in kept_nodes]
    return EstimateResult(model, pen.gamma, pen.lam, theta_hat, kept, sorted(cells), float(obj), family, tree, costs)


def estimate_rp(x, model: ModelSpec, pen) -> EstimateResult:
    """Optimal pruned C-RP over all recursive partitions by interval DP.

    Intervals are processed in increasing length.  For each interval the
    all-trivial value is compared against every split point; the result is
    the optimal partition together with an accompanying C-RP.  Ties pick
    the smallest split index, and prune on an exact tie with the
    all-trivial value.
    """
    x = _check_x(x, model)
    pen = _penalty(pen, x.size)
    n = x.size
    two_lam = 2.0 * pen.lam
    xs = x - x.mean() if model.shift_invariant else x
    P = _prefix(xs)
    A = _prefix(model.cell_aux(xs))
    opt = np.zeros((n + 1, n + 1))
    choice = np.zeros((n + 1, n + 1), dtype=np.int64)
    for m in range(2, n + 1):
        a = np.arange(n - m + 1)
        b = a + m
        s_I = P[b] - P[a]
        null = model.null_cost(s_I, A[b] - A[a], float(m))
        k = np.arange(1, m)
        s = a[:, None] + k[None, :]
        x_l = P[s] - P[a][:, None]
        _, keep, _ = model.split_costs(
            np.broadcast_to(s_I[:, None], x_l.shape), x_l, k.astype(float)[None, :], (m - k).astype(float)[None, :]
        )
        cand = keep + two_lam + opt[a[:, None], s] + opt[s, b[:, None]]
        best_k = np.argmin(cand, axis=1)
        best = cand[a, best_k]
        take = best < null
        opt[a, b] = np.where(take, best, null)
        choice[a, b] = np.where(take, a + 1 + best_k, 0)
    kept_nodes, cells = [], []
    stack = [(0, n)]
    while stack:
        lo, hi = stack.pop()
        s = int(choice[lo, hi])
        if s:
            kept_nodes.append((lo, hi, s))
            stack.append((s, hi))
            stack.append((lo, s))
        else:
            cells.append(Interval(lo, hi))
    obj = model.root_fit_cost(x.sum(), n) + float(opt[0, n])
    return _partition_result(x, model, pen, kept_nodes, cells, obj, "rp")


def _boundary_nodes(bounds):
    """Internal nodes of a C-RP whose pruning has cells between consecutive ``bounds``."""
    nodes = []

    def rec(lo, hi):
        if hi - lo < 2:
            return
        mid = (lo + hi) // 2
        nodes.append((bounds[lo], bounds[hi], bounds[mid]))
        rec(lo, mid)
        rec(mid, hi)

    rec(0, len(bounds) - 1)
    return nodes


def _profile_segment_cost(model, s, aux, m):
    """Negative log-likelihood of a segment under its own constant MLE (no binomial terms)."""
    if isinstance(model, Gaussian):
        var = model.sigma**2
        return 0.5 * m * math.log(2 * math.pi * var) + (aux - s * s / m) / (2 * var)
    if isinstance(model, Poisson):
        # aux = sum of log(x_i!)
        return -(special.xlogy(s, s / m) - s) + aux
    if isinstance(model, Multinomial):
        return -special.xlogy(s, s / (m * model.n_total))
    raise InvalidConfig(f"no segment cost for {model!r}")


def segmentation_dp(x, model: ModelSpec, pen) -> EstimateResult:
    """Classic O(N^2) change-point DP over contiguous segmentations.

    Independent cross-check for :func:`estimate_rp`: the cost of a
    segmentation is the profile negative log-likelihood of a constant fit
    per segment plus ``2 * lam`` per cut.
    """
    x = _check_x(x, model)
    pen = _penalty(pen, x.size)
    n = x.size
    two_lam = 2.0 * pen.lam
    xs = x - x.mean() if isinstance(model, Gaussian) else x
    P = _prefix(xs)
    if isinstance(model, Gaussian):
        A = _prefix(xs * xs)
    elif isinstance(model, Poisson):
        A = _prefix(special.gammaln(x + 1.0))
    else:
        A = np.zeros(n + 1)
    best = np.zeros(n + 1)
    back = np.zeros(n + 1, dtype=np.int64)
    for j in range(1, n + 1):
        i = np.arange(j)
        cost = best[i] + _profile_segment_cost(model, P[j] - P[i], A[j] - A[i], (j - i).astype(float))
        cost = cost + np.where(i > 0, two_lam, 0.0)
        k = int(np.argmin(cost))
        best[j], back[j] = cost[k], k
    bounds = [n]
    while bounds[-1] > 0:
        bounds.append(int(back[bounds[-1]]))
    bounds.reverse()
    obj = float(best[n])
    if isinstance(model, Multinomial):
        obj -= float(special.gammaln(model.n_total + 1.0) - np.sum(special.gammaln(x + 1.0)))
    cells = [Interval(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
    return _partition_result(x, model, pen, _boundary_nodes(bounds), cells, obj, "segmentation")


# ------------------------------------------------------------------ oracles


def _cell_fit_vector(x, model, cells):
    theta = np.empty(x.size)
    for c in cells:
        theta[c.start : c.end] = model.cell_fit(x[c.start : c.end].sum(), c.length)
    return theta


def brute_force_oracle(x, model: ModelSpec, pen, family: str) -> EstimateResult:
    """Exhaustive minimizer of the penalized objective over a family.

    ``T``: all keep/kill patterns on the dyadic tree, each fitted by
    reconstructing from the empirical omegas.  ``RDP``: all prunings of the
    dyadic tree.  ``RP``: all contiguous segmentations.  Candidate fits are
    scored with the direct (unfactorized) likelihood.
    """
    family = family.upper()
    if family not in BRUTE_CAPS:
        raise InvalidArgument(f"unknown family {family!r}")
    x = _check_x(x, model)
    pen = _penalty(pen, x.size)
    n = x.size
    if n > BRUTE_CAPS[family]:
        raise ResourceLimit(f"brute force over {family} is capped at n={BRUTE_CAPS[family]}")
    two_lam = 2.0 * pen.lam
    best = None

    def consider(theta, k, kept, cells, tree):
        nonlocal best
        value = -loglik_direct(x, theta, model) + two_lam * k
        if best is None or value < best[0]:
            best = (value, theta, kept, cells, tree)

    if family == "T":
        tree = _dyadic_tree(x, None)
        emp = x / model.n_total if isinstance(model, Multinomial) else x
        omega_hat = decompose(emp, tree, model).omega
        nodes = list(tree.iter_nodes())
        trivial = {nd: float(model.trivial_omega(nd[2] - nd[0], nd[1] - nd[2])) for nd in nodes}
        root = model.root_fit(x.sum())
        # fewer kept splits first, so ties resolve to the simpler fit
        for k in range(len(nodes) + 1):
            for subset in itertools.combinations(range(len(nodes)), k):
                chosen = {nodes[i] for i in subset}
                omega = {nd: (omega_hat[nd] if nd in chosen else trivial[nd]) for nd in nodes}
                theta = reconstruct(MultiscaleParams(root, omega), tree, model)
                kept = [(Interval(a, b), s, omega_hat[(a, b, s)]) for a, b, s in nodes if (a, b, s) in chosen]
                consider(theta, k, kept, None, tree)
    elif family == "RDP":
        tree = _dyadic_tree(x, None)
        for pruned in sorted(tree.all_prunings(), key=lambda t: t.n_internal):
            cells = pruned.leaves()
            theta = _cell_fit_vector(x, model, cells)
            kept = [(iv, s, None) for iv, s in pruned.internal_nodes()]
            consider(theta, pruned.n_internal, kept, cells, tree)
    else:
        for k in range(n):
            for cuts in itertools.combinations(range(1, n), k):
                bounds = [0, *cuts, n]
                cells = [Interval(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
                theta = _cell_fit_vector(x, model, cells)
                consider(theta, k, _boundary_nodes(bounds), cells, None)

    value, theta, kept, cells, tree = best
    if family == "RP":
        kept = [(Interval(a, b), s, None) for a, b, s in kept]
    if cells is None:
        cells = _runs(theta)
    return EstimateResult(model, pen.gamma, pen.lam, theta, kept, cells, float(value), f"brute-{family}", tree)


def _runs(theta):
    change = np.flatnonzero(np.diff(theta) != 0) + 1
    bounds = [0, *change.tolist(), theta.size]
    return [Interval(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]


def count_runs(thetas) -> np.ndarray:
    """Number of maximal constant runs in each row."""
    thetas = np.atleast_2d(thetas)
    return 1 + np.sum(thetas[:, 1:] != thetas[:, :-1], axis=1)


@dataclass(frozen=True)
class QuantizationGrid:
    """Equispaced candidate levels on ``[lower, upper]``."""

    lower: float
    upper: float
    levels: int

    def __post_init__(self):
        if not self.lower < self.upper:
            raise InvalidArgument("quantization grid needs lower < upper")
        if self.levels < 1:
            raise InvalidArgument("quantization grid needs at least one level")

    @classmethod
    def for_n(cls, lower: float, upper: float, n_leaves: int) -> "QuantizationGrid":
        """``ceil(sqrt(n_leaves))`` levels."""
        return cls(lower, upper, max(1, math.isqrt(n_leaves - 1) + 1 if n_leaves > 1 else 1))

    @property
    def values(self) -> np.ndarray:
        if self.levels == 1:
            return np.array([float(self.lower)])
        return np.linspace(self.lower, self.upper, self.levels)


def quantized_candidates(grid: QuantizationGrid, n_leaves: int):
    """All grid-valued vectors of length ``n_leaves`` with their run counts."""
    if n_leaves > QUANTIZED_CAP:
        raise ResourceLimit(f"quantized search is capped at n={QUANTIZED_CAP}")
    vals = grid.values
    idx = np.array(list(itertools.product(range(vals.size), repeat=n_leaves)), dtype=np.int64)
    thetas = vals[idx.reshape(-1, n_leaves)]
    return thetas, count_runs(thetas)


def quantized_penalized_mle(x, model: ModelSpec, pen, grid: QuantizationGrid, _candidates=None) -> EstimateResult:
    """Minimize ``-log p(x|theta') + 2 gamma ln(N) #runs(theta')`` over grid-valued vectors.

    Exhaustive over ``levels ** N`` candidates, so ``N <= 6``.
    """
    if isinstance(model, Multinomial):
        raise InvalidConfig("quantized estimator supports the Gaussian and Poisson models only")
    x = _check_x(x, model)
    pen = _penalty(pen, x.size)
    thetas, runs = _candidates if _candidates is not None else quantized_candidates(grid, x.size)
    obj = -model.loglik_batch(x, thetas) + 2.0 * pen.lam * runs
    k = int(np.argmin(obj))
    theta = thetas[k].copy()
    return EstimateResult(model, pen.gamma, pen.lam, theta, [], _runs(theta), float(obj[k]), "quantized")


ESTIMATORS = {
    "threshold": estimate_threshold,
    "rdp": estimate_rdp,
    "rp": estimate_rp,
}


def estimate(x, model: ModelSpec, gamma: float, kind: str) -> EstimateResult:
    try:
        fn = ESTIMATORS[kind]
    except KeyError:
        raise InvalidConfig(f"unknown estimator {kind!r}; choose from {sorted(ESTIMATORS)}") from None
    return fn(x, model, gamma)
