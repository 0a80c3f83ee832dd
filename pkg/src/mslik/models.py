"""Gaussian, Poisson and multinomial observation models and their multiscale forms.

Every model factors the likelihood of ``x`` along a recursive partition as a
coarse term for the grand total times, for each split, the conditional law of
the left-child sum given the parent sum:

* Gaussian(sigma): ``X_l | X_I ~ N(rho X_I - omega, c sigma^2)`` with
  ``rho = N_l / N_I``, ``c = N_l N_r / N_I`` and
  ``omega = c (theta_r / N_r - theta_l / N_l)``; trivial omega is 0.
* Poisson, Multinomial(n): ``X_l | X_I ~ Binomial(X_I, omega)`` with
  ``omega = theta_l / theta_I``; trivial omega is ``rho``.

Interval sums of ``theta`` and ``x`` are written ``theta_I`` and ``X_I``.
All log-likelihoods are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import InvalidArgument, InvalidParams, InvalidSignal
from .partition import Interval, PartitionTree, SumPyramid, sum_pyramid

__all__ = [
    "ModelSpec",
    "Gaussian",
    "Poisson",
    "Multinomial",
    "model_from_name",
    "MultiscaleParams",
    "NodeCosts",
    "sample_theta_from_signal",
    "draw_observations",
    "decompose",
    "reconstruct",
    "loglik_direct",
    "loglik_factorized",
    "node_costs",
    "cascade_kill_cost",
    "hellinger_sq",
    "kl_div",
    "squared_error_loss",
]

LOG_2PI = math.log(2.0 * math.pi)
SIMPLEX_TOL = 1e-9
OMEGA_TOL = 1e-12


def _binom_logpmf(k, n, p):
    return (
        special.gammaln(n + 1.0)
        - special.gammaln(k + 1.0)
        - special.gammaln(n - k + 1.0)
        + special.xlogy(k, p)
        + special.xlog1py(n - k, -p)
    )


class ModelSpec:
    """Common interface of the three observation models.

    The vectorized hooks below take interval sums and child lengths as
    arrays; the estimators are written entirely in terms of them.
    """

    name = "model"
    requires_integer_data = False
    # node costs depend on the data only through differences
    shift_invariant = False

    # -- domain rules
    def check_theta(self, theta) -> np.ndarray:
        raise NotImplementedError

    def check_x(self, x) -> np.ndarray:
        raise NotImplementedError

    # -- multiscale parameterization
    def trivial_omega(self, n_l, n_r):
        raise NotImplementedError

    def omega_from_sums(self, theta_l, theta_r, n_l, n_r):
        raise NotImplementedError

    def left_sum(self, theta_I, omega, n_l, n_r):
        raise NotImplementedError

    def root_param(self, theta) -> float:
        return float(np.sum(theta))

    # -- likelihood pieces
    def loglik(self, x, theta) -> float:
        raise NotImplementedError

    def loglik_batch(self, x, thetas) -> np.ndarray:
        """Log-likelihood of ``x`` under each row of ``thetas``."""
        raise NotImplementedError

    def root_loglik(self, total_x, root, n_leaves=None) -> float:
        raise NotImplementedError

    def cond_loglik(self, x_l, x_I, omega, n_l, n_r):
        raise NotImplementedError

    def split_costs(self, x_I, x_l, n_l, n_r):
        """Return ``(kill_cost, keep_data_cost, omega_hat)`` for a batch of splits."""
        raise NotImplementedError

    def cell_aux(self, x) -> np.ndarray:
        """Per-cell statistic whose interval sums feed :meth:`null_cost`."""
        raise NotImplementedError

    def null_cost(self, s, aux, m):
        """Negative log-likelihood of a cell's data given its sum ``s`` under a flat profile."""
        raise NotImplementedError

    def root_fit(self, total_x) -> float:
        """Maximum-likelihood coarse parameter."""
        return float(total_x)

    def root_fit_cost(self, total_x, n_leaves) -> float:
        return -self.root_loglik(total_x, self.root_fit(total_x), n_leaves)

    def cell_fit(self, s, m):
        """Per-cell fitted value of a flat profile on a cell of length ``m`` with sum ``s``."""
        return np.asarray(s, dtype=float) / m

    # -- losses
    def hellinger_sq(self, theta1, theta2) -> float:
        raise NotImplementedError

    def kl_div(self, theta1, theta2) -> float:
        raise NotImplementedError

    def squared_error(self, theta1, theta2) -> float:
        raise NotImplementedError

    # -- simulation
    def sample(self, theta, rng) -> np.ndarray:
        raise NotImplementedError


def _check_counts(x, name):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidArgument(f"{name} observations must be a 1-D vector")
    if not np.all(np.isfinite(x)) or np.any(x < 0) or np.any(x != np.floor(x)):
        raise InvalidArgument(f"{name} observations must be nonnegative integers")
    return x


@dataclass(frozen=True)
class Gaussian(ModelSpec):
    """Independent ``N(theta_i, sigma^2)`` cells with known ``sigma``."""

    sigma: float = 1.0
    name = "gaussian"
    shift_invariant = True

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvalidArgument("Gaussian sigma must be finite and > 0")

    def check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or not np.all(np.isfinite(theta)):
            raise InvalidArgument("Gaussian theta must be a finite 1-D vector")
        return theta

    def check_x(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or not np.all(np.isfinite(x)):
            raise InvalidArgument("Gaussian observations must be a finite 1-D vector")
        return x

    def trivial_omega(self, n_l, n_r):
        return np.zeros(np.broadcast(n_l, n_r).shape)

    def omega_from_sums(self, theta_l, theta_r, n_l, n_r):
        c = n_l * n_r / (n_l + n_r)
        return c * (theta_r / n_r - theta_l / n_l)

    def left_sum(self, theta_I, omega, n_l, n_r):
        return n_l / (n_l + n_r) * theta_I - omega

    def loglik(self, x, theta):
        var = self.sigma**2
        r = np.asarray(x, dtype=float) - theta
        return float(-0.5 * x.size * (LOG_2PI + math.log(var)) - np.dot(r, r) / (2 * var))

    def loglik_batch(self, x, thetas):
        var = self.sigma**2
        r = np.asarray(thetas, dtype=float) - x
        return -0.5 * x.size * (LOG_2PI + math.log(var)) - np.sum(r * r, axis=-1) / (2 * var)

    def root_loglik(self, total_x, root, n_leaves=None):
        var = n_leaves * self.sigma**2
        return -0.5 * (LOG_2PI + math.log(var)) - (total_x - root) ** 2 / (2 * var)

    def cond_loglik(self, x_l, x_I, omega, n_l, n_r):
        n_I = n_l + n_r
        var = n_l * n_r / n_I * self.sigma**2
        r = x_l - (n_l / n_I * x_I - omega)
        return -0.5 * (LOG_2PI + np.log(var)) - r * r / (2 * var)

    def split_costs(self, x_I, x_l, n_l, n_r):
        n_I = n_l + n_r
        var = n_l * n_r / n_I * self.sigma**2
        keep = 0.5 * (LOG_2PI + np.log(var)) * np.ones(np.shape(x_I))
        omega_hat = n_l / n_I * x_I - x_l
        kill = keep + omega_hat * omega_hat / (2 * var)
        return kill, keep, omega_hat

    def cell_aux(self, x):
        return x * x

    def null_cost(self, s, aux, m):
        var = self.sigma**2
        return (m - 1) / 2 * (LOG_2PI + math.log(var)) - 0.5 * np.log(m) + (aux - s * s / m) / (2 * var)

    def hellinger_sq(self, theta1, theta2):
        d = np.asarray(theta1, float) - np.asarray(theta2, float)
        return float(-2.0 * np.expm1(-np.dot(d, d) / (8 * self.sigma**2)))

    def kl_div(self, theta1, theta2):
        d = np.asarray(theta1, float) - np.asarray(theta2, float)
        return float(np.dot(d, d) / (2 * self.sigma**2))

    def squared_error(self, theta1, theta2):
        d = np.asarray(theta1, float) - np.asarray(theta2, float)
        return float(np.dot(d, d) / (4 * self.sigma**2))

    def sample(self, theta, rng):
        return theta + self.sigma * rng.standard_normal(theta.size)


class _BinomialSplitModel(ModelSpec):
    requires_integer_data = True

    def trivial_omega(self, n_l, n_r):
        return np.asarray(n_l / (n_l + n_r), dtype=float)

    def omega_from_sums(self, theta_l, theta_r, n_l, n_r):
        theta_I = theta_l + theta_r
        rho = n_l / (n_l + n_r)
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(theta_I > 0, theta_l / np.where(theta_I > 0, theta_I, 1.0), rho)

    def left_sum(self, theta_I, omega, n_l, n_r):
        return omega * theta_I

    def cond_loglik(self, x_l, x_I, omega, n_l, n_r):
        omega = np.asarray(omega, dtype=float)
        if np.any(omega < -OMEGA_TOL) or np.any(omega > 1 + OMEGA_TOL):
            raise InvalidParams("binomial split probability outside [0, 1]")
        return _binom_logpmf(x_l, x_I, np.clip(omega, 0.0, 1.0))

    def split_costs(self, x_I, x_l, n_l, n_r):
        x_I = np.asarray(x_I, dtype=float)
        x_l = np.asarray(x_l, dtype=float)
        rho = np.broadcast_to(n_l / (n_l + n_r), x_I.shape)
        x_r = x_I - x_l
        base = special.gammaln(x_I + 1) - special.gammaln(x_l + 1) - special.gammaln(x_r + 1)
        kill = -(base + x_l * np.log(rho) + x_r * np.log1p(-rho))
        safe = np.where(x_I > 0, x_I, 1.0)
        keep = -(base + special.xlogy(x_l, x_l / safe) + special.xlogy(x_r, x_r / safe))
        omega_hat = np.where(x_I > 0, x_l / safe, rho)
        # no trials: both hypotheses cost nothing
        keep = np.where(x_I > 0, np.minimum(keep, kill), 0.0) + 0.0
        kill = np.where(x_I > 0, kill, 0.0)
        return kill, keep, omega_hat

    def cell_aux(self, x):
        return special.gammaln(x + 1.0)

    def null_cost(self, s, aux, m):
        return -(special.gammaln(s + 1.0) - aux - s * np.log(m))


@dataclass(frozen=True)
class Poisson(_BinomialSplitModel):
    """Independent ``Poisson(theta_i)`` counts."""

    name = "poisson"

    def check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or not np.all(np.isfinite(theta)) or np.any(theta < 0):
            raise InvalidArgument("Poisson theta must be a finite nonnegative 1-D vector")
        return theta

    def check_x(self, x):
        return _check_counts(x, "Poisson")

    def loglik(self, x, theta):
        return float(np.sum(special.xlogy(x, theta) - theta - special.gammaln(x + 1.0)))

    def loglik_batch(self, x, thetas):
        thetas = np.asarray(thetas, dtype=float)
        return np.sum(special.xlogy(x, thetas) - thetas, axis=-1) - np.sum(special.gammaln(x + 1.0))

    def root_loglik(self, total_x, root, n_leaves=None):
        return float(special.xlogy(total_x, root) - root - special.gammaln(total_x + 1.0))

    def hellinger_sq(self, theta1, theta2):
        d = np.sqrt(theta1) - np.sqrt(theta2)
        return float(-2.0 * np.expm1(-0.5 * np.dot(d, d)))

    def kl_div(self, theta1, theta2):
        return float(np.sum(special.kl_div(np.asarray(theta1, float), np.asarray(theta2, float))))

    def squared_error(self, theta1, theta2):
        d = np.sqrt(theta1) - np.sqrt(theta2)
        return float(np.dot(d, d))

    def sample(self, theta, rng):
        return rng.poisson(theta).astype(float)


@dataclass(frozen=True)
class Multinomial(_BinomialSplitModel):
    """A single ``Multinomial(n_total, theta)`` draw over the grid cells."""

    n_total: int = 1
    name = "multinomial"

    def __post_init__(self):
        if int(self.n_total) != self.n_total or self.n_total < 1:
            raise InvalidArgument("Multinomial n_total must be a positive integer")

    def check_theta(self, theta):
        theta = np.asarray(theta, dtype=float)
        if theta.ndim != 1 or not np.all(np.isfinite(theta)) or np.any(theta < 0):
            raise InvalidArgument("multinomial theta must be a nonnegative 1-D vector")
        if abs(theta.sum() - 1.0) > SIMPLEX_TOL:
            raise InvalidArgument(f"multinomial theta sums to {theta.sum()!r}, not 1")
        return theta

    def check_x(self, x):
        x = _check_counts(x, "multinomial")
        if x.sum() != self.n_total:
            raise InvalidArgument(f"multinomial counts sum to {x.sum():g}, expected n_total={self.n_total}")
        return x

    def root_param(self, theta):
        return 1.0

    def root_fit(self, total_x):
        return 1.0

    def cell_fit(self, s, m):
        return np.asarray(s, dtype=float) / (m * self.n_total)

    def loglik(self, x, theta):
        n = float(np.sum(x))
        return float(special.gammaln(n + 1) - np.sum(special.gammaln(x + 1.0)) + np.sum(special.xlogy(x, theta)))

    def loglik_batch(self, x, thetas):
        n = float(np.sum(x))
        const = special.gammaln(n + 1) - np.sum(special.gammaln(x + 1.0))
        return const + np.sum(special.xlogy(x, np.asarray(thetas, dtype=float)), axis=-1)

    def root_loglik(self, total_x, root, n_leaves=None):
        return 0.0 if total_x == self.n_total else -math.inf

    def hellinger_sq(self, theta1, theta2):
        bc = float(np.sum(np.sqrt(np.asarray(theta1, float) * np.asarray(theta2, float))))
        if bc <= 0.0:
            return 2.0
        return float(-2.0 * np.expm1(self.n_total * math.log(min(bc, 1.0))))

    def kl_div(self, theta1, theta2):
        return float(self.n_total * np.sum(special.rel_entr(np.asarray(theta1, float), np.asarray(theta2, float))))

    def squared_error(self, theta1, theta2):
        d = np.sqrt(self.n_total * np.asarray(theta1, float)) - np.sqrt(self.n_total * np.asarray(theta2, float))
        return float(np.dot(d, d))

    def sample(self, theta, rng):
        # top-down conditional binomial splitting along the midpoint tree
        n = theta.size
        prefix = np.concatenate([[0.0], np.cumsum(theta)])
        x = np.zeros(n)
        start = np.array([0])
        end = np.array([n])
        count = np.array([self.n_total], dtype=np.int64)
        while start.size:
            unit = end - start == 1
            x[start[unit]] = count[unit]
            start, end, count = start[~unit], end[~unit], count[~unit]
            if not start.size:
                break
            mid = (start + end) // 2
            mass_l = prefix[mid] - prefix[start]
            mass = prefix[end] - prefix[start]
            with np.errstate(invalid="ignore", divide="ignore"):
                p = np.where(mass > 0, mass_l / np.where(mass > 0, mass, 1.0), (mid - start) / (end - start))
            left = rng.binomial(count, np.clip(p, 0.0, 1.0))
            start, end, count = np.concatenate([start, mid]), np.concatenate([mid, end]), np.concatenate([left, count - left])
        return x


def model_from_name(name: str, sigma: float | None = None, n_total: int | None = None) -> ModelSpec:
    name = name.lower()
    if name == "gaussian":
        return Gaussian(1.0 if sigma is None else float(sigma))
    if name == "poisson":
        return Poisson()
    if name == "multinomial":
        if n_total is None:
            raise InvalidArgument("multinomial model needs n_total")
        return Multinomial(int(n_total))
    raise InvalidArgument(f"unknown model {name!r}")


# ------------------------------------------------------------------ sampling


def sample_theta_from_signal(signal, n_leaves: int, model: ModelSpec) -> np.ndarray:
    """Discretize a signal onto ``n_leaves`` cells.

    Gaussian and Poisson take cell averages (``N`` times the cell integral);
    the multinomial model takes plain cell integrals, which must sum to one.
    """
    if n_leaves < 1:
        raise InvalidArgument("n_leaves must be >= 1")
    if not hasattr(signal, "cell_integrals"):
        from .signals import make_signal

        signal = make_signal(signal)
    integrals = signal.cell_integrals(n_leaves)
    if isinstance(model, Multinomial):
        theta = integrals
        if np.any(theta < 0):
            raise InvalidSignal("multinomial signal takes negative values")
        if abs(theta.sum() - 1.0) > SIMPLEX_TOL:
            raise InvalidSignal(f"multinomial signal integrates to {theta.sum():.12g}, not 1")
        return theta / theta.sum()
    theta = n_leaves * integrals
    if isinstance(model, Poisson) and np.any(theta < 0):
        raise InvalidSignal("Poisson intensity takes negative values")
    return theta


def draw_observations(theta, model: ModelSpec, seed: int) -> np.ndarray:
    """Draw one observation vector; identical ``seed`` gives identical output."""
    theta = model.check_theta(theta)
    rng = np.random.default_rng(seed)
    return model.sample(theta, rng)


# ------------------------------------------------------- multiscale params


@dataclass(frozen=True)
class MultiscaleParams:
    """Coarse parameter plus one ``omega`` per internal node ``(start, end, split)``."""

    root: float
    omega: dict

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "entries": [
                {"start": a, "end": b, "split": s, "omega": w} for (a, b, s), w in self.omega.items()
            ],
        }

    @classmethod
    def from_dict(cls, data) -> "MultiscaleParams":
        omega = {(int(e["start"]), int(e["end"]), int(e["split"])): float(e["omega"]) for e in data["entries"]}
        return cls(float(data["root"]), omega)


def _node_batch(tree: PartitionTree):
    start, end, split = tree.node_arrays()
    n_l = (split - start).astype(float)
    n_r = (end - split).astype(float)
    return start, end, split, n_l, n_r


def _interval_sums(values, tree: PartitionTree):
    """Left and right child sums of ``values`` for every internal node, via bottom-up pyramid."""
    pyr = sum_pyramid(values, tree)
    left = np.array([pyr[(a, s)] for a, _, s in tree.iter_nodes()], dtype=float)
    right = np.array([pyr[(s, b)] for _, b, s in tree.iter_nodes()], dtype=float)
    return pyr, left, right


def decompose(theta, tree: PartitionTree, model: ModelSpec) -> MultiscaleParams:
    theta = model.check_theta(theta)
    if theta.size != tree.n_leaves:
        raise InvalidArgument(f"theta has {theta.size} entries, tree has {tree.n_leaves} leaves")
    if not tree.is_complete:
        raise InvalidArgument("decompose needs a complete recursive partition")
    start, end, split, n_l, n_r = _node_batch(tree)
    _, left, right = _interval_sums(theta, tree)
    omega = model.omega_from_sums(left, right, n_l, n_r)
    entries = dict(zip(tree.iter_nodes(), np.asarray(omega, dtype=float).tolist()))
    return MultiscaleParams(model.root_param(theta), entries)


def reconstruct(ms: MultiscaleParams, tree: PartitionTree, model: ModelSpec) -> np.ndarray:
    """Invert :func:`decompose` top-down.

    Also accepts a partial tree, in which case each leaf cell's sum is spread
    evenly over its unit cells.
    """
    sums = {(0, tree.n_leaves): float(ms.root)}
    for a, b, s in tree.iter_nodes():
        try:
            w = ms.omega[(a, b, s)]
        except KeyError:
            raise InvalidArgument(f"no omega for node [{a},{b})@{s}") from None
        total = sums[(a, b)]
        left = float(model.left_sum(total, w, s - a, b - s))
        sums[(a, s)] = left
        sums[(s, b)] = total - left
    if len(ms.omega) != tree.n_internal:
        raise InvalidArgument("omega map has entries for nodes outside the tree")
    theta = np.empty(tree.n_leaves)
    for leaf in tree.leaves():
        theta[leaf.start : leaf.end] = sums[leaf.key()] / leaf.length
    return theta


# ---------------------------------------------------------------- likelihood


def loglik_direct(x, theta, model: ModelSpec) -> float:
    x = model.check_x(x)
    theta = np.asarray(theta, dtype=float)
    if theta.shape != x.shape:
        raise InvalidArgument("x and theta differ in length")
    return model.loglik(x, theta)


def loglik_factorized(x, ms: MultiscaleParams, tree: PartitionTree, model: ModelSpec) -> float:
    """Coarse term plus the sum of per-split conditional log-likelihoods."""
    x = model.check_x(x)
    if x.size != tree.n_leaves:
        raise InvalidArgument("x does not match tree size")
    start, end, split, n_l, n_r = _node_batch(tree)
    pyr, x_l, x_r = _interval_sums(x, tree)
    try:
        omega = np.array([ms.omega[node] for node in tree.iter_nodes()], dtype=float)
    except KeyError as exc:
        raise InvalidArgument(f"no omega for node {exc.args[0]}") from None
    total = model.root_loglik(pyr[(0, tree.n_leaves)], ms.root, tree.n_leaves)
    if omega.size:
        total += float(np.sum(model.cond_loglik(x_l, x_l + x_r, omega, n_l, n_r)))
    return float(total)


@dataclass(frozen=True)
class NodeCosts:
    interval: Interval
    split: int
    kill_cost: float
    keep_data_cost: float
    omega_hat: float
    penalty: float = 0.0

    @property
    def keep_cost(self) -> float:
        """Keep cost including the ``2 * lambda`` complexity charge."""
        return self.keep_data_cost + self.penalty

    @property
    def gain(self) -> float:
        return self.kill_cost - self.keep_data_cost


def node_costs(pyramid: SumPyramid, interval, split: int, model: ModelSpec, lam: float = 0.0) -> NodeCosts:
    """Kill/keep negative conditional log-likelihoods at one split."""
    interval = interval if isinstance(interval, Interval) else Interval(*interval)
    x_I = pyramid[interval]
    x_l = pyramid[(interval.start, split)]
    kill, keep, omega_hat = model.split_costs(
        np.float64(x_I), np.float64(x_l), float(split - interval.start), float(interval.end - split)
    )
    return NodeCosts(interval, int(split), float(kill), float(keep), float(omega_hat), 2.0 * lam)


def cascade_kill_cost(x, interval, model: ModelSpec) -> float:
    """Total kill cost of every split below ``interval`` along the left comb."""
    x = np.asarray(x, dtype=float)
    interval = interval if isinstance(interval, Interval) else Interval(*interval)
    if interval.end > x.size:
        raise InvalidArgument("interval exceeds grid")
    seg = x[interval.start : interval.end]
    m = seg.size
    if m < 2:
        return 0.0
    suffix = np.cumsum(seg[::-1])[::-1]
    n_r = np.arange(m - 1, 0, -1, dtype=float)
    kill, _, _ = model.split_costs(suffix[:-1], seg[:-1], np.ones(m - 1), n_r)
    return float(np.sum(kill))


# -------------------------------------------------------------------- losses


def hellinger_sq(theta1, theta2, model: ModelSpec) -> float:
    """Squared Hellinger distance between the laws of the observations, in [0, 2]."""
    return min(max(model.hellinger_sq(np.asarray(theta1, float), np.asarray(theta2, float)), 0.0), 2.0)


def kl_div(theta1, theta2, model: ModelSpec) -> float:
    """Kullback-Leibler divergence of ``p(.|theta2)`` from ``p(.|theta1)``; may be ``inf``."""
    return model.kl_div(np.asarray(theta1, float), np.asarray(theta2, float))


def squared_error_loss(theta, theta_hat, model: ModelSpec) -> float:
    """Squared-error surrogate: ``|d|^2/(4 sigma^2)``, ``|sqrt d|^2`` or ``|sqrt(n d)|^2``."""
    return model.squared_error(np.asarray(theta, float), np.asarray(theta_hat, float))
