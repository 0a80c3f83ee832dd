"""Monte Carlo risk curves, rate-slope fits, the Kraft-sum verifier and the
oracle-inequality checker."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .errors import InvalidArgument, InvalidConfig, InvalidData, ResourceLimit
from .estimators import ESTIMATORS, QuantizationGrid, count_runs, quantized_candidates, quantized_penalized_mle
from .models import Gaussian, ModelSpec, Multinomial, Poisson, sample_theta_from_signal
from .partition import is_power_of_two
from .signals import Signal, SignalSpec, make_signal

__all__ = [
    "RiskCurve",
    "KraftReport",
    "OracleReport",
    "METRICS",
    "replicate_seed",
    "monte_carlo_risk",
    "fit_rate_slope",
    "kraft_sum",
    "kraft_formula_bound",
    "oracle_bound_check",
]

METRICS = ("hellinger", "squared")
KRAFT_CAP = 20_000_000
_CHUNK = 1 << 20


def replicate_seed(master_seed: int, n_leaves: int, replicate: int) -> int:
    """64-bit seed for one replicate, mixed from ``(master, n, replicate)`` by numpy's SeedSequence."""
    state = np.random.SeedSequence([int(master_seed), int(n_leaves), int(replicate)]).generate_state(1, np.uint64)
    return int(state[0])


@dataclass
class RiskCurve:
    """Per-grid-size risk estimates ``(1/N) E[L(theta_hat, theta)]``."""

    n: np.ndarray
    risk: np.ndarray
    stderr: np.ndarray
    reps: np.ndarray
    slope: float = math.nan
    slope_se: float = math.nan
    metric: str = "hellinger"

    def __post_init__(self):
        self.n = np.asarray(self.n, dtype=np.int64)
        self.risk = np.asarray(self.risk, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        self.reps = np.asarray(self.reps, dtype=np.int64)
        if np.any(np.diff(self.n) <= 0):
            raise InvalidArgument("grid sizes must be strictly increasing")

    def rows(self):
        for n, r, se, k in zip(self.n, self.risk, self.stderr, self.reps):
            yield {"n": int(n), "risk": float(r), "stderr": float(se), "reps": int(k)}

    def summary(self) -> dict:
        return {"metric": self.metric, "slope": self.slope, "slope_se": self.slope_se}

    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.risk) < 0))


def _grid_model(model: ModelSpec, n: int) -> ModelSpec:
    # multinomial sweeps tie the sample size to the grid: n_total = N
    return Multinomial(n) if isinstance(model, Multinomial) else model


def _loss(model, theta, theta_hat, metric):
    if metric == "hellinger":
        return model.hellinger_sq(theta, theta_hat)
    return model.squared_error(theta, theta_hat)


def _replicate(task):
    theta, model, kind, gamma, seed, metric = task
    rng = np.random.default_rng(seed)
    x = model.sample(theta, rng)
    fit = ESTIMATORS[kind](x, model, gamma)
    return _loss(model, theta, fit.theta_hat, metric) / theta.size


def _check_sweep(model, kind, gamma, n_list, reps, metric):
    if kind not in ESTIMATORS:
        raise InvalidConfig(f"unknown estimator {kind!r}; choose from {sorted(ESTIMATORS)}")
    if metric not in METRICS:
        raise InvalidConfig(f"unknown metric {metric!r}; choose from {METRICS}")
    if reps < 2:
        raise InvalidConfig("reps must be >= 2 for a standard error")
    if not (gamma >= 0):
        raise InvalidConfig("gamma must be >= 0")
    n_list = [int(n) for n in n_list]
    if not n_list or any(n < 1 for n in n_list):
        raise InvalidConfig("n_list must hold positive grid sizes")
    if any(b <= a for a, b in zip(n_list[:-1], n_list[1:])):
        raise InvalidConfig("n_list must be strictly increasing")
    if kind in ("threshold", "rdp") and not all(is_power_of_two(n) for n in n_list):
        raise InvalidConfig(f"estimator {kind!r} needs power-of-two grid sizes")
    if not isinstance(model, (Gaussian, Poisson, Multinomial)):
        raise InvalidConfig(f"unsupported model {model!r}")
    return n_list


def monte_carlo_risk(
    signal,
    model: ModelSpec,
    estimator: str,
    gamma: float,
    n_list,
    reps: int,
    master_seed: int,
    metric: str = "hellinger",
    jobs: int = 1,
) -> RiskCurve:
    """Estimate the risk curve of an estimator on a test signal.

    For each grid size ``N`` the true vector is sampled from ``signal`` and
    every replicate draws fresh observations from its own seed, so results
    do not depend on ``jobs`` or on the order replicates run in.

    Parameters
    ----------
    signal : SignalSpec or Signal
    model : ModelSpec
        For the multinomial model ``n_total`` is set to ``N`` at each grid
        size and the signal is rescaled to a density.
    estimator : {"threshold", "rdp", "rp"}
    metric : {"hellinger", "squared"}
        Squared Hellinger loss, or the squared-error variant of the model.
    jobs : int
        Worker processes for the replicates.
    """
    n_list = _check_sweep(model, estimator, gamma, n_list, reps, metric)
    if isinstance(signal, SignalSpec):
        signal = make_signal(signal)
    if not isinstance(signal, Signal):
        raise InvalidConfig("signal must be a SignalSpec or Signal")
    if isinstance(model, Multinomial) and abs(signal.integral() - 1.0) > 1e-9:
        signal = signal.normalized()
    tasks = []
    for n in n_list:
        m = _grid_model(model, n)
        theta = sample_theta_from_signal(signal, n, m)
        for r in range(reps):
            tasks.append((theta, m, estimator, float(gamma), replicate_seed(master_seed, n, r), metric))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            losses = list(pool.map(_replicate, tasks, chunksize=max(1, reps // jobs)))
    else:
        losses = [_replicate(t) for t in tasks]
    losses = np.asarray(losses).reshape(len(n_list), reps)
    risk = losses.mean(axis=1)
    stderr = losses.std(axis=1, ddof=1) / math.sqrt(reps)
    curve = RiskCurve(np.array(n_list), risk, stderr, np.full(len(n_list), reps), metric=metric)
    if len(n_list) >= 3 and np.all(risk > 0):
        curve.slope, curve.slope_se = fit_rate_slope(curve)
    return curve


def fit_rate_slope(curve) -> tuple[float, float]:
    """Least-squares slope of ``ln(risk)`` on ``ln(n)`` and its standard error.

    Accepts a :class:`RiskCurve` or an ``(n, risk)`` pair.
    """
    if isinstance(curve, RiskCurve):
        n, risk = curve.n, curve.risk
    else:
        n, risk = (np.asarray(v, dtype=float) for v in curve)
    if len(n) < 3:
        raise InvalidData("need at least 3 grid points to fit a slope")
    if np.any(np.asarray(risk) <= 0):
        raise InvalidData("risk entries must be positive for a log-log fit")
    fit = stats.linregress(np.log(np.asarray(n, dtype=float)), np.log(np.asarray(risk, dtype=float)))
    return float(fit.slope), float(fit.stderr)


# ------------------------------------------------------------------- Kraft


@dataclass
class KraftReport:
    n_leaves: int
    gamma: float
    levels: int
    exhaustive_sum: float | None
    formula_bound: float
    run_counts: dict | None = None

    @property
    def in_theory_regime(self) -> bool:
        return self.gamma >= 1.5 and self.n_leaves >= 3

    @property
    def passed(self) -> bool:
        ok = self.exhaustive_sum is None or self.exhaustive_sum <= self.formula_bound * (1 + 1e-12)
        if self.in_theory_regime:
            ok = ok and self.formula_bound <= 1.0
            ok = ok and (self.exhaustive_sum is None or self.exhaustive_sum <= 1.0)
        return bool(ok)

    @property
    def exceeds_one(self) -> bool:
        return bool((self.exhaustive_sum or 0.0) > 1.0 or self.formula_bound > 1.0)

    def to_dict(self) -> dict:
        return {
            "n_leaves": self.n_leaves,
            "gamma": self.gamma,
            "levels": self.levels,
            "exhaustive_sum": self.exhaustive_sum,
            "formula_bound": self.formula_bound,
            "run_counts": None if self.run_counts is None else {str(k): v for k, v in self.run_counts.items()},
            "exceeds_one": self.exceeds_one,
            "pass": self.passed,
        }


def _levels_for(n_leaves: int) -> int:
    return math.isqrt(n_leaves - 1) + 1 if n_leaves > 1 else 1


def kraft_formula_bound(n_leaves: int, gamma: float) -> float:
    """``sum_d C(N-1, d-1) L^d N^(-gamma d)``, summed in closed form in log space."""
    L = _levels_for(n_leaves)
    log_q = math.log(L) - gamma * math.log(n_leaves)
    return math.exp(log_q + (n_leaves - 1) * math.log1p(math.exp(log_q)))


def _run_count_census(n_leaves: int, levels: int) -> np.ndarray:
    """Histogram of maximal-run counts over all ``levels ** n_leaves`` grid vectors."""
    total = levels**n_leaves
    counts = np.zeros(n_leaves + 1, dtype=np.int64)
    powers = levels ** np.arange(n_leaves, dtype=np.int64)
    for lo in range(0, total, _CHUNK):
        idx = np.arange(lo, min(total, lo + _CHUNK), dtype=np.int64)
        digits = (idx[:, None] // powers[None, :]) % levels
        counts += np.bincount(count_runs(digits), minlength=n_leaves + 1)
    return counts


def kraft_sum(n_leaves: int, gamma: float, exhaustive: bool | None = None) -> KraftReport:
    """Kraft-type sum ``sum exp(-gamma ln(N) #runs)`` over quantized vectors.

    Parameters
    ----------
    exhaustive : bool or None
        Enumerate every vector of the ``ceil(sqrt(N))``-level grid.  ``None``
        enumerates only when at most ``KRAFT_CAP`` vectors are involved.
    """
    if n_leaves < 1:
        raise InvalidArgument("n_leaves must be >= 1")
    if not (gamma >= 0 and math.isfinite(gamma)):
        raise InvalidArgument("gamma must be finite and >= 0")
    L = _levels_for(n_leaves)
    feasible = L**n_leaves <= KRAFT_CAP
    if exhaustive and not feasible:
        raise ResourceLimit(f"{L}^{n_leaves} vectors exceed the enumeration cap of {KRAFT_CAP}")
    bound = kraft_formula_bound(n_leaves, gamma)
    if exhaustive is False or not feasible:
        return KraftReport(n_leaves, gamma, L, None, bound)
    census = _run_count_census(n_leaves, L)
    d = np.arange(n_leaves + 1)
    weights = np.exp(-gamma * math.log(n_leaves) * d) if n_leaves > 1 else np.ones(d.size)
    total = float(np.sum(census * weights))
    runs = {int(k): int(c) for k, c in zip(d, census) if c}
    return KraftReport(n_leaves, gamma, L, total, bound, runs)


# ---------------------------------------------------------- oracle inequality


@dataclass
class OracleReport:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_argmin: np.ndarray
    reps: int

    @property
    def passed(self) -> bool:
        return bool(self.lhs <= self.rhs + 3.0 * self.lhs_se)

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "lhs_se": self.lhs_se,
            "rhs": self.rhs,
            "rhs_argmin": [float(v) for v in self.rhs_argmin],
            "reps": self.reps,
            "pass": self.passed,
        }


def oracle_bound_check(theta, model: ModelSpec, gamma: float, grid: QuantizationGrid, reps: int, seed: int) -> OracleReport:
    """Compare the Monte Carlo Hellinger risk of the quantized estimator with
    ``min over grid vectors of KL(p_theta, p_theta') + 2 pen(theta')``,
    ``pen = gamma ln(N) #runs``."""
    theta = model.check_theta(theta)
    n = theta.size
    if reps < 2:
        raise InvalidConfig("reps must be >= 2")
    if isinstance(model, Multinomial):
        raise InvalidConfig("oracle check supports the Gaussian and Poisson models only")
    cands = quantized_candidates(grid, n)
    thetas, runs = cands
    pen = gamma * math.log(n) * runs
    kl = np.array([model.kl_div(theta, t) for t in thetas])
    rhs_all = kl + 2.0 * pen
    k = int(np.argmin(rhs_all))
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    losses = np.empty(reps)
    for r in range(reps):
        x = model.sample(theta, rng)
        fit = quantized_penalized_mle(x, model, gamma, grid, _candidates=cands)
        losses[r] = model.hellinger_sq(fit.theta_hat, theta)
    return OracleReport(
        float(losses.mean()), float(losses.std(ddof=1) / math.sqrt(reps)), float(rhs_all[k]), thetas[k].copy(), reps
    )
