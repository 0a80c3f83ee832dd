"""Self-checks of the library's identities, run by ``mslik verify``.

Each suite returns a JSON-ready report with a top-level ``"pass"`` flag.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidConfig
from .estimators import (
    QuantizationGrid,
    brute_force_oracle,
    estimate_rdp,
    estimate_rp,
    estimate_threshold,
    segmentation_dp,
)
from .models import Gaussian, Multinomial, Poisson, decompose, loglik_direct, loglik_factorized, reconstruct
from .partition import dyadic_crp, random_crp
from .risk import kraft_formula_bound, kraft_sum, oracle_bound_check

__all__ = ["SUITES", "run_suite", "random_problem", "MODEL_NAMES"]

MODEL_NAMES = ("gaussian", "poisson", "multinomial")
OBJ_TOL = 1e-9


def random_problem(model_name: str, n: int, rng):
    """Random ``(model, theta, x)`` triple; a fraction of cells is left empty for the count models."""
    if model_name == "gaussian":
        model = Gaussian(float(rng.uniform(0.3, 3.0)))
        steps = rng.normal(0.0, 3.0, n) * (rng.random(n) < 0.3)
        theta = np.cumsum(steps) + rng.normal(0.0, 1.0)
    elif model_name == "poisson":
        model = Poisson()
        theta = rng.gamma(1.5, 3.0, n) * (rng.random(n) > 0.15)
    elif model_name == "multinomial":
        model = Multinomial(int(rng.integers(1, 60)))
        w = rng.dirichlet(np.full(n, 0.7))
        theta = w / w.sum()
    else:
        raise InvalidConfig(f"unknown model {model_name!r}")
    x = model.sample(theta, rng)
    return model, theta, x


def _tol(value):
    return OBJ_TOL * (1.0 + abs(value))


def suite_factorization(instances: int = 100, seed: int = 0, **_):
    rng = np.random.default_rng(seed)
    out = {}
    for name in MODEL_NAMES:
        worst = 0.0
        ok = True
        for _ in range(instances):
            n = int(rng.integers(2, 65))
            model, theta, x = random_problem(name, n, rng)
            tree = random_crp(n, rng)
            direct = loglik_direct(x, theta, model)
            fact = loglik_factorized(x, decompose(theta, tree, model), tree, model)
            if not math.isfinite(direct):
                ok &= direct == fact
                continue
            err = abs(direct - fact) / (1.0 + abs(direct))
            worst = max(worst, err)
            ok &= err <= OBJ_TOL
        out[name] = {"instances": instances, "max_scaled_error": worst, "pass": bool(ok)}
    return {"suite": "factorization", "models": out, "pass": all(v["pass"] for v in out.values())}


def suite_roundtrip(instances: int = 100, seed: int = 0, **_):
    rng = np.random.default_rng(seed)
    out = {}
    for name in MODEL_NAMES:
        worst = 0.0
        for _ in range(instances):
            n = int(rng.integers(1, 65))
            model, theta, _x = random_problem(name, n, rng)
            tree = random_crp(n, rng)
            back = reconstruct(decompose(theta, tree, model), tree, model)
            scale = max(1.0, float(np.max(np.abs(theta))))
            worst = max(worst, float(np.max(np.abs(back - theta))) / scale)
        out[name] = {"instances": instances, "max_relative_error": worst, "pass": worst <= 1e-12}
    return {"suite": "roundtrip", "models": out, "pass": all(v["pass"] for v in out.values())}


def suite_oracle(instances: int = 200, seed: int = 0, **_):
    rng = np.random.default_rng(seed)
    out = {}
    fast = {"T": estimate_threshold, "RDP": estimate_rdp, "RP": estimate_rp}
    for name in MODEL_NAMES:
        failures = []
        for i in range(instances):
            n = (2, 4, 8)[i % 3]
            model, _theta, x = random_problem(name, n, rng)
            gamma = float(rng.choice([0.0, 0.5, 1.0, 1.5, 3.0]))
            rp_obj = None
            for fam, fn in fast.items():
                got = fn(x, model, gamma).objective
                want = brute_force_oracle(x, model, gamma, fam).objective
                if fam == "RP":
                    rp_obj = got
                if abs(got - want) > _tol(want):
                    failures.append({"family": fam, "x": x.tolist(), "gamma": gamma, "fast": got, "brute": want})
            seg = segmentation_dp(x, model, gamma).objective
            if abs(seg - rp_obj) > _tol(seg):
                failures.append({"family": "segmentation", "x": x.tolist(), "gamma": gamma, "fast": rp_obj, "brute": seg})
        out[name] = {"instances": instances, "failures": failures[:5], "n_failures": len(failures), "pass": not failures}
    return {"suite": "oracle", "models": out, "pass": all(v["pass"] for v in out.values())}


def suite_nesting(instances: int = 300, seed: int = 0, **_):
    rng = np.random.default_rng(seed)
    failures = []
    for i in range(instances):
        name = MODEL_NAMES[i % 3]
        n = int(2 ** rng.integers(0, 7))
        model, _theta, x = random_problem(name, n, rng)
        gamma = float(rng.uniform(0.0, 3.0))
        t = estimate_threshold(x, model, gamma).objective
        d = estimate_rdp(x, model, gamma).objective
        r = estimate_rp(x, model, gamma).objective
        if t > d + _tol(d) or r > d + _tol(d):
            failures.append({"model": name, "x": x.tolist(), "gamma": gamma, "T": t, "RDP": d, "RP": r})
    return {"suite": "nesting", "instances": instances, "failures": failures[:5], "pass": not failures}


def suite_kraft(n: int | None = None, gamma: float = 1.5, **_):
    sizes = [n] if n is not None else [4, 9]
    reports = [kraft_sum(k, gamma).to_dict() for k in sizes]
    ok = all(r["pass"] for r in reports)
    report = {"suite": "kraft", "gamma": gamma, "reports": reports}
    if n is None and gamma >= 1.5:
        worst = max(kraft_formula_bound(k, gamma) for k in range(4, 4097))
        report["max_formula_bound_4_to_4096"] = worst
        ok = ok and worst <= 1.0
    if len(reports) == 1:
        report.update(reports[0])
    report["pass"] = bool(ok)
    return report


ORACLE_CASES = (
    ("poisson", (1.0, 1.0, 2.0, 2.0), (1.0, 2.0)),
    ("poisson", (0.7, 1.3, 2.6, 1.9), (0.5, 3.0)),
    ("gaussian", (0.0, 0.0, 1.0, 1.0), (0.0, 1.0)),
    ("gaussian", (-0.4, 0.3, 1.8, 1.1), (-1.0, 2.0)),
)


def suite_theorem7(reps: int = 2000, seed: int = 0, gamma: float = 1.5, **_):
    cases = []
    for i, (name, theta, (lo, hi)) in enumerate(ORACLE_CASES):
        model = Poisson() if name == "poisson" else Gaussian(1.0)
        grid = QuantizationGrid.for_n(lo, hi, len(theta))
        rep = oracle_bound_check(np.array(theta), model, gamma, grid, reps, seed + i)
        cases.append({"model": name, "theta": list(theta), "grid": grid.values.tolist(), **rep.to_dict()})
    return {"suite": "theorem7", "gamma": gamma, "cases": cases, "pass": all(c["pass"] for c in cases)}


SUITES = {
    "factorization": suite_factorization,
    "roundtrip": suite_roundtrip,
    "oracle": suite_oracle,
    "kraft": suite_kraft,
    "theorem7": suite_theorem7,
    "nesting": suite_nesting,
}


def run_suite(name: str, **kwargs) -> dict:
    try:
        fn = SUITES[name]
    except KeyError:
        raise InvalidConfig(f"unknown suite {name!r}; choose from {sorted(SUITES)}") from None
    return fn(**{k: v for k, v in kwargs.items() if v is not None})
