"""Command line front end: ``mslik {estimate,simulate,decompose,risk-sweep,verify}``.

Exit status is 0 on success, 1 when a verification suite fails, 2 for an
invalid configuration and 3 for an I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .errors import InvalidArgument, InvalidConfig, InvalidData, InvalidParams, InvalidSignal, InvalidSplit, ResourceLimit
from .estimators import ESTIMATORS, PenaltyConfig, THEORY_GAMMA
from .models import Multinomial, decompose, draw_observations, model_from_name, sample_theta_from_signal
from .partition import balanced_crp, dyadic_crp, is_power_of_two
from .risk import METRICS, monte_carlo_risk
from .signals import PRESETS, SignalSpec, make_signal, preset
from .verify import SUITES, run_suite

log = logging.getLogger("mslik")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3
CONFIG_ERRORS = (InvalidArgument, InvalidConfig, InvalidData, InvalidParams, InvalidSignal, InvalidSplit, ResourceLimit)


@dataclass
class RunConfig:
    command: str
    model: str = "poisson"
    sigma: float | None = None
    n_total: int | None = None
    estimator: str = "rdp"
    gamma: float = 1.5
    input: str | None = None
    output: str | None = None
    fitted: str | None = None
    theta_output: str | None = None
    summary: str | None = None
    seed: int = 0
    n: int | None = None
    n_list: list = field(default_factory=list)
    reps: int | None = None
    signal: str = "blocks"
    suite: str | None = None
    tree: str | None = None
    metric: str = "hellinger"
    jobs: int = 1

    def validate(self):
        if not (self.gamma >= 0 and math.isfinite(self.gamma)):
            raise InvalidConfig(f"--gamma must be finite and >= 0, got {self.gamma}")
        if self.gamma < THEORY_GAMMA:
            log.warning("gamma=%g is below 3/2; the risk guarantees do not apply", self.gamma)
        if self.sigma is not None and not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise InvalidConfig(f"--sigma must be finite and > 0, got {self.sigma}")
        if self.n_total is not None and self.n_total < 1:
            raise InvalidConfig(f"--n-total must be >= 1, got {self.n_total}")
        if self.jobs < 1:
            raise InvalidConfig(f"--jobs must be >= 1, got {self.jobs}")


def estimate_sigma_mad(x) -> float:
    """Noise level from the finest-scale Haar coefficients: ``median(|d|) / 0.6745``."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InvalidArgument("sigma estimate needs at least two observations")
    if not is_power_of_two(x.size):
        raise InvalidArgument(f"sigma estimate needs a power-of-two length, got {x.size}")
    d = (x[1::2] - x[0::2]) / math.sqrt(2.0)
    return float(np.median(np.abs(d)) / 0.6745)


def _load_signal(text: str) -> SignalSpec:
    if text in PRESETS:
        return preset(text)
    path = Path(text)
    if path.suffix == ".json" or path.exists():
        return SignalSpec.from_dict(io.read_json(path))
    raise InvalidConfig(f"--signal: unknown preset {text!r}; choose from {sorted(PRESETS)} or give a JSON file")


def _need(cfg, name):
    if getattr(cfg, name) in (None, []):
        raise InvalidConfig(f"--{name.replace('_', '-')} is required for '{cfg.command}'")
    return getattr(cfg, name)


def _emit(cfg, payload):
    text = io.dumps(payload)
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_estimate(cfg: RunConfig) -> int:
    x = io.read_vector(_need(cfg, "input"))
    if cfg.estimator not in ESTIMATORS:
        raise InvalidConfig(f"--estimator must be one of {sorted(ESTIMATORS)}")
    if cfg.estimator in ("threshold", "rdp") and not is_power_of_two(x.size):
        raise InvalidConfig(
            f"--estimator {cfg.estimator} needs a power-of-two number of rows, got {x.size}; pad the input explicitly"
        )
    sigma, n_total = cfg.sigma, cfg.n_total
    if cfg.model == "gaussian" and sigma is None:
        sigma = estimate_sigma_mad(x)
        log.warning("--sigma not given; using the Haar MAD estimate %.6g", sigma)
        if sigma <= 0:
            raise InvalidConfig("--sigma not given and the MAD estimate is 0; pass --sigma")
    if cfg.model == "multinomial" and n_total is None:
        n_total = int(round(x.sum()))
        log.info("--n-total not given; using the observed total %d", n_total)
    model = model_from_name(cfg.model, sigma=sigma, n_total=n_total)
    pen = PenaltyConfig(cfg.gamma, x.size)
    result = ESTIMATORS[cfg.estimator](x, model, pen)
    payload = result.to_dict()
    payload["n_leaves"] = int(x.size)
    payload["theory_ok"] = pen.theory_ok
    _emit(cfg, payload)
    if cfg.fitted:
        io.write_vector(cfg.fitted, result.theta_hat)
    return EXIT_OK


def cmd_simulate(cfg: RunConfig) -> int:
    n = _need(cfg, "n")
    if n < 1:
        raise InvalidConfig("--n must be >= 1")
    spec = _load_signal(cfg.signal)
    n_total = cfg.n_total if cfg.n_total is not None else n
    model = model_from_name(cfg.model, sigma=cfg.sigma, n_total=n_total)
    signal_obj = None
    if isinstance(model, Multinomial):
        # multinomial cells need a density: rescale the signal's shape
        signal_obj = make_signal(spec)
        if abs(signal_obj.integral() - 1.0) > 1e-9:
            signal_obj = signal_obj.normalized()
    theta = sample_theta_from_signal(signal_obj or spec, n, model)
    x = draw_observations(theta, model, cfg.seed)
    out = _need(cfg, "output")
    io.write_vector(out, x)
    if cfg.theta_output:
        io.write_vector(cfg.theta_output, theta)
    return EXIT_OK


def cmd_decompose(cfg: RunConfig) -> int:
    theta = io.read_vector(_need(cfg, "input"))
    model = model_from_name(cfg.model, sigma=cfg.sigma, n_total=cfg.n_total or 1)
    kind = cfg.tree or ("dyadic" if is_power_of_two(theta.size) else "balanced")
    if kind == "dyadic":
        if not is_power_of_two(theta.size):
            raise InvalidConfig(f"--tree dyadic needs a power-of-two number of rows, got {theta.size}")
        tree = dyadic_crp(theta.size)
    elif kind == "balanced":
        tree = balanced_crp(theta.size)
    else:
        raise InvalidConfig("--tree must be 'dyadic' or 'balanced'")
    ms = decompose(theta, tree, model)
    _emit(cfg, {"model": model.name, "tree": kind, **ms.to_dict()})
    return EXIT_OK


def cmd_risk_sweep(cfg: RunConfig) -> int:
    n_list = _need(cfg, "n_list")
    reps = cfg.reps if cfg.reps is not None else 50
    spec = _load_signal(cfg.signal)
    model = model_from_name(cfg.model, sigma=cfg.sigma, n_total=cfg.n_total or 1)
    curve = monte_carlo_risk(spec, model, cfg.estimator, cfg.gamma, n_list, reps, cfg.seed, cfg.metric, cfg.jobs)
    summary = {
        "model": model.name,
        "estimator": cfg.estimator,
        "gamma": cfg.gamma,
        "signal": spec.to_dict(),
        "seed": cfg.seed,
        **curve.summary(),
        "strictly_decreasing": curve.strictly_decreasing(),
    }
    rows = [[r["n"], r["risk"], r["stderr"], r["reps"]] for r in curve.rows()]
    if cfg.output:
        io.write_table(cfg.output, ["n", "risk", "stderr", "reps"], rows)
    else:
        sys.stdout.write("n,risk,stderr,reps\n")
        for row in rows:
            sys.stdout.write(",".join(io.format_number(v) for v in row) + "\n")
    if cfg.summary:
        io.write_json(cfg.summary, summary)
    else:
        sys.stderr.write(io.dumps(summary))
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    suite = _need(cfg, "suite")
    if suite not in SUITES and suite != "all":
        raise InvalidConfig(f"--suite must be one of {sorted(SUITES)} or 'all'")
    names = sorted(SUITES) if suite == "all" else [suite]
    reports = []
    for name in names:
        kwargs = {"seed": cfg.seed}
        if name == "kraft":
            kwargs.update(n=cfg.n, gamma=cfg.gamma)
        if name == "theorem7":
            kwargs.update(reps=cfg.reps, gamma=cfg.gamma)
        reports.append(run_suite(name, **kwargs))
        log.info("suite %s: %s", name, "pass" if reports[-1]["pass"] else "FAIL")
    payload = reports[0] if len(reports) == 1 else {"suite": "all", "reports": reports}
    payload["pass"] = all(r["pass"] for r in reports)
    _emit(cfg, payload)
    return EXIT_OK if payload["pass"] else EXIT_VERIFY


COMMANDS = {
    "estimate": cmd_estimate,
    "simulate": cmd_simulate,
    "decompose": cmd_decompose,
    "risk-sweep": cmd_risk_sweep,
    "verify": cmd_verify,
}


def run(cfg: RunConfig) -> int:
    cfg.validate()
    return COMMANDS[cfg.command](cfg)


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", choices=["gaussian", "poisson", "multinomial"], default="poisson")
    common.add_argument("--sigma", type=float, help="Gaussian noise level (known)")
    common.add_argument("--n-total", type=int, dest="n_total", help="multinomial sample size")
    common.add_argument("--estimator", choices=sorted(ESTIMATORS), default="rdp")
    common.add_argument("--gamma", type=float, default=1.5, help="penalty lambda = gamma * ln(N)")
    common.add_argument("--input")
    common.add_argument("--output")
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="mslik", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", parents=[common], help="fit an estimator to observations in a CSV file")
    p.add_argument("--fitted", help="also write fitted values as CSV")

    p = sub.add_parser("simulate", parents=[common], help="draw observations from a test signal")
    p.add_argument("--n", type=int, help="grid size")
    p.add_argument("--signal", default="blocks", help=f"preset {sorted(PRESETS)} or SignalSpec JSON file")
    p.add_argument("--theta-output", dest="theta_output", help="also write the true parameter vector")

    p = sub.add_parser("decompose", parents=[common], help="multiscale parameters of a parameter vector")
    p.add_argument("--tree", choices=["dyadic", "balanced"])

    p = sub.add_parser("risk-sweep", parents=[common], help="Monte Carlo risk curve over grid sizes")
    p.add_argument("--n-list", type=_int_list, dest="n_list", default=[])
    p.add_argument("--reps", type=int)
    p.add_argument("--signal", default="blocks")
    p.add_argument("--metric", choices=list(METRICS), default="hellinger")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--summary", help="write the slope summary JSON here")

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("--suite", choices=sorted(SUITES) + ["all"])
    p.add_argument("--n", type=int, help="grid size for the kraft suite")
    p.add_argument("--reps", type=int, help="Monte Carlo replicates for the theorem7 suite")
    return parser


def _setup_logging():
    level = os.environ.get("MSLIK_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="mslik: %(levelname)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    cfg = RunConfig(**{k: v for k, v in vars(args).items() if k in RunConfig.__dataclass_fields__})
    try:
        return run(cfg)
    except CONFIG_ERRORS as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
