"""Piecewise test signals on [0, 1) with exact cell integrals.

Every signal is stored as a piecewise-linear function (jumps allowed at
knots), which covers flat blocks, ramps and rectangular spikes and keeps
cell integrals in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgument

__all__ = ["SignalSpec", "Signal", "make_signal", "preset", "PRESETS"]

KINDS = ("constant", "blocks", "ramp", "spikes")


@dataclass(frozen=True)
class SignalSpec:
    """Declarative description of a test signal.

    Parameters
    ----------
    kind : {"constant", "blocks", "ramp", "spikes"}
    breakpoints : tuple of float
        Jump locations for ``blocks``; spike centres for ``spikes``.
    levels : tuple of float
        ``constant``: ``(c,)``. ``blocks``: one level per block.
        ``ramp``: ``(value_at_0, value_at_1)``. ``spikes``: baseline
        followed by one height per spike.
    width : float
        Width of each rectangular spike.
    clamp : (lower, upper) or None
        Clip the signal into ``[lower, upper]``.
    """

    kind: str = "constant"
    breakpoints: tuple = ()
    levels: tuple = (1.0,)
    width: float = 0.02
    clamp: tuple | None = None

    def to_dict(self):
        return {
            "kind": self.kind,
            "breakpoints": list(self.breakpoints),
            "levels": list(self.levels),
            "width": self.width,
            "clamp": None if self.clamp is None else list(self.clamp),
        }

    @classmethod
    def from_dict(cls, data):
        clamp = data.get("clamp")
        return cls(
            kind=data.get("kind", "constant"),
            breakpoints=tuple(float(b) for b in data.get("breakpoints", ())),
            levels=tuple(float(v) for v in data.get("levels", (1.0,))),
            width=float(data.get("width", 0.02)),
            clamp=None if clamp is None else (float(clamp[0]), float(clamp[1])),
        )


@dataclass(frozen=True)
class Signal:
    """Piecewise-linear function: on ``[knots[k], knots[k+1])`` it equals
    ``values[k] + slopes[k] * (t - knots[k])``."""

    knots: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    spec: SignalSpec | None = field(default=None, compare=False)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, self.values.size - 1)
        return self.values[k] + self.slopes[k] * (t - self.knots[k])

    def _piece_integrals(self):
        w = np.diff(self.knots)
        return self.values * w + 0.5 * self.slopes * w * w

    def antiderivative(self, t):
        """``F(t) = integral of the signal over [0, t]``."""
        t = np.asarray(t, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(self._piece_integrals())])
        k = np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, self.values.size - 1)
        d = t - self.knots[k]
        return cum[k] + self.values[k] * d + 0.5 * self.slopes[k] * d * d

    def cell_integrals(self, n_leaves: int) -> np.ndarray:
        edges = np.arange(n_leaves + 1) / n_leaves
        return np.diff(self.antiderivative(edges))

    def integral(self) -> float:
        return float(np.sum(self._piece_integrals()))

    def total_variation(self) -> float:
        w = np.diff(self.knots)
        inner = float(np.sum(np.abs(self.slopes) * w))
        ends = self.values[:-1] + self.slopes[:-1] * w[:-1]
        jumps = float(np.sum(np.abs(self.values[1:] - ends)))
        return inner + jumps

    def min(self) -> float:
        w = np.diff(self.knots)
        return float(min(self.values.min(), (self.values + self.slopes * w).min()))

    def max(self) -> float:
        w = np.diff(self.knots)
        return float(max(self.values.max(), (self.values + self.slopes * w).max()))

    def scaled(self, factor: float) -> "Signal":
        return Signal(self.knots, self.values * factor, self.slopes * factor, self.spec)

    def normalized(self) -> "Signal":
        """Rescale to unit integral (a density on [0, 1))."""
        total = self.integral()
        if total <= 0:
            raise InvalidArgument("signal has nonpositive integral and cannot be normalized")
        return self.scaled(1.0 / total)


def _flat(bounds, levels):
    knots = np.asarray(bounds, dtype=float)
    return knots, np.asarray(levels, dtype=float), np.zeros(len(levels))


def _clamp(knots, values, slopes, lo, hi):
    out_k, out_v, out_s = [], [], []
    for k in range(values.size):
        t0, t1 = knots[k], knots[k + 1]
        a, s = values[k], slopes[k]
        cuts = [t0, t1]
        if s != 0:
            for level in (lo, hi):
                tc = t0 + (level - a) / s
                if t0 < tc < t1:
                    cuts.append(tc)
        cuts = sorted(cuts)
        for u, v in zip(cuts[:-1], cuts[1:]):
            if v <= u:
                continue
            mid = a + s * ((u + v) / 2 - t0)
            out_k.append(u)
            if mid > hi:
                out_v.append(hi)
                out_s.append(0.0)
            elif mid < lo:
                out_v.append(lo)
                out_s.append(0.0)
            else:
                out_v.append(a + s * (u - t0))
                out_s.append(s)
    out_k.append(knots[-1])
    return np.array(out_k), np.array(out_v), np.array(out_s)


def make_signal(spec: SignalSpec) -> Signal:
    if spec.kind not in KINDS:
        raise InvalidArgument(f"unknown signal kind {spec.kind!r}")
    levels = np.asarray(spec.levels, dtype=float)
    bps = np.asarray(spec.breakpoints, dtype=float)
    if levels.size == 0 or not np.all(np.isfinite(levels)):
        raise InvalidArgument("signal levels must be finite and nonempty")
    if spec.kind in ("blocks", "spikes"):
        if np.any(np.diff(bps) <= 0):
            raise InvalidArgument("breakpoints must be strictly increasing")
        if bps.size and (bps[0] <= 0 or bps[-1] >= 1):
            raise InvalidArgument("breakpoints must lie inside (0, 1)")

    if spec.kind == "constant":
        knots, values, slopes = _flat([0.0, 1.0], levels[:1])
    elif spec.kind == "blocks":
        if levels.size != bps.size + 1:
            raise InvalidArgument("blocks need one more level than breakpoints")
        knots, values, slopes = _flat(np.concatenate([[0.0], bps, [1.0]]), levels)
    elif spec.kind == "ramp":
        if levels.size != 2:
            raise InvalidArgument("ramp needs (value_at_0, value_at_1)")
        knots, values, slopes = np.array([0.0, 1.0]), levels[:1].copy(), np.array([levels[1] - levels[0]])
    else:
        if levels.size != bps.size + 1:
            raise InvalidArgument("spikes need a baseline plus one height per centre")
        if not spec.width > 0:
            raise InvalidArgument("spike width must be positive")
        lo = np.clip(bps - spec.width / 2, 0.0, 1.0)
        hi = np.clip(bps + spec.width / 2, 0.0, 1.0)
        bounds = np.unique(np.concatenate([[0.0, 1.0], lo, hi]))
        mids = (bounds[:-1] + bounds[1:]) / 2
        vals = np.full(mids.size, levels[0])
        for c0, c1, h in zip(lo, hi, levels[1:]):
            vals[(mids >= c0) & (mids < c1)] += h
        knots, values, slopes = _flat(bounds, vals)

    if spec.clamp is not None:
        lo, hi = spec.clamp
        if not lo < hi:
            raise InvalidArgument("clamp needs lower < upper")
        knots, values, slopes = _clamp(knots, values, slopes, float(lo), float(hi))
    return Signal(knots, values, slopes, spec)


# Blocks used by the rate checks: total variation 4, levels within [1, 8].
PRESETS = {
    "constant": SignalSpec("constant", levels=(4.0,)),
    "blocks": SignalSpec("blocks", breakpoints=(0.3, 0.55, 0.8), levels=(2.0, 4.0, 3.0, 4.0)),
    "ramp": SignalSpec("ramp", levels=(1.0, 8.0)),
    "spikes": SignalSpec("spikes", breakpoints=(0.2, 0.5, 0.7), levels=(2.0, 4.0, 3.0, 5.0), width=0.03),
}


def preset(name: str, **overrides) -> SignalSpec:
    try:
        spec = PRESETS[name]
    except KeyError:
        raise InvalidArgument(f"unknown signal preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(spec, **overrides) if overrides else spec
