"""Cascaded interconnected plants in observable canonical form.

Each subsystem ``i`` has a measured state ``x_i1`` and an unmeasured state
``x_i2``::

    dx_i1/dt = f1_i(y, u, x_12 .. x_(i-1)2, t) + g_i(y, u, t) * x_i2
    dx_i2/dt = f2_i(x, u, t) + delta_i(x, u, w, t)

The flat state vector interleaves the pairs, ``[x_11, x_12, x_21, x_22, ...]``.
``delta`` is truth-side only; observers never see it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np


class ModelError(RuntimeError):
    """A model function returned something unusable."""

    def __init__(self, message, index=None, t=None):
        super().__init__(message)
        self.index = index
        self.t = t


class BoundViolationError(ModelError):
    """``g_i`` left its declared interval, or fell below the inversion guard."""


def _zero_delta(x, u, w, t):
    return 0.0


@dataclass(frozen=True)
class SubsystemModel:
    f1: Callable
    f2: Callable
    g: Callable
    g_bounds: tuple[float, float]
    delta: Callable = _zero_delta
    name: str = ""

    def __post_init__(self):
        lo, hi = self.g_bounds
        if not (0.0 < lo <= hi and math.isfinite(hi)):
            raise ValueError(f"g_bounds must satisfy 0 < g_m <= g_M < inf, got {self.g_bounds}")


@dataclass(frozen=True)
class StateLayout:
    n_subsystems: int

    @property
    def n_states(self) -> int:
        return 2 * self.n_subsystems

    def index(self, i: int, j: int) -> int:
        """Flat index of ``x_ij`` with 1-based ``i`` and ``j`` in {1, 2}."""
        if not (1 <= i <= self.n_subsystems and j in (1, 2)):
            raise IndexError(f"no state x_{i}{j} in a {self.n_subsystems}-subsystem layout")
        return 2 * (i - 1) + (j - 1)

    def pair(self, k: int) -> tuple[int, int]:
        if not 0 <= k < self.n_states:
            raise IndexError(k)
        return k // 2 + 1, k % 2 + 1

    def labels(self) -> list[str]:
        return [f"{i}{j}" for i in range(1, self.n_subsystems + 1) for j in (1, 2)]


@dataclass(frozen=True)
class InterconnectedSystem:
    subsystems: tuple[SubsystemModel, ...]
    m: int = 0
    name: str = "system"
    layout: StateLayout = field(init=False)

    def __post_init__(self):
        subs = tuple(self.subsystems)
        if len(subs) < 1:
            raise ValueError("at least one subsystem is required")
        object.__setattr__(self, "subsystems", subs)
        object.__setattr__(self, "layout", StateLayout(len(subs)))

    @property
    def N(self) -> int:
        return len(self.subsystems)

    @property
    def n_states(self) -> int:
        return 2 * self.N

    def output(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float)[0::2]

    def without_perturbation(self) -> "InterconnectedSystem":
        """Copy with every ``delta_i`` replaced by zero."""
        subs = tuple(replace(s, delta=_zero_delta) for s in self.subsystems)
        return replace(self, subsystems=subs)


def _checked_g(sub: SubsystemModel, i: int, y, u, t) -> float:
    gv = sub.g(y, u, t)
    lo, hi = sub.g_bounds
    if not (lo <= gv <= hi):
        raise BoundViolationError(
            f"g_{i + 1}(y, u, t={t}) = {gv!r} outside declared bounds [{lo}, {hi}]",
            index=i, t=t,
        )
    return gv


def _finite(value, what: str, i: int, t) -> float:
    if not math.isfinite(value):
        raise ModelError(f"{what}_{i + 1} returned non-finite value {value!r} at t={t}", index=i, t=t)
    return value


def measured_channel(sys: InterconnectedSystem, y, u, x2, t) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(f1_i, g_i)`` for all subsystems.

    ``x2`` supplies the unmeasured states read by the cascade; the plant passes
    its true ones, the observer its estimates.
    """
    n = sys.N
    f1 = np.empty(n)
    g = np.empty(n)
    for i, sub in enumerate(sys.subsystems):
        f1[i] = _finite(sub.f1(y, u, x2[:i], t), "f1", i, t)
        g[i] = _checked_g(sub, i, y, u, t)
    return f1, g


def eval_plant_rhs(sys: InterconnectedSystem, x, u, w, t) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (sys.n_states,):
        raise ValueError(f"state has shape {x.shape}, expected ({sys.n_states},)")
    y = x[0::2]
    x2 = x[1::2]
    f1, g = measured_channel(sys, y, u, x2, t)
    dx = np.empty(sys.n_states)
    dx[0::2] = f1 + g * x2
    for i, sub in enumerate(sys.subsystems):
        dx[2 * i + 1] = _finite(sub.f2(x, u, t) + sub.delta(x, u, w, t), "f2+delta", i, t)
    if not np.all(np.isfinite(dx[0::2])):
        k = int(np.flatnonzero(~np.isfinite(dx))[0])
        raise ModelError(f"non-finite derivative at flat index {k}, t={t}", index=k // 2, t=t)
    return dx


def observability_map(sys: InterconnectedSystem, x, u, t) -> tuple[np.ndarray, np.ndarray]:
    """``(y, dy/dt)`` as a function of the state; independent of ``delta`` and ``w``."""
    x = np.asarray(x, dtype=float)
    y = x[0::2].copy()
    x2 = x[1::2]
    f1, g = measured_channel(sys, y, u, x2, t)
    return y, f1 + g * x2


def invert_observability(sys: InterconnectedSystem, y, ydot, u, t) -> np.ndarray:
    """Recover the state from ``(y, dy/dt)``, upstream subsystems first."""
    y = np.asarray(y, dtype=float)
    ydot = np.asarray(ydot, dtype=float)
    x = np.empty(sys.n_states)
    x[0::2] = y
    x2 = np.empty(sys.N)
    for i, sub in enumerate(sys.subsystems):
        gv = sub.g(y, u, t)
        if not gv >= sub.g_bounds[0]:
            raise BoundViolationError(
                f"g_{i + 1} = {gv!r} below guard g_m = {sub.g_bounds[0]}; cannot divide", index=i, t=t
            )
        f1 = sub.f1(y, u, x2[:i], t)
        x2[i] = (ydot[i] - f1) / gv
    x[1::2] = x2
    return x


@dataclass
class ValidationReport:
    n_subsystems: int
    n_states: int
    n_outputs: int
    input_dim: int
    n_probes: int = 0
    g_observed: list[tuple[float, float]] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    gains_ok: bool | None = None

    @property
    def ok(self) -> bool:
        return not self.violations and self.gains_ok is not False

    def to_dict(self) -> dict:
        return {
            "n_subsystems": self.n_subsystems,
            "n_states": self.n_states,
            "n_outputs": self.n_outputs,
            "input_dim": self.input_dim,
            "n_probes": self.n_probes,
            "g_observed": [list(r) for r in self.g_observed],
            "violations": list(self.violations),
            "gains_ok": self.gains_ok,
        }


def validate_system(
    sys: InterconnectedSystem,
    probes: Iterable[tuple[Sequence[float], Sequence[float], float]] = (),
    gains=None,
) -> ValidationReport:
    """Probe ``g_i`` on ``(y, u, t)`` samples and check the declared bounds.

    When ``gains`` (an ``ObserverGains``) is given, also check ``l1, l2, gamma > 0``.
    Findings are collected, never raised.
    """
    rep = ValidationReport(sys.N, sys.n_states, sys.N, sys.m)
    lo_seen = [math.inf] * sys.N
    hi_seen = [-math.inf] * sys.N
    for y, u, t in probes:
        rep.n_probes += 1
        y = np.asarray(y, dtype=float)
        if y.shape != (sys.N,):
            rep.violations.append(f"probe output has shape {y.shape}, expected ({sys.N},)")
            continue
        for i, sub in enumerate(sys.subsystems):
            try:
                gv = float(sub.g(y, u, t))
            except Exception as exc:  # report, don't raise
                rep.violations.append(f"g_{i + 1} raised {exc!r} at y={y.tolist()}, t={t}")
                continue
            lo, hi = sub.g_bounds
            if not math.isfinite(gv) or not (lo <= gv <= hi):
                rep.violations.append(
                    f"g_{i + 1} = {gv!r} outside [{lo}, {hi}] at y={y.tolist()}, t={t}"
                )
            if math.isfinite(gv):
                lo_seen[i] = min(lo_seen[i], gv)
                hi_seen[i] = max(hi_seen[i], gv)
    rep.g_observed = list(zip(lo_seen, hi_seen))
    if gains is not None:
        if len(gains.subsystems) != sys.N:
            rep.violations.append(f"{len(gains.subsystems)} gain sets for {sys.N} subsystems")
            rep.gains_ok = False
        else:
            bad = [
                i + 1 for i, gs in enumerate(gains.subsystems)
                if not (gs.l1 > 0 and gs.l2 > 0 and gs.gamma > 0)
            ]
            rep.gains_ok = not bad
            for i in bad:
                rep.violations.append(f"subsystem {i}: l1, l2 and gamma must be positive")
    return rep
