"""Generalized super-twisting observer (GSTO) and its high-gain degeneration.

For subsystem ``i`` with ``e_i1 = xhat_i1 - y_i``::

    dxhat_i1/dt = -gamma_i   l_i1 g_i phi1(e_i1) + f1_i(y, u, xhat_12 .. xhat_(i-1)2) + g_i xhat_i2
    dxhat_i2/dt = -gamma_i^2 l_i2 g_i phi2(e_i1) + f2_i(xhat, u)

Setting ``mu1 = 0`` removes the square-root and sign terms and leaves a
continuous high-gain observer (HGO).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from gsto.sta_core import MuPair, phi1, phi2
from gsto.system_model import InterconnectedSystem, ModelError, _checked_g, measured_channel

GSTO = "gsto"
HGO = "hgo"


@dataclass(frozen=True)
class SubsystemGains:
    l1: float
    l2: float
    gamma: float
    mu: MuPair

    def __post_init__(self):
        if isinstance(self.mu, (tuple, list)):
            object.__setattr__(self, "mu", MuPair(*self.mu))
        for name in ("l1", "l2", "gamma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")


@dataclass(frozen=True)
class ObserverGains:
    subsystems: tuple[SubsystemGains, ...]

    def __post_init__(self):
        object.__setattr__(self, "subsystems", tuple(self.subsystems))

    @classmethod
    def from_arrays(cls, l1, l2, gamma, mu) -> "ObserverGains":
        """Build from per-subsystem sequences; ``mu`` is a list of ``(mu1, mu2)``."""
        n = len(gamma)
        l1 = _broadcast(l1, n)
        l2 = _broadcast(l2, n)
        return cls(tuple(
            SubsystemGains(float(l1[i]), float(l2[i]), float(gamma[i]), MuPair(*map(float, mu[i])))
            for i in range(n)
        ))

    @property
    def mode(self) -> str:
        return HGO if all(g.mu.mu1 == 0.0 for g in self.subsystems) else GSTO

    def as_hgo(self) -> "ObserverGains":
        return ObserverGains(tuple(replace(g, mu=MuPair(0.0, g.mu.mu2)) for g in self.subsystems))

    def with_gamma(self, gamma: Sequence[float]) -> "ObserverGains":
        return ObserverGains(tuple(replace(g, gamma=float(gm)) for g, gm in zip(self.subsystems, gamma)))

    def to_dict(self) -> dict:
        return {
            "l1": [g.l1 for g in self.subsystems],
            "l2": [g.l2 for g in self.subsystems],
            "gamma": [g.gamma for g in self.subsystems],
            "mu": [[g.mu.mu1, g.mu.mu2] for g in self.subsystems],
        }


def _broadcast(v, n):
    if np.ndim(v) == 0:
        return [v] * n
    if len(v) != n:
        raise ValueError(f"expected {n} values, got {len(v)}")
    return v


@dataclass(frozen=True)
class KnownParts:
    """What the observer is allowed to know about one subsystem."""

    f1: Callable
    f2: Callable
    g: Callable
    g_bounds: tuple[float, float]


@dataclass(frozen=True)
class ObserverPlant:
    known: tuple[KnownParts, ...]
    gains: ObserverGains
    mode: str = GSTO

    def __post_init__(self):
        if len(self.known) != len(self.gains.subsystems):
            raise ValueError("one gain set per subsystem is required")
        if self.mode not in (GSTO, HGO):
            raise ValueError(f"unknown observer mode {self.mode!r}")
        if self.mode == HGO and any(g.mu.mu1 != 0.0 for g in self.gains.subsystems):
            object.__setattr__(self, "gains", self.gains.as_hgo())
        if self.mode == GSTO and any(g.mu.mu1 <= 0.0 for g in self.gains.subsystems):
            raise ValueError("GSTO mode needs mu1 > 0 on every subsystem; use mode='hgo' for mu1 = 0")

    @classmethod
    def from_system(cls, sys: InterconnectedSystem, gains: ObserverGains, mode: str | None = None):
        known = tuple(KnownParts(s.f1, s.f2, s.g, s.g_bounds) for s in sys.subsystems)
        return cls(known, gains, mode or gains.mode)

    @property
    def N(self) -> int:
        return len(self.known)

    # duck-typed so measured_channel() accepts an observer as well as a plant
    @property
    def subsystems(self):
        return self.known


def _injection_hgo(e, gs: SubsystemGains):
    m2 = gs.mu.mu2
    return m2 * e, m2 * m2 * e


def eval_observer_rhs(obs: ObserverPlant, xhat, y, u, t) -> np.ndarray:
    xhat = np.asarray(xhat, dtype=float)
    y = np.asarray(y, dtype=float)
    xh2 = xhat[1::2]
    f1, g = measured_channel(obs, y, u, xh2, t)
    hgo = obs.mode == HGO
    out = np.empty(2 * obs.N)
    for i, (kp, gs) in enumerate(zip(obs.known, obs.gains.subsystems)):
        e = xhat[2 * i] - y[i]
        if hgo:
            p1, p2 = _injection_hgo(e, gs)
        else:
            p1, p2 = phi1(e, gs.mu), phi2(e, gs.mu)
        gm = gs.gamma
        out[2 * i] = -gm * gs.l1 * g[i] * p1 + f1[i] + g[i] * xh2[i]
        f2 = kp.f2(xhat, u, t)
        if not math.isfinite(f2):
            raise ModelError(f"observer f2_{i + 1} non-finite at t={t}", index=i, t=t)
        out[2 * i + 1] = -gm * gm * gs.l2 * g[i] * p2 + f2
    return out


def rho_terms(sys: InterconnectedSystem, x, xhat, u, w, t) -> tuple[np.ndarray, np.ndarray]:
    """Interconnection residuals ``(rho_i1, rho_i2)`` seen by the error dynamics."""
    x = np.asarray(x, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    y = x[0::2]
    x2, xh2 = x[1::2], xhat[1::2]
    r1 = np.empty(sys.N)
    r2 = np.empty(sys.N)
    for i, s in enumerate(sys.subsystems):
        r1[i] = 0.0 if i == 0 else s.f1(y, u, xh2[:i], t) - s.f1(y, u, x2[:i], t)
        r2[i] = s.f2(xhat, u, t) - s.f2(x, u, t) - s.delta(x, u, w, t)
    return r1, r2


def eval_error_rhs(sys: InterconnectedSystem, obs: ObserverPlant, x, xhat, u, w, t) -> np.ndarray:
    """Time derivative of ``e = xhat - x`` assembled from its closed form.

    Uses the noise-free output, so it must agree with
    ``eval_observer_rhs(xhat, y) - eval_plant_rhs(x)`` up to rounding.
    """
    x = np.asarray(x, dtype=float)
    xhat = np.asarray(xhat, dtype=float)
    y = x[0::2]
    e = xhat - x
    r1, r2 = rho_terms(sys, x, xhat, u, w, t)
    hgo = obs.mode == HGO
    out = np.empty(sys.n_states)
    for i, (s, gs) in enumerate(zip(sys.subsystems, obs.gains.subsystems)):
        gv = _checked_g(s, i, y, u, t)
        e1, e2 = e[2 * i], e[2 * i + 1]
        p1, p2 = _injection_hgo(e1, gs) if hgo else (phi1(e1, gs.mu), phi2(e1, gs.mu))
        out[2 * i] = -gs.gamma * gs.l1 * gv * p1 + gv * e2 + r1[i]
        out[2 * i + 1] = -gs.gamma ** 2 * gs.l2 * gv * p2 + r2[i]
    return out
