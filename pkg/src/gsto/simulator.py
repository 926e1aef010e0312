"""Fixed-step co-simulation of a plant and its observer.

The observer only receives ``y_meas = y + noise`` sampled at the start of each
step (zero-order hold). Explicit Euler is the reference scheme: with a
discontinuous right-hand side higher-order methods lose their order anyway.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from gsto.observer import ObserverPlant, eval_observer_rhs
from gsto.system_model import InterconnectedSystem, ModelError, eval_plant_rhs

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12
EPS_REL = 1e-12


class DivergenceError(ModelError):
    """A state left the finite range; carries the failing time in ``t``."""


def _no_input(t):
    return np.zeros(0)


@dataclass(frozen=True)
class NoiseModel:
    """Additive measurement noise, one callable ``n_i(t)`` per output channel."""

    channels: tuple[Callable[[float], float], ...]
    amplitudes: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))

    @classmethod
    def sinusoid(cls, amplitudes: Sequence[float], frequency: float = 1.0, phase: float = 0.0):
        """``n_i(t) = a_i sin(frequency * t + phase)``."""
        amps = tuple(float(a) for a in amplitudes)
        chans = tuple(
            (lambda t, a=a: a * math.sin(frequency * t + phase)) for a in amps
        )
        return cls(chans, amps)

    def __call__(self, t: float) -> np.ndarray:
        return np.array([c(t) for c in self.channels])

    def sup_on_grid(self, t0: float, t_end: float, n: int = 2001) -> np.ndarray:
        ts = np.linspace(t0, t_end, n)
        return np.max(np.abs(np.array([self(t) for t in ts])), axis=0)


def apply_noise(y, t: float, noise: NoiseModel | None) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if noise is None:
        return y.copy()
    if len(noise.channels) != y.shape[0]:
        raise ValueError(f"noise has {len(noise.channels)} channels, output has {y.shape[0]}")
    return y + noise(t)


@dataclass(frozen=True)
class SimConfig:
    t0: float
    t_end: float
    dt: float
    x0: np.ndarray
    xhat0: np.ndarray
    method: str = "euler"
    noise: NoiseModel | None = None
    unknown_input: Callable[[float], np.ndarray] | None = None
    known_input: Callable[[float], np.ndarray] = _no_input
    record_stride: int = 1

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end > self.t0:
            raise ValueError("t_end must exceed t0")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            raise ValueError("record_stride must be a positive integer")
        if self.method not in ("euler", "rk4"):
            raise ValueError(f"unknown method {self.method!r}")
        object.__setattr__(self, "x0", np.array(self.x0, dtype=float))
        object.__setattr__(self, "xhat0", np.array(self.xhat0, dtype=float))

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t0) / self.dt))


@dataclass
class Trajectory:
    times: np.ndarray
    x: np.ndarray
    xhat: np.ndarray
    y_clean: np.ndarray
    y_meas: np.ndarray
    u: np.ndarray | None = None
    w: np.ndarray | None = None
    diagnostics: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        k = self.times.shape[0]
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trajectory times must be strictly increasing")
        for name in ("x", "xhat", "y_clean", "y_meas"):
            if getattr(self, name).shape[0] != k:
                raise ValueError(f"{name} has {getattr(self, name).shape[0]} rows, expected {k}")

    @property
    def N(self) -> int:
        return self.x.shape[1] // 2

    @property
    def error(self) -> np.ndarray:
        return self.xhat - self.x

    def __len__(self):
        return self.times.shape[0]


def _check_state(v: np.ndarray, t: float, what: str):
    # NaN propagates through max, so one reduction covers both checks
    if not np.abs(v).max() <= DIVERGENCE_LIMIT:
        raise DivergenceError(f"{what} diverged at t={t}", t=t)


def integrate(sys: InterconnectedSystem, obs: ObserverPlant, cfg: SimConfig) -> Trajectory:
    n = sys.n_states
    if cfg.x0.shape != (n,) or cfg.xhat0.shape != (n,):
        raise ValueError(f"initial states must have shape ({n},)")
    if obs.N != sys.N:
        raise ValueError("observer and plant disagree on the number of subsystems")
    if cfg.noise is not None:
        sup = cfg.noise.sup_on_grid(cfg.t0, cfg.t_end)
        if not np.all(np.isfinite(sup)):
            raise ValueError("noise is unbounded on the simulation horizon")

    wfn = cfg.unknown_input or (lambda t, _z=np.zeros(sys.N): _z)
    ufn = cfg.known_input
    noise = cfg.noise
    dt = cfg.dt
    steps = cfg.n_steps
    stride = int(cfg.record_stride)
    n_rec = steps // stride + 1 + (1 if steps % stride else 0)

    times = np.empty(n_rec)
    X = np.empty((n_rec, n))
    XH = np.empty((n_rec, n))
    Y = np.empty((n_rec, sys.N))
    YM = np.empty((n_rec, sys.N))
    U = None
    W = np.empty((n_rec, sys.N))

    x = cfg.x0.copy()
    xh = cfg.xhat0.copy()
    rk4 = cfg.method == "rk4"
    r = 0
    for k in range(steps + 1):
        t = cfg.t0 + k * dt
        y = x[0::2]
        ym = y.copy() if noise is None else y + noise(t)
        u = ufn(t)
        w = wfn(t)
        if k % stride == 0 or k == steps:
            if U is None:
                U = np.empty((n_rec, np.size(u)))
            times[r] = t
            X[r] = x
            XH[r] = xh
            Y[r] = y
            YM[r] = ym
            U[r] = u
            W[r] = w
            r += 1
        if k == steps:
            break
        if rk4:
            h2 = 0.5 * dt
            th = t + h2
            uh = ufn(th)
            u1 = ufn(t + dt)
            k1 = eval_plant_rhs(sys, x, u, w, t)
            k2 = eval_plant_rhs(sys, x + h2 * k1, uh, wfn(th), th)
            k3 = eval_plant_rhs(sys, x + h2 * k2, uh, wfn(th), th)
            k4 = eval_plant_rhs(sys, x + dt * k3, u1, wfn(t + dt), t + dt)
            dx = (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        else:
            dx = eval_plant_rhs(sys, x, u, w, t)
        dxh = eval_observer_rhs(obs, xh, ym, u, t)
        x = x + dt * dx
        xh = xh + dt * dxh
        _check_state(x, t + dt, "plant state")
        _check_state(xh, t + dt, "observer state")
    assert r == n_rec
    log.debug("integrated %d steps, recorded %d samples", steps, n_rec)
    return Trajectory(times, X, XH, Y, YM, U, W)


def relative_error(traj: Trajectory, eps: float = EPS_REL) -> np.ndarray:
    """``|xhat - x| / max(|x|, eps)`` per sample and state."""
    return np.abs(traj.xhat - traj.x) / np.maximum(np.abs(traj.x), eps)


def convergence_time(traj: Trajectory, tol: float, hold: float | None = None) -> float | None:
    """Earliest sample time after which the max relative error stays ``<= tol``.

    With ``hold=None`` the error must stay below ``tol`` until the end of the
    trajectory; otherwise only on ``[t, t + hold]``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    t = traj.times
    if hold is not None and hold > t[-1] - t[0]:
        raise ValueError(f"hold={hold} exceeds the horizon {t[-1] - t[0]}")
    bad = np.max(relative_error(traj), axis=1) > tol
    # index of the next violating sample at or after k (len(t) if none)
    idx = np.where(bad, np.arange(len(t)), len(t))
    next_bad = np.minimum.accumulate(idx[::-1])[::-1]
    for k in range(len(t)):
        if bad[k]:
            continue
        nb = next_bad[k]
        if hold is None:
            if nb == len(t):
                return float(t[k])
        else:
            if t[k] + hold > t[-1]:
                return None
            if nb == len(t) or t[nb] > t[k] + hold:
                return float(t[k])
    return None
