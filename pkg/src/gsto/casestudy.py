"""Interconnected insect-larvae production units (PUs).

Each unit ``i`` has a measured CO2 concentration ``C_i`` and an unmeasured dry
biomass per larva ``B_i``. Neighbouring units exchange air through valves
``u_v`` and larvae crawl downstream at rate ``kappa``::

    dC_i/dt = a7 u_vi sum_{j neighbour} (C_j - C_i) + a9 u_oi (C_o - C_i) + G_i r_Ai B_i
    dB_i/dt = a20 a1 (1 - a17) r_Ai B_i^2 + a2 a21 r_Ai r_Ti B_i
              - kappa u_vi B_i  [i < N]  + kappa u_v(i-1) B_(i-1)  [i > 1]

with ``r_A = O / (O + C)``, ``G_i = L_i a15`` and, for the last unit only,
``G_N = (L_N + kappa u_vN) a15``. In observer form ``x_i1 = C_i``,
``x_i2 = B_i``, ``g_i = G_i r_Ai``, ``f_i2 = 0`` and the whole biomass
derivative is the unknown input ``delta_i``.

The known input vector is laid out as ``[u_v (N), u_o (N), C_o, O (N)]``.

The ``alpha`` defaults are placeholders (they are not published alongside the
initial conditions and gains); they keep both states positive and ``g``
inside its bounds over two weeks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from gsto.observer import ObserverGains
from gsto.simulator import NoiseModel, SimConfig
from gsto.system_model import InterconnectedSystem, SubsystemModel

DAY = 86400.0
HORIZON_DAYS = 14
VALVE_CLOSE_DAY = 7
DT = 10.0

# Printed initial state, ordered (C_1, C_2, B_1, B_2).
X0_PRINTED = (7.37e-4, 6.9e-4, 3.69e-4, 3.45e-4)
NOISE_AMPLITUDES = (0.03, 0.1)
CO_AMPLITUDE = 9.1167e-4
CO_PERIOD = 900.0
O_AMBIENT = 0.2095


def r_A(O: float, C: float) -> float:
    """Air rate ``O / (O + C)``."""
    if not O > 0 or C < 0:
        raise ValueError(f"r_A needs O > 0 and C >= 0, got O={O!r}, C={C!r}")
    return O / (O + C)


def r_T_log10(T: float, T_opt: float = 38.0, width: float = 6.0) -> float:
    """Temperature rate in (0, 1]: ``log10(1 + 9 exp(-((T - T_opt) / width)^2))``."""
    return math.log10(1.0 + 9.0 * math.exp(-(((T - T_opt) / width) ** 2)))


def outside_co2(t: float) -> float:
    return CO_AMPLITUDE * math.sin(t / CO_PERIOD)


def valve_schedule(i: int, t: float) -> float:
    """0.4 up to day 7, closed afterwards."""
    return 0.4 if t <= VALVE_CLOSE_DAY * DAY else 0.0


def vent_schedule(i: int, t: float) -> float:
    return 0.4


def ambient_oxygen(i: int, t: float) -> float:
    return O_AMBIENT


@dataclass(frozen=True)
class LarvaeParams:
    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha7: float = 1e-3
    alpha9: float = 9e-4
    alpha15: float = 5e-7
    alpha17: float = 1.002
    alpha20: float = 1.0
    alpha21: float = 2e-6
    kappa: float = 1e-6
    L: tuple[float, ...] = (1000.0, 1000.0)
    T: tuple[float, ...] = (35.0, 40.0)
    C_o_fn: Callable[[float], float] = outside_co2
    O_fn: Callable[[int, float], float] = ambient_oxygen
    u_v_fn: Callable[[int, float], float] = valve_schedule
    u_o_fn: Callable[[int, float], float] = vent_schedule
    r_T_fn: Callable[[float], float] = r_T_log10
    # range of measured C the observer may see (noise included); sets g_bounds
    C_probe: tuple[float, float] = (-0.15, 0.15)
    O_probe: tuple[float, float] = (O_AMBIENT, O_AMBIENT)

    def __post_init__(self):
        object.__setattr__(self, "L", tuple(float(v) for v in self.L))
        object.__setattr__(self, "T", tuple(float(v) for v in self.T))
        if not self.kappa >= 0:
            raise ValueError("kappa must be nonnegative")
        if any(not v > 0 for v in self.L):
            raise ValueError("larvae counts L_i must be positive")
        if len(self.T) != len(self.L):
            raise ValueError("L and T need one entry per unit")
        if not self.O_probe[0] > 0:
            raise ValueError("oxygen signal must stay positive")

    @property
    def N(self) -> int:
        return len(self.L)

    def known_input(self, t: float) -> np.ndarray:
        """``[u_v (N), u_o (N), C_o, O (N)]`` at time ``t``."""
        n = self.N
        u = np.empty(3 * n + 1)
        for i in range(n):
            u[i] = self.u_v_fn(i, t)
            u[n + i] = self.u_o_fn(i, t)
            u[2 * n + 1 + i] = self.O_fn(i, t)
        u[2 * n] = self.C_o_fn(t)
        return u


def _air_rate(O: float, C: float) -> float:
    # negative readings (noise) are clipped so r_A stays inside (0, 1]
    return r_A(O, max(C, 0.0))


def _neighbours(i: int, n: int) -> tuple[int, ...]:
    return tuple(j for j in (i - 1, i + 1) if 0 <= j < n)


def _g_bounds(p: LarvaeParams, i: int, lead: float, pad: float = 1e-3) -> tuple[float, float]:
    lo_O, hi_O = p.O_probe
    lo_C, hi_C = p.C_probe
    lo = lead * _air_rate(lo_O, max(hi_C, 0.0))
    hi = lead * _air_rate(hi_O, max(lo_C, 0.0))
    return lo * (1.0 - pad), hi * (1.0 + pad)


def _make_f1(p: LarvaeParams, i: int, n: int):
    nb = _neighbours(i, n)

    def f1(y, u, up, t):
        ex = sum(y[j] - y[i] for j in nb)
        return p.alpha7 * u[i] * ex + p.alpha9 * u[n + i] * (u[2 * n] - y[i])
    return f1


def _make_g(p: LarvaeParams, i: int, n: int, with_crawl: bool):
    base = p.L[i] * p.alpha15

    def g(y, u, t):
        lead = base
        if with_crawl:
            lead += p.kappa * u[i] * p.alpha15
        return lead * _air_rate(u[2 * n + 1 + i], y[i])
    return g


def _make_delta(p: LarvaeParams, i: int, n: int):
    growth = p.alpha20 * p.alpha1 * (1.0 - p.alpha17)
    resp = p.alpha2 * p.alpha21 * p.r_T_fn(p.T[i])

    def delta(x, u, w, t):
        C, B = x[2 * i], x[2 * i + 1]
        ra = _air_rate(u[2 * n + 1 + i], C)
        d = growth * ra * B * B + resp * ra * B
        if i < n - 1:
            d -= p.kappa * u[i] * B
        if i > 0:
            d += p.kappa * u[i - 1] * x[2 * i - 1]
        return d
    return delta


def _zero_f2(x, u, t):
    return 0.0


def build_larvae_system(p: LarvaeParams = LarvaeParams(), N: int | None = None) -> InterconnectedSystem:
    """Truth-side plant, biomass dynamics included as ``delta``."""
    return _build(p, N, truth=True)


def observer_model(p: LarvaeParams = LarvaeParams(), N: int | None = None) -> InterconnectedSystem:
    """What the observer may use: exchange terms, ``g`` without ``kappa``, ``delta = 0``."""
    return _build(p, N, truth=False)


def _build(p: LarvaeParams, N: int | None, truth: bool) -> InterconnectedSystem:
    n = p.N if N is None else int(N)
    if n < 2:
        raise ValueError("the larvae model needs at least two units")
    if n != p.N:
        raise ValueError(f"parameters describe {p.N} units, asked for {n}")
    subs = []
    for i in range(n):
        crawl = truth and i == n - 1
        lead = p.L[i] * p.alpha15 + (p.kappa * 1.0 * p.alpha15 if crawl else 0.0)
        bounds = _g_bounds(p, i, lead)
        if not bounds[0] > 0:
            raise ValueError(f"g_{i + 1} is not strictly positive over the probe range")
        kw = {"delta": _make_delta(p, i, n)} if truth else {}
        subs.append(SubsystemModel(
            f1=_make_f1(p, i, n), f2=_zero_f2, g=_make_g(p, i, n, crawl),
            g_bounds=bounds, name=f"PU-{i + 1}", **kw,
        ))
    return InterconnectedSystem(tuple(subs), m=3 * n + 1, name="larvae" if truth else "larvae-observer")


def reference_x0() -> np.ndarray:
    """Printed ``(C_1, C_2, B_1, B_2)`` mapped to the interleaved layout."""
    c1, c2, b1, b2 = X0_PRINTED
    return np.array([c1, b1, c2, b2])


def reference_gains() -> ObserverGains:
    return ObserverGains.from_arrays(1.1, 3.0, [0.1, 0.5], [(0.03, 1.0), (0.01, 1.0)])


def paper_config(noisy: bool = False, record_stride: int = 6) -> tuple[LarvaeParams, ObserverGains, SimConfig]:
    """Two-unit, two-week reproduction run with ``dt = 10 s``."""
    p = LarvaeParams()
    x0 = reference_x0()
    cfg = SimConfig(
        t0=0.0, t_end=HORIZON_DAYS * DAY, dt=DT, x0=x0, xhat0=5.0 * x0,
        noise=NoiseModel.sinusoid(NOISE_AMPLITUDES) if noisy else None,
        known_input=p.known_input, record_stride=record_stride,
    )
    return p, reference_gains(), cfg


def larvae_probes(p: LarvaeParams = LarvaeParams(), n_c: int = 9, n_t: int = 29):
    """``(y, u, t)`` grid over the probe range of ``C`` and the two-week horizon."""
    cs = np.linspace(p.C_probe[0], p.C_probe[1], n_c)
    for t in np.linspace(0.0, HORIZON_DAYS * DAY, n_t):
        u = p.known_input(float(t))
        for c1 in cs:
            for c2 in cs:
                yield np.array([c1, c2] + [0.0] * (p.N - 2)), u, float(t)
