"""Small reference plants used by the tests and the CLI.

``synthetic_benchmark`` is the two-subsystem desk-scale problem: a cascade
``f_21 = x_12`` (plus output damping), gains ``g_i`` inside ``[0.5, 2]`` and the
bounded discontinuous perturbation ``0.5 sin(t) + 0.3 sign(sin(3t))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gsto.observer import ObserverGains
from gsto.simulator import SimConfig
from gsto.sta_core import sign
from gsto.system_model import InterconnectedSystem, SubsystemModel


DAMPING = 0.05


def _zero(*args):
    return 0.0


def _one(*args):
    return 1.0


def integrator_system() -> InterconnectedSystem:
    """``N = 1`` double integrator: ``f = 0``, ``g = 1``, ``delta = 0``."""
    s = SubsystemModel(f1=_zero, f2=_zero, g=_one, g_bounds=(1.0, 1.0), name="integrator")
    return InterconnectedSystem((s,), m=0, name="integrator")


def linear_test_system(g_bounds=(0.5, 2.0)) -> InterconnectedSystem:
    """Two integrator chains, the second driven by ``x_12`` (``f_21 = x_12``)."""
    s1 = SubsystemModel(f1=_zero, f2=_zero, g=_one, g_bounds=g_bounds, name="chain-1")
    s2 = SubsystemModel(
        f1=lambda y, u, up, t: up[0], f2=_zero, g=_one, g_bounds=g_bounds, name="chain-2"
    )
    return InterconnectedSystem((s1, s2), m=0, name="linear-test")


@dataclass(frozen=True)
class BenchmarkSpec:
    seed: int | None = None
    setpoints: tuple[float, float] = (1000.0, 750.0)
    t_end: float = 200.0
    dt: float = 1e-3
    record_stride: int = 10
    initial_scale: float = 1.5


def perturbation(phase: float):
    """``delta(t) = 0.5 sin(t + phase) + 0.3 sign(sin(3 t + phase))``; ``|delta| <= 0.8``."""
    def delta(x, u, w, t):
        return 0.5 * math.sin(t + phase) + 0.3 * sign(math.sin(3.0 * t + phase))
    return delta


def synthetic_benchmark(spec: BenchmarkSpec = BenchmarkSpec()) -> InterconnectedSystem:
    """Build the plant.

    With ``spec.seed = None`` every phase is zero, giving exactly the nominal
    perturbation. An integer seed draws the four phases (two perturbations, two
    gains) uniformly from ``[0, 2 pi)``.
    """
    if spec.seed is None:
        ph = np.zeros(4)
    else:
        ph = np.random.default_rng(spec.seed).uniform(0.0, 2.0 * math.pi, size=4)
    c1, c2 = spec.setpoints

    def g1(y, u, t):
        return 1.0 + 0.5 * math.sin(0.5 * t + ph[2])

    def g2(y, u, t):
        return 1.0 + 0.5 * math.sin(0.7 * t + ph[3])

    s1 = SubsystemModel(
        f1=lambda y, u, up, t: -y[0],
        f2=lambda x, u, t: -DAMPING * (x[1] - c1),
        g=g1, g_bounds=(0.5, 2.0), delta=perturbation(ph[0]), name="bench-1",
    )
    s2 = SubsystemModel(
        f1=lambda y, u, up, t: up[0] - y[1],
        f2=lambda x, u, t: -DAMPING * (x[3] - c2) + 0.01 * (x[1] - c1),
        g=g2, g_bounds=(0.5, 2.0), delta=perturbation(ph[1]), name="bench-2",
    )
    return InterconnectedSystem((s1, s2), m=0, name="synthetic-benchmark")


def benchmark_gains(gamma: float = 3.0) -> ObserverGains:
    """Gains that pass the feasibility check for the nominal benchmark (``gamma_min`` about 2.2)."""
    return ObserverGains.from_arrays(2.0, 1.0, [gamma, gamma], [(2.0, 1.0), (2.0, 1.0)])


def benchmark_config(spec: BenchmarkSpec = BenchmarkSpec()) -> SimConfig:
    c1, c2 = spec.setpoints
    x0 = np.array([c1, c1, c1 + c2, c2])
    return SimConfig(
        t0=0.0, t_end=spec.t_end, dt=spec.dt, x0=x0, xhat0=spec.initial_scale * x0,
        record_stride=spec.record_stride,
    )
