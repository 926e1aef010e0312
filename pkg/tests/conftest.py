import time
from dataclasses import dataclass

import numpy as np
import pytest

from gsto import ObserverPlant, integrate
from gsto.benchmarks import BenchmarkSpec, benchmark_config, benchmark_gains, synthetic_benchmark
from gsto.casestudy import build_larvae_system, observer_model, paper_config


@dataclass
class Run:
    sys: object
    obs: object
    gains: object
    traj: object
    seconds: float


def _timed(sys, obs, cfg, gains):
    t0 = time.perf_counter()
    tr = integrate(sys, obs, cfg)
    return Run(sys, obs, gains, tr, time.perf_counter() - t0)


@pytest.fixture(scope="session")
def benchmark_run():
    """Nominal synthetic benchmark, 200 s at dt = 1e-3 (shared by several criteria)."""
    spec = BenchmarkSpec()
    sys = synthetic_benchmark(spec)
    gains = benchmark_gains()
    return _timed(sys, ObserverPlant.from_system(sys, gains), benchmark_config(spec), gains)


def _larvae(mode, noisy):
    p, gains, cfg = paper_config(noisy=noisy)
    obs = ObserverPlant.from_system(observer_model(p), gains, mode)
    return _timed(build_larvae_system(p), obs, cfg, obs.gains)


@pytest.fixture(scope="session")
def larvae_runs():
    return {m: _larvae(m, False) for m in ("gsto", "hgo")}


@pytest.fixture(scope="session")
def larvae_noisy_runs():
    return {m: _larvae(m, True) for m in ("gsto", "hgo")}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """``report(n, ok, detail)`` prints and records one PASS/FAIL line per criterion."""

    def _report(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE_LINES[n] = line
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(_ACCEPTANCE_LINES[n])
