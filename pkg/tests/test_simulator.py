import math

import numpy as np
import pytest

from gsto import ObserverPlant, SimConfig, integrate
from gsto.benchmarks import BenchmarkSpec, benchmark_config, benchmark_gains, integrator_system, linear_test_system, synthetic_benchmark
from gsto.observer import ObserverGains
from gsto.simulator import DivergenceError, NoiseModel, Trajectory, apply_noise, convergence_time, relative_error
from gsto.system_model import InterconnectedSystem, SubsystemModel


def _unit_gains(n=1, mu=(1.0, 1.0)):
    return ObserverGains.from_arrays(1.0, 1.0, [1.0] * n, [mu] * n)


def test_single_euler_step():
    sys = integrator_system()
    obs = ObserverPlant.from_system(sys, _unit_gains())
    cfg = SimConfig(0.0, 0.1, 0.1, [0.0, 1.0], [0.0, 1.0])
    tr = integrate(sys, obs, cfg)
    assert tr.times.tolist() == [0.0, 0.1]
    assert tr.x[-1].tolist() == [0.1, 1.0]
    assert tr.xhat[-1].tolist() == [0.1, 1.0]


def test_equilibrium_is_invariant():
    sys = linear_test_system()
    obs = ObserverPlant.from_system(sys, _unit_gains(2))
    x0 = [2.0, 0.0, -3.0, 0.0]
    tr = integrate(sys, obs, SimConfig(0.0, 5.0, 1e-2, x0, x0))
    assert np.all(tr.x == np.array(x0)) and np.all(tr.xhat == np.array(x0))


def test_deterministic():
    spec = BenchmarkSpec(seed=4, t_end=2.0)
    sys = synthetic_benchmark(spec)
    obs = ObserverPlant.from_system(sys, benchmark_gains())
    a = integrate(sys, obs, benchmark_config(spec))
    b = integrate(sys, obs, benchmark_config(spec))
    assert np.array_equal(a.xhat, b.xhat) and np.array_equal(a.x, b.x)


def test_apply_noise_example():
    noise = NoiseModel.sinusoid([0.03, 0.1])
    out = apply_noise([0.0, 0.0], math.pi / 2, noise)
    assert out.tolist() == [0.03, 0.1]
    assert apply_noise([1.0, 2.0], 0.3, None).tolist() == [1.0, 2.0]
    with pytest.raises(ValueError):
        apply_noise([1.0], 0.0, noise)


def test_noise_is_bounded_and_reaches_observer_only():
    amps = (0.03, 0.1)
    sys = linear_test_system()
    obs = ObserverPlant.from_system(sys, _unit_gains(2))
    cfg = SimConfig(0.0, 20.0, 1e-2, [1.0, 0.0, 2.0, 0.0], [1.0, 0.0, 2.0, 0.0], noise=NoiseModel.sinusoid(amps))
    tr = integrate(sys, obs, cfg)
    dev = np.abs(tr.y_meas - tr.y_clean)
    assert np.all(dev <= np.array(amps) * (1 + 1e-12))
    assert dev.max(axis=0) == pytest.approx(amps, rel=1e-3)
    assert np.all(tr.x == tr.x[0])  # plant unaffected
    assert np.abs(tr.error).max() > 0


def test_relative_error_example_and_guard():
    tr = Trajectory(np.array([0.0]), np.array([[1.0, 0.0]]), np.array([[5.0, 1e-13]]), np.zeros((1, 1)), np.zeros((1, 1)))
    re = relative_error(tr)
    assert re[0, 0] == 4.0
    assert re[0, 1] == pytest.approx(0.1)


def _traj_from_errors(times, rel):
    x = np.ones((len(times), 2))
    xh = x + np.column_stack([rel, np.zeros(len(times))])
    return Trajectory(np.asarray(times, float), x, xh, np.ones((len(times), 1)), np.ones((len(times), 1)))


def test_convergence_time_semantics():
    tr = _traj_from_errors([0, 1, 2, 3, 4, 5], [1.0, 1e-3, 1.0, 1e-4, 1e-5, 1e-6])
    assert convergence_time(tr, 1e-2) == 3.0
    assert convergence_time(tr, 1e-2, hold=0.5) == 1.0
    assert convergence_time(tr, 1e-7) is None
    with pytest.raises(ValueError):
        convergence_time(tr, 0.0)
    with pytest.raises(ValueError):
        convergence_time(tr, 1e-2, hold=10.0)


def test_convergence_time_monotone_in_tol(rng):
    errs = np.abs(rng.normal(size=200)) * np.exp(-np.linspace(0, 10, 200))
    tr = _traj_from_errors(np.arange(200.0), errs)
    prev = -1.0
    for tol in (1e-1, 1e-2, 1e-3, 1e-4):
        ct = convergence_time(tr, tol)
        assert ct is not None and ct >= prev
        prev = ct


def test_hgo_does_not_reach_tight_tolerance():
    sys = synthetic_benchmark(BenchmarkSpec())
    spec = BenchmarkSpec(t_end=20.0)
    tr = integrate(sys, ObserverPlant.from_system(sys, benchmark_gains().as_hgo()), benchmark_config(spec))
    assert convergence_time(tr, 1e-6) is None


def test_divergence_raises():
    s = SubsystemModel(lambda y, u, up, t: 0.0, lambda x, u, t: 10.0 * x[1], lambda y, u, t: 1.0, (1.0, 1.0))
    sys = InterconnectedSystem((s,))
    obs = ObserverPlant.from_system(sys, _unit_gains())
    with pytest.raises(DivergenceError) as ei:
        integrate(sys, obs, SimConfig(0.0, 10.0, 0.1, [0.0, 1.0], [0.0, 1.0]))
    assert 0 < ei.value.t <= 10.0


def test_config_checks():
    for kw in (dict(dt=0.0), dict(t_end=0.0), dict(record_stride=0), dict(method="heun")):
        args = dict(t0=0.0, t_end=1.0, dt=0.1, x0=[0, 0], xhat0=[0, 0])
        args.update(kw)
        with pytest.raises(ValueError):
            SimConfig(**args)
    sys = integrator_system()
    with pytest.raises(ValueError):
        integrate(sys, ObserverPlant.from_system(sys, _unit_gains()), SimConfig(0.0, 1.0, 0.1, [0, 0, 0], [0, 0]))


def _smooth_plant():
    # harmonic oscillator x11' = x12, x12' = -x11, exact solution (cos, -sin)
    s = SubsystemModel(lambda y, u, up, t: 0.0, lambda x, u, t: -x[0], lambda y, u, t: 1.0, (1.0, 1.0))
    return InterconnectedSystem((s,))


@pytest.mark.parametrize("method, order", [("euler", 1), ("rk4", 4)])
def test_plant_integration_order(method, order):
    sys = _smooth_plant()
    obs = ObserverPlant.from_system(sys, _unit_gains())
    errs = []
    for dt in (0.02, 0.01):
        tr = integrate(sys, obs, SimConfig(0.0, 1.0, dt, [1.0, 0.0], [1.0, 0.0], method=method))
        errs.append(abs(tr.x[-1, 0] - math.cos(1.0)))
    rate = math.log2(errs[0] / errs[1])
    assert rate == pytest.approx(order, abs=0.3)


def test_step_refinement_benchmark():
    # halving dt should not worsen the final error by more than a factor 4
    out = []
    for dt in (2e-3, 1e-3):
        spec = BenchmarkSpec(t_end=10.0, dt=dt)
        sys = synthetic_benchmark(spec)
        tr = integrate(sys, ObserverPlant.from_system(sys, benchmark_gains()), benchmark_config(spec))
        out.append(np.abs(tr.error[-1]).max())
    assert out[1] <= 4 * out[0]


def test_record_stride():
    sys = integrator_system()
    obs = ObserverPlant.from_system(sys, _unit_gains())
    tr = integrate(sys, obs, SimConfig(0.0, 1.0, 0.1, [0.0, 1.0], [0.5, 0.0], record_stride=3))
    np.testing.assert_allclose(tr.times, [0.0, 0.3, 0.6, 0.9, 1.0], atol=1e-12)
    full = integrate(sys, obs, SimConfig(0.0, 1.0, 0.1, [0.0, 1.0], [0.5, 0.0]))
    assert np.array_equal(tr.xhat[-1], full.xhat[-1])
