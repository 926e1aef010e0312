"""Acceptance criteria 1-9. Each test prints one ``criterion N: PASS|FAIL`` line."""

import dataclasses
import json
import time

import numpy as np
import pytest

from gsto import ObserverPlant, SimConfig, cli, integrate, io
from gsto.benchmarks import BenchmarkSpec, benchmark_config, benchmark_gains, linear_test_system, synthetic_benchmark
from gsto.casestudy import DAY, LarvaeParams, build_larvae_system, observer_model, paper_config, reference_x0
from gsto.lyapunov import (
    LyapunovCertificate,
    build_certificates,
    closed_loop_matrix,
    eigenvalue_scaling_check,
    estimate_interconnection_bounds,
    gain_feasibility,
    monitor_decrease,
    tol_v,
)
from gsto.observer import eval_error_rhs, eval_observer_rhs
from gsto.simulator import convergence_time, relative_error
from gsto.sta_core import MuPair, phi1, phi1_prime, phi2
from gsto.system_model import eval_plant_rhs, invert_observability, observability_map

pytestmark = pytest.mark.acceptance


def test_criterion_1_phi_identities(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    z = rng.uniform(-1e3, 1e3, 10_000) * 10 ** rng.uniform(-6, 0, 10_000)
    m = rng.uniform(0.0, 10.0, (10_000, 2))
    worst_id = 0.0
    odd = mono = chain = True
    for k in range(10_000):
        mu = MuPair(m[k, 0], m[k, 1])
        v = z[k]
        p1, p2 = phi1(v, mu), phi2(v, mu)
        worst_id = max(worst_id, abs(p2 - phi1_prime(v, mu) * p1) / (1.0 + abs(p2)))
        odd &= phi1(-v, mu) == -p1 and phi2(-v, mu) == -p2
        w = v + abs(v) * 1e-3 + 1e-9
        mono &= phi1(w, mu) >= p1
        # mu1 sqrt|e| <= |phi1|, mu2 |e| <= |phi1|, |phi1| <= (mu1 + mu2) max(sqrt|e|, |e|)
        a = abs(p1)
        chain &= mu.mu1 * np.sqrt(abs(v)) <= a * (1 + 1e-14) and mu.mu2 * abs(v) <= a * (1 + 1e-14)
        chain &= a <= (mu.mu1 + mu.mu2) * max(np.sqrt(abs(v)), abs(v)) * (1 + 1e-14)
    dt = time.perf_counter() - t0
    ok = worst_id <= 1e-12 and odd and mono and chain and dt < 1.0
    report(1, ok, f"identity err {worst_id:.1e} (<= 1e-12), odd={odd}, monotone={mono}, chain={chain}, {dt:.2f} s (< 1 s)")
    assert ok


def test_criterion_2_ale_certificates(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    L = 10.0 - rng.uniform(0.0, 10.0, (1000, 2))  # (0, 10]
    worst_res = 0.0
    spd = True
    worst_scale = 0.0
    for l1, l2 in L:
        c = LyapunovCertificate.build(l1, l2)
        worst_res = max(worst_res, c.residual / np.linalg.norm(c.Q, 2))
        spd &= bool(c.lambda_min_P > 0 and np.array_equal(c.P, c.P.T))
        v = eigenvalue_scaling_check([l1, l2], float(10 ** rng.uniform(-2, 3)))
        worst_scale = max(worst_scale, v.max_rel_error)
    assert closed_loop_matrix([1.0, 2.0]).tolist() == [[-1.0, 1.0], [-2.0, 0.0]]
    dt = time.perf_counter() - t0
    ok = worst_res <= 1e-10 and spd and worst_scale <= 1e-10 and dt < 5.0
    report(2, ok, f"ALE residual {worst_res:.1e}, SPD={spd}, eig scaling {worst_scale:.1e}, {dt:.2f} s (< 5 s)")
    assert ok


def test_criterion_3_observability_round_trip(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    p = LarvaeParams()
    cases = [
        (linear_test_system(), lambda: rng.normal(size=4) * 10 ** rng.uniform(-3, 3), lambda t: np.zeros(0)),
        (build_larvae_system(p), lambda: reference_x0() * rng.uniform(0.2, 5.0, 4), p.known_input),
    ]
    worst = 0.0
    for sys, draw, ufn in cases:
        for _ in range(1000):
            x = draw()
            t = float(rng.uniform(0, 14 * DAY))
            u = ufn(t)
            y, yd = observability_map(sys, x, u, t)
            back = invert_observability(sys, y, yd, u, t)
            worst = max(worst, float(np.max(np.abs(back - x) / np.abs(x))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-10 and dt < 5.0
    report(3, ok, f"max relative round-trip error {worst:.1e} (<= 1e-10), {dt:.2f} s (< 5 s)")
    assert ok


def test_criterion_4_equilibrium_invariance(report, benchmark_run):
    worst = {}
    spec = BenchmarkSpec()
    sys = synthetic_benchmark(spec).without_perturbation()
    cfg = benchmark_config(spec)
    cfg = dataclasses.replace(cfg, xhat0=cfg.x0)
    tr = integrate(sys, ObserverPlant.from_system(sys, benchmark_run.gains), cfg)
    worst["benchmark"] = float(np.abs(tr.error).max())

    p = dataclasses.replace(LarvaeParams(), alpha17=1.0, alpha21=0.0, kappa=0.0)
    _, gains, lcfg = paper_config()
    lcfg = dataclasses.replace(lcfg, xhat0=lcfg.x0, known_input=p.known_input)
    tr = integrate(build_larvae_system(p), ObserverPlant.from_system(observer_model(p), gains), lcfg)
    worst["larvae"] = float(np.abs(tr.error).max())

    lin = linear_test_system()
    x0 = [1.0, 0.5, -2.0, 0.25]
    tr = integrate(lin, ObserverPlant.from_system(lin, benchmark_run.gains), SimConfig(0.0, 50.0, 1e-3, x0, x0))
    worst["linear"] = float(np.abs(tr.error).max())
    ok = all(v <= 1e-12 for v in worst.values())
    report(4, ok, ", ".join(f"{k} max|e| {v:.1e}" for k, v in worst.items()) + " (<= 1e-12, full horizons)")
    assert ok


def _consistency_along(run, stride=20):
    tr, sys = run.traj, run.sys
    worst = 0.0
    for k in range(0, len(tr), stride):
        x, xh, t = tr.x[k], tr.xhat[k], tr.times[k]
        u, w = tr.u[k], tr.w[k]
        diff = eval_observer_rhs(run.obs, xh, tr.y_meas[k], u, t) - eval_plant_rhs(sys, x, u, w, t)
        err = eval_error_rhs(sys, run.obs, x, xh, u, w, t)
        worst = max(worst, float(np.max(np.abs(diff - err)) / (1.0 + np.max(np.abs(diff)))))
    return worst


def test_criterion_5_finite_time_exactness(report, benchmark_run):
    tr = benchmark_run.traj
    half = 0.5 * (tr.times[-1] - tr.times[0])
    ct = convergence_time(tr, 1e-4)
    final = float(relative_error(tr)[-1].max())
    cons = _consistency_along(benchmark_run)
    certs = build_certificates(benchmark_run.gains, benchmark_run.sys)
    feas = gain_feasibility(certs, estimate_interconnection_bounds(tr, benchmark_run.sys), benchmark_run.gains)
    ok = (ct is not None and ct <= half and cons <= 1e-12 and feas.feasible_at_gains
          and benchmark_run.seconds < 30.0)
    report(5, ok, f"T_c(1e-4) = {ct} s (<= {half:.0f} s, held to end), final rel err {final:.1e}, "
                  f"consistency {cons:.1e}, gains feasible (gamma_min {feas.gamma_min:.2f}), "
                  f"{benchmark_run.seconds:.1f} s (< 30 s)")
    assert ok


def _last_day(tr):
    return relative_error(tr)[tr.times >= tr.times[-1] - DAY]


def test_criterion_6_gsto_vs_hgo(report, larvae_runs):
    g, h = larvae_runs["gsto"], larvae_runs["hgo"]
    eg, eh = float(_last_day(g.traj).max()), float(_last_day(h.traj).max())
    ctg, cth = convergence_time(g.traj, 1e-3), convergence_time(h.traj, 1e-3)
    secs = g.seconds + h.seconds
    ok = eg <= 1e-3 and eh > 10 * eg and ctg is not None and cth is None and secs < 60.0
    report(6, ok, f"last-day max rel err GSTO {eg:.2e} (<= 1e-3), HGO {eh:.2e} ({eh / eg:.0f}x > 10x), "
                  f"T_c(1e-3) GSTO {ctg} s / HGO {cth}, {secs:.1f} s (< 60 s)")
    assert ok


def test_criterion_7_noise_robustness(report, larvae_noisy_runs):
    g, h = larvae_noisy_runs["gsto"], larvae_noisy_runs["hgo"]
    rg, rh = _last_day(g.traj), _last_day(h.traj)
    mg, mh = float(rg.max(axis=1).mean()), float(rh.max(axis=1).mean())
    bg, bh = rg[:, 1::2].mean(axis=0), rh[:, 1::2].mean(axis=0)
    bounded = all(np.all(np.isfinite(r.traj.xhat)) for r in (g, h))
    secs = g.seconds + h.seconds
    ok = bounded and mg < mh and secs < 60.0
    report(7, ok, f"bounded={bounded}, mean last-day rel err GSTO {mg:.3f} vs HGO {mh:.3f} (need GSTO < HGO); "
                  f"B channels GSTO {bg[0]:.3f}/{bg[1]:.3f} vs HGO {bh[0]:.3f}/{bh[1]:.3f}; {secs:.1f} s (< 60 s)")
    assert ok


def test_criterion_8_lyapunov_monitoring(report, benchmark_run):
    tr, sys, gains = benchmark_run.traj, benchmark_run.sys, benchmark_run.gains
    certs = build_certificates(gains, sys)
    bounds = estimate_interconnection_bounds(tr, sys)
    mon = monitor_decrease(tr, certs, gains, bounds)
    # subsystem-1 error in relative vector form: ||e_1|| / ||x_1||
    r1 = np.linalg.norm(tr.error[:, :2], axis=1) / np.linalg.norm(tr.x[:, :2], axis=1)
    hit = np.flatnonzero(r1 <= 1e-6)
    stop = int(hit[0]) if hit.size else len(tr)
    V1 = mon.V_i[:stop, 0]
    rises = int(np.count_nonzero(np.diff(V1) > tol_v(V1[:-1])))
    t_hit = float(tr.times[stop]) if hit.size else None
    ok = mon.n_violations == 0 and rises == 0 and hit.size > 0
    report(8, ok, f"{mon.n_violations} decrease violations in Omega ({int(mon.in_omega.sum())} samples inside), "
                  f"{rises} V_1 increases before ||e_1||/||x_1|| <= 1e-6 at t = {t_hit:.3f} s")
    assert ok


def test_criterion_9_determinism_and_io(report, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"schema": "gsto-config/1", "system": "benchmark",
                               "simulation": {"t_end": 5.0, "dt": 0.001, "record_stride": 10}}))
    for out in ("a", "b"):
        assert cli.main(["simulate", "--config", str(cfg), "--out", str(tmp_path / out), "--svg"]) == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir() if p.name != "manifest.json")
    same = all((tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes() for n in names)
    back = io.read_trajectory_csv(tmp_path / "a" / "trajectory.csv")
    spec = BenchmarkSpec(t_end=5.0)
    sys = synthetic_benchmark(spec)
    tr = integrate(sys, ObserverPlant.from_system(sys, benchmark_gains()), benchmark_config(spec))
    rt = max(float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1.0)))
             for a, b in ((back.times, tr.times), (back.x, tr.x), (back.xhat, tr.xhat), (back.e, tr.error)))
    ok = same and rt <= 1e-15
    report(9, ok, f"{len(names)} output files byte-identical={same}, CSV round-trip {rt:.1e} (<= 1e-15)")
    assert ok
