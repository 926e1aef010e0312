"""Command-line runner: ``gsto simulate|compare|verify --config C --out DIR``.

Exit codes:
    0  success
    1  ``verify`` found Lyapunov decrease violations inside Omega
    2  config file missing, malformed or violating the schema (field path printed)
    3  a state diverged (time printed) or a model function failed mid-run
    4  gains admit no Lyapunov certificate (``A0 - L C0`` not Hurwitz)

Set ``GSTO_LOG_LEVEL`` (DEBUG, INFO, WARNING, ...) for log verbosity.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from gsto import io, lyapunov
from gsto.config import ConfigError, RunSetup, load_config, resolve
from gsto.observer import GSTO, HGO, ObserverGains
from gsto.simulator import DivergenceError, Trajectory, convergence_time, integrate, relative_error
from gsto.system_model import ModelError

log = logging.getLogger("gsto")

EXIT_OK = 0
EXIT_VIOLATIONS = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_INFEASIBLE = 4


class _Diverged(Exception):
    def __init__(self, label: str, t):
        super().__init__(label)
        self.label = label
        self.t = t


def _configure_logging():
    level = os.environ.get("GSTO_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def check_gains(setup: RunSetup) -> list[lyapunov.LyapunovCertificate]:
    """Certificates from the raw gain arrays; raises ``InfeasibleError``."""
    g = setup.gains_raw
    certs = []
    for i, s in enumerate(setup.plant.subsystems):
        certs.append(lyapunov.LyapunovCertificate.build(g["l1"][i], g["l2"][i], g_min=s.g_bounds[0]))
    return certs


def _gains(setup: RunSetup, mode: str) -> ObserverGains:
    g = setup.gains_raw
    gains = ObserverGains.from_arrays(g["l1"], g["l2"], g["gamma"], g["mu"])
    return gains.as_hgo() if mode == HGO else gains


def _run(setup: RunSetup, mode: str, label: str):
    gains = _gains(setup, mode)
    obs = setup.observer(gains, mode)
    log.info("integrating %s (%s), %d steps", setup.name, mode, setup.sim.n_steps)
    try:
        traj = integrate(setup.plant, obs, setup.sim)
    except DivergenceError as exc:
        raise _Diverged(label, exc.t) from exc
    return gains, obs, traj


def _steady(traj: Trajectory, window: float) -> np.ndarray:
    return traj.times >= traj.times[-1] - window


def error_summary(traj: Trajectory, tol: float, window: float) -> dict:
    re = relative_error(traj)
    last = _steady(traj, window)
    per_sample = re[last].max(axis=1)
    return {
        "tol": tol,
        "convergence_time": convergence_time(traj, tol),
        "steady_window": window,
        "steady_max_relative_error": float(per_sample.max()),
        "steady_mean_relative_error": float(per_sample.mean()),
        "steady_max_relative_error_per_state": re[last].max(axis=0),
        "final_abs_error": np.abs(traj.error[-1]),
        "final_relative_error": re[-1],
        "n_samples": len(traj),
    }


def _lyapunov_analysis(setup: RunSetup, gains, obs, traj, certs):
    """Bounds, feasibility and decrease monitoring; ``None`` parts when data are too short."""
    eta = setup.analysis["eta"]
    V_i = lyapunov.lyap_series(traj.error, certs, gains)
    try:
        bounds = lyapunov.estimate_interconnection_bounds(traj, setup.plant, obs)
    except lyapunov.InsufficientDataError as exc:
        log.warning("skipping bound estimation: %s", exc)
        return V_i, None, None, None
    feas = lyapunov.gain_feasibility(certs, bounds, gains, eta)
    mon = lyapunov.monitor_decrease(traj, certs, gains, bounds, eta)
    return V_i, bounds, feas, mon


def _write_diagnostics(path, traj: Trajectory, mon) -> None:
    re = relative_error(traj)
    labels = [f"{i}{j}" for i in range(1, traj.N + 1) for j in (1, 2)]
    header = ["t", "V", "in_omega"] + [f"r_{s}" for s in labels]
    if mon is None:
        V = np.full(len(traj), np.nan)
        omega = np.zeros(len(traj), dtype=bool)
    else:
        V, omega = mon.V, mon.in_omega
    io.write_table_csv(path, header, [traj.times, V, omega, *re.T])


def _finish(out: Path, args, resolved: dict, t_start: float) -> None:
    io.write_json(out / "config.resolved.json", resolved)
    man = io.build_manifest(out, args.config, io.config_hash(resolved), args.command,
                            round(time.perf_counter() - t_start, 3))
    io.write_json(out / io.MANIFEST_NAME, man.to_dict())


def cmd_simulate(setup: RunSetup, args, out: Path) -> int:
    mode = args.observer or setup.mode
    certs = check_gains(setup)
    gains, obs, traj = _run(setup, mode, mode)
    V_i, bounds, feas, mon = _lyapunov_analysis(setup, gains, obs, traj, certs)
    io.write_trajectory_csv(out / "trajectory.csv", traj, V_i)
    _write_diagnostics(out / "diagnostics.csv", traj, mon)
    summary = {
        "command": "simulate",
        "system": setup.name,
        "observer": mode,
        "errors": error_summary(traj, setup.analysis["tol"], setup.analysis["steady_window"]),
        "lyapunov": None if mon is None else {
            "samples_in_omega": int(mon.in_omega.sum()),
            "violations": mon.n_violations,
            "gamma_min": feas.gamma_min,
        },
    }
    io.write_json(out / "summary.json", summary)
    if args.svg:
        from gsto import plotting
        plotting.plot_outputs(traj, out / "outputs.svg", f"{setup.name} / {mode}")
        plotting.plot_relative_errors({mode: traj}, out / "relative_errors.svg")
    return EXIT_OK


def cmd_compare(setup: RunSetup, args, out: Path) -> int:
    if args.observer:
        log.warning("--observer is ignored by compare; both observers are run")
    check_gains(setup)
    runs = {}
    for mode in (GSTO, HGO):
        _, _, traj = _run(setup, mode, mode)
        runs[mode] = traj
        io.write_trajectory_csv(out / f"trajectory_{mode}.csv", traj)
    tol, win = setup.analysis["tol"], setup.analysis["steady_window"]
    summ = {m: error_summary(tr, tol, win) for m, tr in runs.items()}
    g, h = summ[GSTO], summ[HGO]
    ratio = h["steady_max_relative_error"] / max(g["steady_max_relative_error"], 1e-300)
    mean_ratio = h["steady_mean_relative_error"] / max(g["steady_mean_relative_error"], 1e-300)
    labels = [f"{i}{j}" for i in range(1, setup.plant.N + 1) for j in (1, 2)]
    cols = [runs[GSTO].times]
    header = ["t"]
    for m in (GSTO, HGO):
        cols += list(relative_error(runs[m]).T)
        header += [f"{m}_r_{s}" for s in labels]
    io.write_table_csv(out / "errors.csv", header, cols)
    io.write_json(out / "comparison.json", {
        "command": "compare",
        "system": setup.name,
        "observers": summ,
        "steady_error_ratio_hgo_over_gsto": ratio,
        "steady_mean_error_ratio_hgo_over_gsto": mean_ratio,
    })
    if args.svg:
        from gsto import plotting
        plotting.plot_relative_errors(runs, out / "relative_errors.svg", f"{setup.name}: GSTO vs HGO")
        for m, tr in runs.items():
            plotting.plot_outputs(tr, out / f"outputs_{m}.svg", f"{setup.name} / {m}")
    return EXIT_OK


def cmd_verify(setup: RunSetup, args, out: Path) -> int:
    mode = args.observer or setup.mode
    certs = check_gains(setup)
    gains, obs, traj = _run(setup, mode, mode)
    V_i, bounds, feas, mon = _lyapunov_analysis(setup, gains, obs, traj, certs)
    report = {
        "command": "verify",
        "system": setup.name,
        "observer": mode,
        "certificates": [c.to_dict() for c in certs],
        "eta": setup.analysis["eta"],
        "bounds": None if bounds is None else bounds.to_dict(),
        "bound_violations": None if bounds is None else lyapunov.bound_violations(bounds, traj, setup.plant),
        "feasibility": None if feas is None else feas.to_dict(),
        "decrease": None if mon is None else mon.to_dict(),
    }
    io.write_json(out / "verify.json", report)
    io.write_trajectory_csv(out / "trajectory.csv", traj, V_i)
    if args.svg and mon is not None:
        from gsto import plotting
        plotting.plot_lyapunov(traj.times, V_i, out / "lyapunov.svg", mon.in_omega)
    if mon is None:
        log.error("trajectory too short to monitor the Lyapunov decrease")
        return EXIT_VIOLATIONS
    if mon.n_violations:
        print(f"verify: {mon.n_violations} decrease violation(s) inside Omega", file=sys.stderr)
        return EXIT_VIOLATIONS
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "compare": cmd_compare, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gsto", description="GSTO / HGO observer experiments")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--out", required=True, help="output directory (created if missing)")
    ap.add_argument("--svg", action="store_true", help="also render SVG figures")
    ap.add_argument("--observer", choices=[GSTO, HGO], default=None,
                    help="override the observer mode of the config")
    return ap


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    t_start = time.perf_counter()
    try:
        setup = resolve(load_config(args.config))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        code = COMMANDS[args.command](setup, args, out)
    except lyapunov.InfeasibleError as exc:
        print(f"infeasible gains: {exc}", file=sys.stderr)
        code = EXIT_INFEASIBLE
    except _Diverged as exc:
        print(f"divergence: {exc.label} observer run diverged at t={exc.t}", file=sys.stderr)
        io.write_json(out / "summary.json", {
            "command": args.command, "status": "diverged", "observer": exc.label, "t": exc.t,
        })
        code = EXIT_DIVERGED
    except ModelError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        code = EXIT_DIVERGED
    _finish(out, args, setup.resolved, t_start)
    return code


if __name__ == "__main__":
    sys.exit(main())
