"""JSON run configuration: schema, defaults and construction of the run objects.

A config names a built-in system and optionally overrides gains, simulation
settings and (for the larvae model) the placeholder coefficients. Everything
left out falls back to the system's reference preset.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, replace
from pathlib import Path

import jsonschema
import numpy as np

from gsto.benchmarks import BenchmarkSpec, benchmark_config, benchmark_gains, synthetic_benchmark
from gsto.casestudy import LarvaeParams, build_larvae_system, observer_model, paper_config
from gsto.observer import GSTO, HGO, ObserverPlant
from gsto.simulator import NoiseModel, SimConfig
from gsto.system_model import InterconnectedSystem

SCHEMA_ID = "gsto-config/1"

_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_vec = {"type": "array", "items": _num, "minItems": 1}


def _placeholder(desc: str) -> dict:
    return {"type": "number", "description": desc, "x-placeholder": True}


CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "$id": SCHEMA_ID,
    "title": "GSTO run configuration",
    "type": "object",
    "required": ["schema", "system"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "system": {"enum": ["larvae", "benchmark"]},
        "seed": {
            "type": ["integer", "null"],
            "description": "Benchmark perturbation phases; null means all phases zero.",
        },
        "perturbation": {
            "type": "boolean",
            "description": "false replaces every unknown input delta_i by zero.",
        },
        "observer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "mode": {"enum": [GSTO, HGO]},
                # sign is not constrained here: a non-Hurwitz (l1, l2) is an
                # infeasibility (exit 4), not a schema error
                "l1": {"oneOf": [_num, _vec]},
                "l2": {"oneOf": [_num, _vec]},
                "gamma": {"type": "array", "items": _pos, "minItems": 1},
                "mu": {
                    "type": "array", "minItems": 1,
                    "items": {"type": "array", "items": {"type": "number", "minimum": 0},
                              "minItems": 2, "maxItems": 2},
                },
            },
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "t_end": _pos,
                "dt": _pos,
                "method": {"enum": ["euler", "rk4"]},
                "record_stride": {"type": "integer", "minimum": 1},
                "xhat0_scale": _num,
                "noise": {
                    "type": ["object", "null"],
                    "additionalProperties": False,
                    "required": ["amplitudes"],
                    "properties": {
                        "amplitudes": {"type": "array", "items": {"type": "number", "minimum": 0}},
                        "frequency": _num,
                    },
                },
            },
        },
        "analysis": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": _pos,
                "eta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "steady_window": _pos,
            },
        },
        "benchmark": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "setpoints": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
            },
        },
        "larvae": {
            "type": "object",
            "additionalProperties": False,
            "description": "Coefficients marked x-placeholder are not published values.",
            "properties": {
                **{f"alpha{k}": _placeholder(f"alpha_{k} (placeholder)")
                   for k in (1, 2, 7, 9, 15, 17, 20, 21)},
                "kappa": {"type": "number", "minimum": 0, "description": "crawl rate; published value 1e-6"},
                "L": {"type": "array", "items": _pos, "minItems": 2,
                      "description": "larvae per unit (placeholder)", "x-placeholder": True},
                "T": {"type": "array", "items": _num, "minItems": 2,
                      "description": "medium temperatures in degC; published (35, 40)"},
            },
        },
    },
}

_DEFAULT_ANALYSIS = {
    "larvae": {"tol": 1e-3, "eta": 0.5, "steady_window": 86400.0},
    "benchmark": {"tol": 1e-4, "eta": 0.5, "steady_window": 100.0},
}


class ConfigError(ValueError):
    """Schema violation; ``path`` is the JSON path of the offending field."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


def _json_path(err: jsonschema.ValidationError) -> str:
    p = "$"
    for part in err.absolute_path:
        p += f"[{part}]" if isinstance(part, int) else f".{part}"
    return p


def validate_config(raw: dict) -> dict:
    """Validate against the schema; raises ``ConfigError`` on the first (deepest) problem."""
    v = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(v.iter_errors(raw), key=lambda e: (-len(e.absolute_path), e.message))
    if errors:
        e = errors[0]
        raise ConfigError(e.message, _json_path(e))
    return raw


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON ({exc.msg} at line {exc.lineno})") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}") from exc
    return validate_config(raw)


@dataclass
class RunSetup:
    """Everything one simulation needs, plus the fully resolved config."""

    name: str
    plant: InterconnectedSystem
    observer_view: InterconnectedSystem
    gains_raw: dict
    mode: str
    sim: SimConfig
    analysis: dict
    resolved: dict

    def observer(self, gains, mode: str | None = None) -> ObserverPlant:
        return ObserverPlant.from_system(self.observer_view, gains, mode or self.mode)


def _gain_arrays(g: dict, n: int) -> dict:
    out = {}
    for k in ("l1", "l2"):
        v = g[k]
        out[k] = [float(x) for x in (v if isinstance(v, list) else [v] * n)]
    out["gamma"] = [float(x) for x in g["gamma"]]
    out["mu"] = [[float(a), float(b)] for a, b in g["mu"]]
    for k, v in out.items():
        if len(v) != n:
            raise ConfigError(f"expected {n} entries, got {len(v)}", f"$.observer.{k}")
    return out


def resolve(raw: dict) -> RunSetup:
    """Merge a validated config with the preset of its system."""
    cfg = copy.deepcopy(raw)
    system = cfg["system"]
    sim_over = cfg.get("simulation", {})
    obs_over = cfg.get("observer", {})
    if system == "larvae":
        p = LarvaeParams()
        lv = cfg.get("larvae", {})
        if lv:
            kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in lv.items()}
            try:
                p = replace(p, **kw)
            except ValueError as exc:
                raise ConfigError(str(exc), "$.larvae") from exc
        _, gains0, sim0 = paper_config()
        sim0 = replace(sim0, known_input=p.known_input)
        try:
            plant = build_larvae_system(p)
            view = observer_model(p)
        except ValueError as exc:
            raise ConfigError(str(exc), "$.larvae") from exc
        resolved_sys = {"larvae": {k: getattr(p, k) for k in (
            "alpha1", "alpha2", "alpha7", "alpha9", "alpha15", "alpha17", "alpha20", "alpha21",
            "kappa", "L", "T")}}
        default_noise = None
    else:
        spec = BenchmarkSpec(seed=cfg.get("seed"))
        bm = cfg.get("benchmark", {})
        if "setpoints" in bm:
            spec = replace(spec, setpoints=tuple(float(v) for v in bm["setpoints"]))
        if "t_end" in sim_over:
            spec = replace(spec, t_end=float(sim_over["t_end"]))
        plant = synthetic_benchmark(spec)
        view = plant
        gains0 = benchmark_gains()
        sim0 = benchmark_config(spec)
        resolved_sys = {"seed": spec.seed, "benchmark": {"setpoints": list(spec.setpoints)}}
        default_noise = None
    if cfg.get("perturbation", True) is False:
        plant = plant.without_perturbation()

    n = plant.N
    g = gains0.to_dict()
    g.update({k: v for k, v in obs_over.items() if k != "mode"})
    gains_raw = _gain_arrays(g, n)
    mode = obs_over.get("mode", GSTO)

    x0 = sim0.x0
    scale = float(sim_over.get("xhat0_scale", (sim0.xhat0 / x0)[0]))
    noise_cfg = sim_over.get("noise", default_noise)
    noise = None
    if noise_cfg:
        amps = noise_cfg["amplitudes"]
        if len(amps) != n:
            raise ConfigError(f"expected {n} amplitudes, got {len(amps)}", "$.simulation.noise.amplitudes")
        noise = NoiseModel.sinusoid(amps, float(noise_cfg.get("frequency", 1.0)))
    try:
        sim = replace(
            sim0,
            t_end=float(sim_over.get("t_end", sim0.t_end)),
            dt=float(sim_over.get("dt", sim0.dt)),
            method=sim_over.get("method", sim0.method),
            record_stride=int(sim_over.get("record_stride", sim0.record_stride)),
            xhat0=scale * x0,
            noise=noise,
        )
    except ValueError as exc:
        raise ConfigError(str(exc), "$.simulation") from exc

    analysis = dict(_DEFAULT_ANALYSIS[system])
    analysis.update(cfg.get("analysis", {}))
    resolved = {
        "schema": SCHEMA_ID,
        "system": system,
        "perturbation": cfg.get("perturbation", True),
        **resolved_sys,
        "observer": {"mode": mode, **gains_raw},
        "simulation": {
            "t_end": sim.t_end, "dt": sim.dt, "method": sim.method,
            "record_stride": sim.record_stride, "xhat0_scale": scale,
            "x0": np.asarray(sim.x0).tolist(),
            "noise": None if noise_cfg is None else {
                "amplitudes": [float(a) for a in noise_cfg["amplitudes"]],
                "frequency": float(noise_cfg.get("frequency", 1.0)),
            },
        },
        "analysis": analysis,
    }
    return RunSetup(system, plant, view, gains_raw, mode, sim, analysis, resolved)
