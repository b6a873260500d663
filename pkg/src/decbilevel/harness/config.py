"""YAML experiment configuration with strict validation.

Unknown keys are rejected and every error names the offending dotted key
(e.g. "topology.p_c"). The full documented schema with defaults lives in
the README; parse_config returns both typed fields and the fully resolved
mapping for echoing into run summaries.
"""

from __future__ import annotations

from dataclasses import dataclass

import yaml

from decbilevel.algorithms import ALGORITHMS, Schedule


class ConfigError(ValueError):
    """Configuration schema violation naming the offending key."""


def _want(d: dict, key: str, kind, default, where: str, check=None):
    val = d.get(key, default)
    if val is None and default is None and key not in d:
        return None
    name = f"{where}.{key}" if where else key
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if kind is not None and not isinstance(val, kind) or isinstance(val, bool) and kind in (int, float):
        raise ConfigError(f"{name}: expected {getattr(kind, '__name__', kind)}, got {val!r}")
    if check is not None:
        err = check(val)
        if err:
            raise ConfigError(f"{name}: {err}")
    return val


def _reject_unknown(d: dict, allowed, where: str):
    for key in d:
        if key not in allowed:
            name = f"{where}.{key}" if where else key
            raise ConfigError(f"{name}: unknown key")


@dataclass(frozen=True)
class ExperimentConfig:
    algorithms: tuple
    problem: dict
    topology: dict
    schedule: Schedule
    K: object  # int or "auto"
    derandomize: bool
    T: int
    seeds: tuple
    cadence: int
    init_scale: float
    out: str
    echo: dict


_TOP_KEYS = {"algorithm", "problem", "topology", "schedule", "K", "derandomize",
             "T", "seeds", "cadence", "init_scale", "out"}

_QUAD_KEYS = {"kind", "d_up", "d_low", "conditioning", "sigma_f", "sigma_g",
              "rho", "seed"}
_LOGI_KEYS = {"kind", "n_per_agent", "p", "separation", "batch_size",
              "libsvm_path", "seed"}


def _parse_problem(raw) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("problem: expected a mapping")
    kind = raw.get("kind", "quadratic")
    if kind == "quadratic":
        _reject_unknown(raw, _QUAD_KEYS, "problem")
        return {
            "kind": "quadratic",
            "d_up": _want(raw, "d_up", int, 5, "problem",
                          lambda v: None if v >= 1 else f"must be >= 1, got {v}"),
            "d_low": _want(raw, "d_low", int, 5, "problem",
                           lambda v: None if v >= 1 else f"must be >= 1, got {v}"),
            "conditioning": _want(raw, "conditioning", float, 2.0, "problem",
                                  lambda v: None if v >= 1 else f"must be >= 1, got {v}"),
            "sigma_f": _want(raw, "sigma_f", float, 0.0, "problem",
                             lambda v: None if v >= 0 else f"must be >= 0, got {v}"),
            "sigma_g": _want(raw, "sigma_g", float, 0.0, "problem",
                             lambda v: None if v >= 0 else f"must be >= 0, got {v}"),
            "rho": _want(raw, "rho", float, 0.5, "problem",
                         lambda v: None if v >= 0 else f"must be >= 0, got {v}"),
            "seed": _want(raw, "seed", int, 0, "problem"),
        }
    if kind == "logistic":
        _reject_unknown(raw, _LOGI_KEYS, "problem")
        batch = raw.get("batch_size", 5)
        if batch is not None:
            batch = _want(raw, "batch_size", int, 5, "problem",
                          lambda v: None if v >= 1 else f"must be >= 1, got {v}")
        path = raw.get("libsvm_path")
        if path is not None and not isinstance(path, str):
            raise ConfigError(f"problem.libsvm_path: expected string path, got {path!r}")
        return {
            "kind": "logistic",
            "n_per_agent": _want(raw, "n_per_agent", int, 200, "problem",
                                 lambda v: None if v >= 2 else f"must be >= 2, got {v}"),
            "p": _want(raw, "p", int, 20, "problem",
                       lambda v: None if v >= 1 else f"must be >= 1, got {v}"),
            "separation": _want(raw, "separation", float, 2.0, "problem",
                                lambda v: None if v >= 0 else f"must be >= 0, got {v}"),
            "batch_size": batch,
            "libsvm_path": path,
            "seed": _want(raw, "seed", int, 0, "problem"),
        }
    raise ConfigError(f"problem.kind: must be 'quadratic' or 'logistic', got {kind!r}")


def _parse_topology(raw) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("topology: expected a mapping")
    _reject_unknown(raw, {"m", "p_c", "matrix", "seed"}, "topology")
    matrix = _want(raw, "matrix", str, "laplacian", "topology")
    if matrix not in ("laplacian", "metropolis"):
        raise ConfigError(
            f"topology.matrix: must be 'laplacian' or 'metropolis', got {matrix!r}")
    return {
        "m": _want(raw, "m", int, 9, "topology",
                   lambda v: None if v >= 1 else f"must be >= 1, got {v}"),
        "p_c": _want(raw, "p_c", float, 0.5, "topology",
                     lambda v: None if 0.0 <= v <= 1.0 else f"must be in [0, 1], got {v}"),
        "matrix": matrix,
        "seed": _want(raw, "seed", int, 0, "topology"),
    }


def _parse_schedule(raw) -> Schedule:
    if not isinstance(raw, dict):
        raise ConfigError("schedule: expected a mapping")
    _reject_unknown(raw, {"c_alpha", "omega", "c_beta", "c_eta", "c_gamma"}, "schedule")
    kwargs = {}
    for key, default in (("c_alpha", 10.0), ("omega", 2.0), ("c_beta", 10.0),
                         ("c_eta", 0.1), ("c_gamma", 0.1)):
        kwargs[key] = _want(raw, key, float, default, "schedule")
    try:
        return Schedule(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"schedule: {exc}") from exc


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config root: expected a mapping")
    _reject_unknown(raw, _TOP_KEYS, "")
    algo = raw.get("algorithm", "diamond")
    algos = [algo] if isinstance(algo, str) else algo
    if not isinstance(algos, list) or not algos:
        raise ConfigError(f"algorithm: expected name or non-empty list, got {algo!r}")
    for a in algos:
        if a not in ALGORITHMS:
            raise ConfigError(f"algorithm: unknown algorithm {a!r}; choose from {ALGORITHMS}")
    problem = _parse_problem(raw.get("problem", {}))
    topology = _parse_topology(raw.get("topology", {}))
    schedule = _parse_schedule(raw.get("schedule", {}))
    k = raw.get("K", "auto")
    if k != "auto":
        if not isinstance(k, int) or isinstance(k, bool) or k < 1:
            raise ConfigError(f"K: must be a positive integer or 'auto', got {k!r}")
    derand = raw.get("derandomize", False)
    if not isinstance(derand, bool):
        raise ConfigError(f"derandomize: expected true/false, got {derand!r}")
    t_horizon = _want(raw, "T", int, 1000, "",
                      lambda v: None if v >= 1 else f"must be >= 1, got {v}")
    seeds = raw.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds or \
            not all(isinstance(v, int) and not isinstance(v, bool) for v in seeds):
        raise ConfigError(f"seeds: expected non-empty list of integers, got {seeds!r}")
    cadence = _want(raw, "cadence", int, 10, "",
                    lambda v: None if v >= 1 else f"must be >= 1, got {v}")
    init_scale = _want(raw, "init_scale", float, 1.0, "",
                       lambda v: None if v >= 0 else f"must be >= 0, got {v}")
    out = _want(raw, "out", str, "results", "")
    echo = {
        "algorithm": list(algos),
        "problem": dict(problem),
        "topology": dict(topology),
        "schedule": {k2: getattr(schedule, k2)
                     for k2 in ("c_alpha", "omega", "c_beta", "c_eta", "c_gamma")},
        "K": k,
        "derandomize": derand,
        "T": t_horizon,
        "seeds": list(seeds),
        "cadence": cadence,
        "init_scale": init_scale,
        "out": out,
    }
    return ExperimentConfig(
        algorithms=tuple(algos), problem=problem, topology=topology,
        schedule=schedule, K=k, derandomize=derand, T=t_horizon,
        seeds=tuple(seeds), cadence=cadence, init_scale=init_scale,
        out=out, echo=echo,
    )


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML config document."""
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config root: not valid YAML ({exc})") from exc
    if raw is None:
        raw = {}
    return config_from_dict(raw)
