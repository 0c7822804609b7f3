"""Experiment configuration: a single JSON document.

Grammar (all keys optional unless the experiment needs them)::

    {
      "experiment": "certify" | "banach_picard" | "km" | "ppa" | "rppa"
                    | "pdhg" | "regime",
      "n": 3,                                  # declared dimension
      "metric": {"identity": true}
              | {"scalar": 2.0}
              | {"rows": 3, "cols": 3, "data": [...]}   # row-major
              | {"n": 3, "data": [...]}
              | {"file": "q.txt"},            # relative to the config file
      "operator": {"kind": "affine", "matrix": <matrix>, "offset": [...]}
                | {"kind": "scaled_identity", "scale": 0.5}
                | {"kind": "prox", "function": <function>, "step": 1.0}
                | {"kind": "resolvent", "monotone": <monotone>}
                | {"kind": "relaxed" | "complement", "base": <operator>, "gamma": g}
                | {"kind": "reflection", "base": <operator>},
      "monotone": <monotone>,                  # for ppa / rppa
      "property": {"kind": "averaged", "xi": 1.0, "alpha": 0.5},
      "properties": [<property>, ...],
      "expect": "pass" | "fail" | "any",
      "certificate": {"type": "averaged", "xi": .., "alpha": ..}
                   | {"type": "cocoercive", "beta": ..},
      "problem": {"f": <function>, "g": <function>, "A": <matrix>,
                  "sigma": .., "tau": ..},
      "run": {"max_iter": 10000, "stop_tol": 1e-10, "n_samples": 1000,
              "seed": 0, "gamma": 1.0, "tolerance": 1e-8,
              "b0": [...], "s0": [...], "x0": [...], "low": -10, "high": 10}
    }

``<function>`` is ``{"kind": "quadratic", "center": ..}``,
``{"kind": "l1", "lam": ..}`` or ``{"kind": "box", "lower": .., "upper": ..}``.
``<monotone>`` is ``{"kind": "affine", "matrix": .., "offset": ..}``,
``{"kind": "zero", "n": ..}``, ``{"kind": "subdifferential", "function": ..}``
or ``{"kind": "scaled_strong", "base": <monotone>, "mu": ..}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .calculus import AveragedCertificate, CocoercivityCertificate
from .certify import PropertyKind, SamplingSpec
from .errors import ConfigParseError
from .functions import function_from_spec
from .metric import Metric, load_matrix, matrix_from_payload
from .operators import Affine, ProxOfConvex, Reflection, Relaxed, ScaledComplement
from .pdhg import problem_from_spec
from .resolvent import ResolventHandle, monotone_from_spec

__all__ = ["ExperimentConfig", "RunParameters", "load_config", "parse_config", "EXPERIMENTS"]

EXPERIMENTS = ("certify", "banach_picard", "km", "ppa", "rppa", "pdhg", "regime")


@dataclass(frozen=True)
class RunParameters:
    max_iter: int = 10_000
    stop_tol: float = 1e-10
    n_samples: int = 1000
    seed: int = 0
    gamma: float = 1.0
    tolerance: float = 1e-8
    low: float = -10.0
    high: float = 10.0

    def __post_init__(self):
        if self.max_iter < 1 or self.n_samples < 1:
            raise ConfigParseError("max_iter and n_samples must be at least 1")
        if not (self.stop_tol > 0 and self.tolerance > 0):
            raise ConfigParseError("tolerances must be positive")
        if self.seed < 0:
            raise ConfigParseError("seed must be non-negative")

    @property
    def sampling(self):
        return SamplingSpec(self.low, self.high)


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    raw: dict = field(repr=False)
    base_dir: Path = Path(".")
    params: RunParameters = RunParameters()
    metric: Metric = None
    operator: object = None
    properties: tuple = ()
    expect: str = "pass"
    certificate: object = None
    problem: object = None
    b0: np.ndarray = None
    name: str = "experiment"


def _metric(spec, n, base_dir):
    if spec is None or spec.get("identity"):
        if n is None:
            raise ConfigParseError("identity metric needs a declared dimension 'n'")
        return Metric.identity(n)
    if "scalar" in spec:
        return Metric.scalar(float(spec["scalar"]), n)
    if "file" in spec:
        path = Path(spec["file"])
        path = path if path.is_absolute() else base_dir / path
        if not path.exists():
            raise FileNotFoundError(f"metric file not found: {path}")
        return Metric(load_matrix(path))
    return Metric(matrix_from_payload(spec))


def _operator(spec, n, m):
    kind = spec.get("kind")
    if kind == "affine":
        return Affine(matrix_from_payload(spec["matrix"]), spec.get("offset"))
    if kind == "scaled_identity":
        return Affine(float(spec["scale"]) * np.eye(n), spec.get("offset"))
    if kind == "prox":
        return ProxOfConvex(function_from_spec(spec["function"]), float(spec.get("step", 1.0)), n)
    if kind == "resolvent":
        return ResolventHandle(monotone_from_spec(spec["monotone"], n), m)
    if kind == "relaxed":
        return Relaxed(_operator(spec["base"], n, m), float(spec["gamma"]))
    if kind == "complement":
        return ScaledComplement(_operator(spec["base"], n, m), float(spec.get("gamma", 1.0)))
    if kind == "reflection":
        return Reflection(_operator(spec["base"], n, m))
    raise ConfigParseError(f"unknown operator kind {kind!r}")


def _certificate(spec, m, op):
    if spec is None:
        return None
    kind = spec.get("type", "averaged")
    if kind == "averaged":
        return AveragedCertificate(float(spec["xi"]), float(spec["alpha"]), m, operator=op)
    if kind == "cocoercive":
        return CocoercivityCertificate(float(spec["beta"]), m, operator=op)
    raise ConfigParseError(f"unknown certificate type {kind!r}")


def _params(spec):
    spec = dict(spec or {})
    known = set(RunParameters.__dataclass_fields__)
    extra = set(spec) - known - {"b0", "s0", "x0"}
    if extra:
        raise ConfigParseError(f"unknown run parameters: {sorted(extra)}")
    kwargs = {k: spec[k] for k in known if k in spec}
    for k in ("max_iter", "n_samples", "seed"):
        if k in kwargs:
            kwargs[k] = int(kwargs[k])
    for k in ("stop_tol", "gamma", "tolerance", "low", "high"):
        if k in kwargs:
            kwargs[k] = float(kwargs[k])
            if not math.isfinite(kwargs[k]):
                raise ConfigParseError(f"run.{k} must be finite")
    return RunParameters(**kwargs)


def parse_config(raw, base_dir=".", name="experiment", overrides=None):
    """Validate a config mapping and build the objects it references.

    Raises :class:`ConfigParseError` (or ``FileNotFoundError``) on any
    problem; errors from the object constructors are wrapped.
    """
    if not isinstance(raw, dict):
        raise ConfigParseError("config must be a JSON object")
    raw = json.loads(json.dumps(raw))  # private copy
    if overrides:
        raw.setdefault("run", {}).update({k: v for k, v in overrides.items() if v is not None})
    exp = raw.get("experiment")
    if exp not in EXPERIMENTS:
        raise ConfigParseError(f"experiment must be one of {EXPERIMENTS}, got {exp!r}")
    base_dir = Path(base_dir)
    try:
        params = _params(raw.get("run"))
        n = raw.get("n")
        n = None if n is None else int(n)
        problem = metric = op = cert = b0 = None
        props = ()
        if exp == "pdhg":
            if "problem" not in raw:
                raise ConfigParseError("pdhg experiments need a 'problem'")
            problem = problem_from_spec(raw["problem"])
            run = raw.get("run", {})
            s0 = np.asarray(run.get("s0", np.zeros(problem.L)), dtype=float)
            x0 = np.asarray(run.get("x0", np.zeros(problem.N)), dtype=float)
            b0 = np.concatenate([s0, x0])
            if b0.shape != (problem.n,):
                raise ConfigParseError("s0/x0 do not match the problem dimensions")
        else:
            metric = _metric(raw.get("metric"), n, base_dir)
            if n is not None and metric.n != n:
                raise ConfigParseError(f"declared n={n} but metric is {metric.n}x{metric.n}")
            n = metric.n
            if exp in ("ppa", "rppa"):
                if "monotone" not in raw:
                    raise ConfigParseError(f"{exp} experiments need a 'monotone' operator")
                op = ResolventHandle(monotone_from_spec(raw["monotone"], n), metric)
            elif "operator" in raw:
                op = _operator(raw["operator"], n, metric)
            elif exp != "regime":
                raise ConfigParseError(f"{exp} experiments need an 'operator'")
            if op is not None and op.n != n:
                raise ConfigParseError(f"operator dimension {op.n} does not match n={n}")
            cert = _certificate(raw.get("certificate"), metric, op)
            if exp == "regime" and cert is None:
                raise ConfigParseError("regime experiments need a 'certificate'")
            if exp == "certify":
                specs = raw.get("properties") or ([raw["property"]] if "property" in raw else None)
                if not specs:
                    raise ConfigParseError("certify experiments need a 'property' or 'properties'")
                props = tuple(PropertyKind.from_spec(p) for p in specs)
            run = raw.get("run", {})
            b0 = np.asarray(run.get("b0", np.ones(n)), dtype=float)
            if b0.shape != (n,):
                raise ConfigParseError(f"b0 must have length {n}")
        expect = raw.get("expect", "pass")
        if expect not in ("pass", "fail", "any"):
            raise ConfigParseError("expect must be 'pass', 'fail' or 'any'")
    except (KeyError, TypeError, AttributeError) as exc:
        raise ConfigParseError(f"malformed config: {exc!r}") from exc
    return ExperimentConfig(
        experiment=exp, raw=raw, base_dir=base_dir, params=params, metric=metric, operator=op,
        properties=props, expect=expect, certificate=cert, problem=problem, b0=b0, name=name,
    )


def load_config(path, overrides=None):
    """Read and parse a config file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{path}: {exc}") from exc
    return parse_config(raw, path.parent, path.stem, overrides)
