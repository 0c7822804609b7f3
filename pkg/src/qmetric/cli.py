"""Command-line experiment runner.

Exit codes: 0 ok, 2 configuration error, 3 contract violation (a bound
violated, a certification verdict differing from the expected one, an
equivalence residual exceeded), 4 numerical failure (divergence, singular
systems, fixed point not found).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .calculus import classify_regime
from .certify import PropertyKind, certify
from .config import ExperimentConfig, load_config, parse_config
from .errors import (
    ConfigParseError,
    DivergenceDetected,
    FixedPointNotFound,
    InvalidCertificate,
    InvalidDimension,
    MetricMismatch,
    MetricStructureError,
    NoUniqueFixedPoint,
    NonFiniteValue,
    NotAFixedPoint,
    RuleNotApplicable,
    SingularResolvent,
    UnsupportedPairing,
)
from .fixed_point import (
    asymptotic_regularity,
    banach_picard,
    krasnoselskii_mann,
    pointwise_bound,
    qlinear_report,
    reference_fixed_point,
    rlinear_report,
    summability_check,
    trace_to_csv,
)
from .pdhg import (
    EQUIVALENCE_TOL,
    PdhgState,
    block_resolvent,
    pdhg_resolvent_equivalence,
    pdhg_run,
    saddle_point,
)
from .resolvent import ppa, resolvent_certificate, rppa

__all__ = ["ExitReport", "run", "main", "EXIT_OK", "EXIT_CONFIG", "EXIT_CONTRACT", "EXIT_NUMERICAL"]

EXIT_OK, EXIT_CONFIG, EXIT_CONTRACT, EXIT_NUMERICAL = 0, 2, 3, 4
STATUS = {EXIT_OK: "ok", EXIT_CONFIG: "config_error", EXIT_CONTRACT: "contract_violation",
          EXIT_NUMERICAL: "numerical_failure"}

VERBS = {
    "certify": ("certify",),
    "iterate": ("banach_picard", "km"),
    "resolvent": ("ppa", "rppa"),
    "pdhg": ("pdhg",),
    "regime": ("regime",),
}

_CONFIG_ERRORS = (ConfigParseError, FileNotFoundError, InvalidDimension, InvalidCertificate, MetricMismatch,
                  MetricStructureError, RuleNotApplicable, UnsupportedPairing, NonFiniteValue, ValueError)
_NUMERICAL_ERRORS = (DivergenceDetected, SingularResolvent, NoUniqueFixedPoint, FixedPointNotFound,
                     NotAFixedPoint, FloatingPointError, np.linalg.LinAlgError)


@dataclass
class ExitReport:
    code: int
    message: str = ""
    report: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)

    @property
    def status(self):
        return STATUS[self.code]


class _Violation(Exception):
    """A contract check failed; carries the partial report."""


def _clean(obj):
    """Make ``obj`` JSON-safe (numpy scalars/arrays, non-finite floats)."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# -- pipelines ------------------------------------------------------------------


def _run_certify(cfg):
    p = cfg.params
    reports = [certify(cfg.operator, cfg.metric, prop, p.n_samples, p.seed, p.sampling, p.tolerance)
               for prop in cfg.properties]
    body = {"metric": cfg.metric.structure | {"id": cfg.metric.id},
            "certifications": [r.to_record() for r in reports]}
    bad = [r.property.label() for r in reports
           if (cfg.expect == "pass" and not r.passed) or (cfg.expect == "fail" and r.passed)]
    if bad:
        raise _Violation(f"verdict differs from expected '{cfg.expect}' for: {', '.join(bad)}", body)
    return body, {}


def _bound_reports(trace, bstar):
    return [pointwise_bound(trace, bstar), qlinear_report(trace, bstar), rlinear_report(trace, bstar)]


def _trace_pipeline(cfg, trace, bstar_fn, extra=None):
    body = {"scheme": trace.scheme, "gamma": trace.gamma, "iterations": trace.K, "converged": trace.converged,
            "metric_id": trace.metric_id, "final": trace.final,
            "asymptotically_regular": asymptotic_regularity(trace) if len(trace.iterates) >= 2 else None,
            "certificate": None if trace.cert is None else trace.cert.to_record()}
    body.update(extra or {})
    reports, bstar = [], None
    if trace.cert is not None:
        bstar = bstar_fn()
        trace = trace.with_solution(bstar)
        reports = _bound_reports(trace, bstar)
        lhs, rhs = summability_check(trace, bstar)
        body["fixed_point"] = bstar
        body["summability"] = {"lhs": lhs, "rhs": rhs, "satisfied": lhs <= rhs * (1.0 + 1e-8) + 1e-8}
        body["bounds"] = [r.to_record() for r in reports]
    csv_text = trace_to_csv(trace, reports, bstar)
    outputs = {"trace.csv": csv_text}
    failed = [r.bound_kind for r in reports if r.applicable and not r.all_satisfied]
    if body.get("summability") and not body["summability"]["satisfied"]:
        failed.append("summability")
    if failed:
        raise _Violation(f"bound violated: {', '.join(failed)}", body, outputs)
    return body, outputs


def _run_iterate(cfg):
    p = cfg.params
    T, m = cfg.operator, cfg.metric
    if cfg.experiment == "km":
        trace = krasnoselskii_mann(T, m, p.gamma, cfg.b0, p.max_iter, p.stop_tol, cfg.certificate)
    else:
        trace = banach_picard(T, m, cfg.b0, p.max_iter, p.stop_tol, cfg.certificate)
    return _trace_pipeline(cfg, trace, lambda: reference_fixed_point(T, m))


def _run_resolvent(cfg):
    p = cfg.params
    r = cfg.operator
    cert = cfg.certificate
    if cert is None and r.m.is_symmetric:
        cert = resolvent_certificate(r)
    if cfg.experiment == "rppa":
        trace = rppa(r, p.gamma, cfg.b0, p.max_iter, p.stop_tol, cert)
    else:
        trace = ppa(r, cfg.b0, p.max_iter, p.stop_tol, cert)
    worst = max(r.inclusion_residual(b, r(b)) / (1.0 + float(np.linalg.norm(b))) for b in trace.iterates[:-1])
    extra = {"solver": r.solver, "mu": r.a.mu, "max_inclusion_residual": worst}
    if worst > 1e-9:
        raise _Violation(f"resolvent inclusion residual {worst:.3e} exceeds 1e-9", extra)
    return _trace_pipeline(cfg, trace, lambda: reference_fixed_point(r, r.m), extra)


def _run_pdhg(cfg):
    p = cfg.params
    prob = cfg.problem
    st0 = PdhgState.from_stacked(prob, cfg.b0)
    trace = pdhg_run(prob, st0, p.max_iter, p.stop_tol)
    block = block_resolvent(prob)
    worst = 0.0
    for b in trace.iterates:
        st = PdhgState.from_stacked(prob, b)
        worst = max(worst, pdhg_resolvent_equivalence(prob, st, block) / (1.0 + float(np.max(np.abs(b)))))
    extra = {"L": prob.L, "N": prob.N, "sigma": prob.sigma, "tau": prob.tau,
             "step_product": prob.step_product, "block_metric_pd": prob.admissible,
             "max_equivalence_residual": worst}
    if worst > EQUIVALENCE_TOL:
        raise _Violation(f"PDHG/resolvent equivalence residual {worst:.3e} exceeds {EQUIVALENCE_TOL}", extra)
    body, outputs = _trace_pipeline(cfg, trace, lambda: saddle_point(prob), extra)
    if trace.cert is not None:
        dist = trace.with_solution(body["fixed_point"]).q_dist_to_sol
        scale = 1.0 + dist[0]
        body["fejer_monotone"] = bool(np.all(np.diff(dist) <= 1e-10 * scale))
        if not body["fejer_monotone"]:
            raise _Violation("trace is not Fejér monotone in the block metric", body, outputs)
    return body, outputs


def _run_regime(cfg):
    gamma = cfg.raw.get("run", {}).get("gamma")
    rep = classify_regime(cfg.certificate, gamma)
    body = {"regime": rep.to_record(), "certificate": cfg.certificate.to_record()}
    T = cfg.operator
    if T is not None:
        p = cfg.params
        cert = cfg.certificate
        checks = [certify(T, cfg.metric, PropertyKind.averaged(cert.xi, cert.alpha), p.n_samples, p.seed,
                          p.sampling, p.tolerance)]
        if rep.operator.firmly_nonexpansive:
            checks.append(certify(T, cfg.metric, PropertyKind.firmly_nonexpansive(), p.n_samples, p.seed,
                                  p.sampling, p.tolerance))
        body["certifications"] = [c.to_record() for c in checks]
        failed = [c.property.label() for c in checks if not c.passed]
        if failed:
            raise _Violation(f"regime claims not confirmed by sampling: {', '.join(failed)}", body)
    return body, {}


_PIPELINES = {
    "certify": _run_certify,
    "banach_picard": _run_iterate,
    "km": _run_iterate,
    "ppa": _run_resolvent,
    "rppa": _run_resolvent,
    "pdhg": _run_pdhg,
    "regime": _run_regime,
}


def _write(out_dir, body, outputs):
    written = {}
    if out_dir is None:
        return written
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in outputs.items():
        path = out_dir / name
        path.write_text(text)
        written[name] = str(path)
    path = out_dir / "report.json"
    path.write_text(json.dumps(_clean(body), indent=2, sort_keys=True) + "\n")
    written["report.json"] = str(path)
    return written


def run(config, out_dir=None, verb=None, overrides=None):
    """Execute one experiment and write its outputs.

    Parameters
    ----------
    config : ExperimentConfig, dict or path
    out_dir : path, optional
        Directory receiving ``report.json`` (and ``trace.csv`` for
        iterations).  Nothing is written when omitted.
    verb : str, optional
        CLI verb; the experiment kind must belong to it.
    overrides : dict, optional
        Run-parameter overrides (seed, tolerance, ...).

    Returns
    -------
    ExitReport
    """
    body, outputs = {}, {}
    try:
        if isinstance(config, ExperimentConfig):
            cfg = config
        elif isinstance(config, dict):
            cfg = parse_config(config, overrides=overrides)
        else:
            cfg = load_config(config, overrides)
        if verb is not None and cfg.experiment not in VERBS[verb]:
            raise ConfigParseError(f"verb '{verb}' cannot run experiment '{cfg.experiment}'")
        header = {"experiment": cfg.experiment, "name": cfg.name, "version": __version__,
                  "seed": cfg.params.seed}
        try:
            body, outputs = _PIPELINES[cfg.experiment](cfg)
            code, msg = EXIT_OK, "ok"
        except _Violation as exc:
            msg = exc.args[0]
            body = exc.args[1] if len(exc.args) > 1 else {}
            outputs = exc.args[2] if len(exc.args) > 2 else {}
            code = EXIT_CONTRACT
        body = header | body
    except _NUMERICAL_ERRORS as exc:
        code, msg = EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}"
        if isinstance(exc, DivergenceDetected):
            body["divergence_k"] = exc.k
    except _CONFIG_ERRORS as exc:
        code, msg = EXIT_CONFIG, f"{type(exc).__name__}: {exc}"
    body["status"] = STATUS[code]
    body["message"] = msg
    written = _write(out_dir, body, outputs)
    return ExitReport(code, msg, _clean(body), written)


# -- command line -------------------------------------------------------------------


def _overrides(args):
    return {"seed": args.seed, "tolerance": args.tolerance, "stop_tol": args.stop_tol,
            "max_iter": args.max_iter, "n_samples": args.n_samples}


def _batch(paths, out_dir, overrides, workers):
    out_dir = Path(out_dir or "qmetric-out")
    stems = [Path(p).stem for p in paths]
    if len(set(stems)) != len(stems):
        return [ExitReport(EXIT_CONFIG, "batch config file names must be distinct")]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(run, p, out_dir / s, None, overrides) for p, s in zip(paths, stems)]
        return [f.result() for f in futures]


def build_parser():
    parser = argparse.ArgumentParser(prog="qmetric", description="Q-metric operator experiments.")
    parser.add_argument("--version", action="version", version=f"qmetric {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)
    for verb in (*VERBS, "batch"):
        sp = sub.add_parser(verb, help=f"run {verb} experiments" if verb != "batch" else "run several configs")
        sp.add_argument("config", nargs="+" if verb == "batch" else None, help="JSON experiment config")
        sp.add_argument("-o", "--out-dir", default=None, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--tolerance", type=float, default=None, help="certification tolerance")
        sp.add_argument("--stop-tol", type=float, default=None)
        sp.add_argument("--max-iter", type=int, default=None)
        sp.add_argument("--n-samples", type=int, default=None)
        if verb == "batch":
            sp.add_argument("--workers", type=int, default=4)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = _overrides(args)
    if args.verb == "batch":
        results = _batch(args.config, args.out_dir, overrides, args.workers)
        for path, res in zip(args.config, results):
            print(f"{path}: {res.status} ({res.code}) {res.message}")
        return max(r.code for r in results)
    out_dir = args.out_dir or Path("qmetric-out") / Path(args.config).stem
    res = run(args.config, out_dir, args.verb, overrides)
    print(f"{res.status} ({res.code}): {res.message}")
    for name, path in res.outputs.items():
        print(f"  wrote {path}")
    return res.code


if __name__ == "__main__":
    sys.exit(main())
