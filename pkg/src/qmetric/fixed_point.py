"""Banach-Picard and Krasnosel'skii-Mann iterations with rate-bound checks.

Traces record every iterate and the ``Q``-sequential errors
``||b^k - b^{k+1}||_Q``.  The bound evaluators compare a trace against the
pointwise ``O(1/sqrt(k))``, q-linear and r-linear envelopes implied by the
certificate attached to the trace.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .calculus import AveragedCertificate, CocoercivityCertificate, class_from_cocoercive
from .errors import (
    DivergenceDetected,
    FixedPointNotFound,
    NoUniqueFixedPoint,
    NotAFixedPoint,
)
from .metric import Metric, as_vector
from .operators import Relaxed

__all__ = [
    "IterationTrace",
    "RateBoundReport",
    "banach_picard",
    "krasnoselskii_mann",
    "pointwise_bound",
    "qlinear_report",
    "rlinear_report",
    "summability_check",
    "asymptotic_regularity",
    "reference_fixed_point",
    "trace_to_csv",
    "MARGIN_TOL",
]

DEFAULT_MAX_ITER = 10_000
DEFAULT_STOP_TOL = 1e-10
MARGIN_TOL = 1e-8
FIXED_POINT_TOL = 1e-8
GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0
LN_GOLDEN = math.log(GOLDEN)
R_LINEAR_ALPHA_MIN = (3.0 - math.sqrt(5.0)) / 2.0
COCOERCIVE_GLOBAL_BETA = (3.0 + math.sqrt(5.0)) / 4.0
# q-linear ratios are only reported while the squared distance exceeds this
# fraction of the initial one; below it the ratio is rounding noise.
RATIO_FLOOR = 1e-12

Certificate = Union[AveragedCertificate, CocoercivityCertificate]


@dataclass(frozen=True, eq=False)
class IterationTrace:
    iterates: np.ndarray
    q_seq_err: np.ndarray
    metric: Metric
    scheme: str
    gamma: float = 1.0
    cert: Optional[Certificate] = None
    operator: object = field(default=None, repr=False)
    stop_tol: float = DEFAULT_STOP_TOL
    converged: bool = False
    q_dist_to_sol: Optional[np.ndarray] = None

    @property
    def metric_id(self):
        return self.metric.id

    @property
    def K(self):
        return len(self.q_seq_err)

    @property
    def b0(self):
        return self.iterates[0]

    @property
    def final(self):
        return self.iterates[-1]

    def with_solution(self, bstar):
        """Copy of the trace with ``q_dist_to_sol`` filled in for ``bstar``."""
        dist = _dists(self.metric, self.iterates - bstar)
        return IterationTrace(**{**self.__dict__, "q_dist_to_sol": dist})


@dataclass(frozen=True, eq=False)
class RateBoundReport:
    bound_kind: str
    nu: float
    per_k_margin: np.ndarray
    all_satisfied: bool
    applicable: bool = True
    reason: str = ""
    local_onset_k: Optional[int] = None
    global_regime: Optional[bool] = None
    proof_onset_k: Optional[int] = None
    bound_values: Optional[np.ndarray] = None
    observed_values: Optional[np.ndarray] = None
    seq_margin: Optional[np.ndarray] = None
    max_observed_ratio: Optional[float] = None
    scale: float = 1.0

    @property
    def min_margin(self):
        vals = [np.min(a) for a in (self.per_k_margin, self.seq_margin) if a is not None and len(a)]
        return float(min(vals)) if vals else math.inf

    def to_record(self):
        return {
            "bound_kind": self.bound_kind,
            "applicable": self.applicable,
            "reason": self.reason,
            "nu": self.nu,
            "all_satisfied": self.all_satisfied,
            "min_margin": None if not self.applicable else self.min_margin,
            "local_onset_k": self.local_onset_k,
            "global_regime": self.global_regime,
            "proof_onset_k": self.proof_onset_k,
            "max_observed_ratio": self.max_observed_ratio,
            "scale": self.scale,
        }


def _not_applicable(kind, reason, nu=math.nan):
    return RateBoundReport(kind, nu, np.empty(0), True, applicable=False, reason=reason)


def _dists(m, X):
    X = np.atleast_2d(X)
    return np.sqrt(np.maximum(0.0, np.einsum("ij,ij->i", X @ m.q.T, X)))


def _qn(m, x):
    return float(np.dot(m.q @ x, x))


# -- iterations ---------------------------------------------------------------


def _iterate(T, m, b0, max_iter, stop_tol, scheme, gamma, cert, base):
    m.require(symmetric=True, pd=True, what=scheme)
    b = as_vector(b0, m.n, "b0").copy()
    threshold = stop_tol * (1.0 + math.sqrt(max(0.0, _qn(m, b))))
    iterates = [b]
    errs = []
    converged = False
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(int(max_iter)):
            nxt = T.apply(b)
            if not np.all(np.isfinite(nxt)):
                raise DivergenceDetected(k + 1)
            d = b - nxt
            err = math.sqrt(max(0.0, _qn(m, d)))
            if not math.isfinite(err):
                raise DivergenceDetected(k + 1)
            iterates.append(nxt)
            errs.append(err)
            b = nxt
            if err <= threshold:
                converged = True
                break
    return IterationTrace(
        iterates=np.array(iterates),
        q_seq_err=np.array(errs),
        metric=m,
        scheme=scheme,
        gamma=gamma,
        cert=cert,
        operator=base,
        stop_tol=stop_tol,
        converged=converged,
    )


def banach_picard(T, m, b0, max_iter=DEFAULT_MAX_ITER, stop_tol=DEFAULT_STOP_TOL, cert=None):
    """Iterate ``b^{k+1} = T b^k``.

    Stops once ``||b^k - b^{k+1}||_Q <= stop_tol (1 + ||b^0||_Q)`` or after
    ``max_iter`` steps.  The metric must be symmetric positive definite so
    the recorded distances are norms.

    Raises
    ------
    DivergenceDetected
        If an iterate becomes non-finite.
    """
    return _iterate(T, m, b0, max_iter, stop_tol, "banach_picard", 1.0, cert, T)


def krasnoselskii_mann(T, m, gamma, b0, max_iter=DEFAULT_MAX_ITER, stop_tol=DEFAULT_STOP_TOL, cert=None):
    """Iterate ``b^{k+1} = (1 - gamma) b^k + gamma T b^k``.

    ``cert`` describes ``T`` itself; the bound evaluators account for the
    relaxation.  With ``gamma = 1`` the iterates equal those of
    :func:`banach_picard` exactly.
    """
    return _iterate(Relaxed(T, gamma), m, b0, max_iter, stop_tol, "km", float(gamma), cert, T)


# -- bounds -------------------------------------------------------------------


@dataclass(frozen=True)
class _Rates:
    kind: str  # "averaged" or "cocoercive"
    nu: float
    a: float = math.nan  # effective averagedness (gamma * alpha)
    xi: float = math.nan
    beta: float = math.nan


def _rates(trace):
    cert = trace.cert
    if cert is None:
        return None
    if isinstance(cert, CocoercivityCertificate) and trace.gamma == 1.0:
        return _Rates("cocoercive", 1.0 / (2.0 * cert.beta - 1.0) if cert.beta > 0.5 else math.inf, beta=cert.beta)
    if isinstance(cert, CocoercivityCertificate):
        cert = class_from_cocoercive(cert)
    a = trace.gamma * cert.alpha
    return _Rates("averaged", 1.0 - a + a * cert.xi**2, a=a, xi=cert.xi)


def _check_fixed(trace, bstar):
    bstar = as_vector(bstar, trace.metric.n, "bstar")
    T = trace.operator
    if T is not None:
        res = math.sqrt(max(0.0, _qn(trace.metric, T(bstar) - bstar)))
        if res > FIXED_POINT_TOL:
            raise NotAFixedPoint(f"||T b* - b*||_Q = {res:.3e} exceeds {FIXED_POINT_TOL}")
    return bstar


def _initial_distance(trace, bstar):
    return math.sqrt(max(0.0, _qn(trace.metric, trace.b0 - bstar)))


def pointwise_bound(trace, bstar):
    """Check ``||b^{k+1} - b^k||_Q <= c / sqrt(k+1) * ||b^0 - b*||_Q`` for all k.

    ``c`` is ``sqrt(a/(1-a))`` with ``a = gamma alpha`` for averaged
    certificates (requires ``xi <= 1`` and ``a < 1``) or ``sqrt(2 beta - 1)``
    for cocoercive ones (requires ``beta >= 1``).
    """
    bstar = _check_fixed(trace, bstar)
    if trace.K == 0:
        raise ValueError("trace is empty")
    r = _rates(trace)
    if r is None:
        return _not_applicable("PointwiseSqrtK", "trace carries no certificate")
    if r.kind == "cocoercive":
        if r.beta < 1.0:
            return _not_applicable("PointwiseSqrtK", "requires beta >= 1", r.nu)
        factor = math.sqrt(2.0 * r.beta - 1.0)
    else:
        if r.xi > 1.0 or r.a >= 1.0:
            return _not_applicable("PointwiseSqrtK", "requires xi <= 1 and gamma*alpha < 1", r.nu)
        factor = math.sqrt(r.a / (1.0 - r.a))
    d0 = _initial_distance(trace, bstar)
    k = np.arange(trace.K)
    bound = factor * d0 / np.sqrt(k + 1.0)
    margin = bound - trace.q_seq_err
    scale = 1.0 + d0
    return RateBoundReport(
        "PointwiseSqrtK", r.nu, margin, bool(np.all(margin >= -MARGIN_TOL * scale)),
        bound_values=bound, observed_values=trace.q_seq_err.copy(), scale=scale,
    )


def qlinear_report(trace, bstar):
    """Check the q-linear contractions of distance and sequential error.

    Verifies ``||b^{k+1} - b*||_Q^2 <= nu ||b^k - b*||_Q^2`` and
    ``||b^{k+1} - b^{k+2}||_Q^2 <= nu ||b^k - b^{k+1}||_Q^2``.  Only
    applicable for ``xi < 1`` (or ``beta > 1``).
    """
    bstar = _check_fixed(trace, bstar)
    r = _rates(trace)
    if r is None:
        return _not_applicable("QLinear", "trace carries no certificate")
    if r.kind == "cocoercive" and not r.beta > 1.0:
        return _not_applicable("QLinear", "requires beta > 1", r.nu)
    if r.kind == "averaged" and not (r.xi < 1.0 and r.a < 1.0):
        return _not_applicable("QLinear", "requires xi < 1 and gamma*alpha < 1", r.nu)
    m = trace.metric
    X = trace.iterates - bstar
    dsq = np.einsum("ij,ij->i", X @ m.q.T, X)
    esq = trace.q_seq_err**2
    d0sq = max(0.0, float(dsq[0]))
    scale = 1.0 + d0sq
    margin = r.nu * dsq[:-1] - dsq[1:]
    seq_margin = r.nu * esq[:-1] - esq[1:]
    ok = bool(np.all(margin >= -MARGIN_TOL * scale) and np.all(seq_margin >= -MARGIN_TOL * scale))
    meaningful = dsq[:-1] > RATIO_FLOOR * d0sq
    ratio = float(np.max(dsq[1:][meaningful] / dsq[:-1][meaningful])) if np.any(meaningful) else None
    return RateBoundReport(
        "QLinear", r.nu, margin, ok, bound_values=np.sqrt(np.maximum(0.0, r.nu * dsq[:-1])),
        observed_values=np.sqrt(np.maximum(0.0, dsq[1:])), seq_margin=seq_margin,
        max_observed_ratio=ratio, scale=scale,
    )


def rlinear_report(trace, bstar):
    """Check the r-linear envelope of the sequential error.

    Averaged certificates (``a = gamma alpha``, ``nu = 1 - a + a xi^2``):
    ``||b^k - b^{k+1}||_Q <= sqrt(a (1-nu) / ((1-a) nu)) nu^{(k+1)/4}
    ||b^0 - b*||_Q``, globally when ``a > (3 - sqrt5)/2`` and
    ``xi^2 <= 1 - (3 - sqrt5)/(2a)``, otherwise for
    ``k >= ln(golden)/ln(1/sqrt(nu)) - 1``.  Cocoercive certificates use
    ``sqrt(2(beta-1)) (2beta-1)^{-(k-1)/4}``, global for
    ``beta >= (3 + sqrt5)/4``.  Margins before the local onset are reported
    but not counted.

    ``proof_onset_k`` is the first ``k`` covered by the summation argument
    behind the bound, ``ceil(ln(golden)/ln(1/sqrt(nu)) - 1)`` clipped at 0.
    The global condition only guarantees ``proof_onset_k <= 1``; the global
    regime is nevertheless evaluated from ``k = 0`` as stated, so a ``k = 0``
    violation there shows up as ``all_satisfied = False``.
    """
    bstar = _check_fixed(trace, bstar)
    r = _rates(trace)
    kind = "RLinearGlobal"
    if r is None:
        return _not_applicable(kind, "trace carries no certificate")
    if not r.nu < 1.0:
        return _not_applicable(kind, "requires nu < 1", r.nu)
    k = np.arange(trace.K, dtype=float)
    d0 = _initial_distance(trace, bstar)
    if r.kind == "cocoercive":
        q = 2.0 * r.beta - 1.0
        bound = math.sqrt(2.0 * (r.beta - 1.0)) * q ** (-(k - 1.0) / 4.0) * d0
        is_global = r.beta >= COCOERCIVE_GLOBAL_BETA
        onset = LN_GOLDEN / math.log(math.sqrt(q)) - 1.0
    else:
        if r.a >= 1.0:
            return _not_applicable(kind, "requires gamma*alpha < 1", r.nu)
        c = math.sqrt(r.a * (1.0 - r.nu) / ((1.0 - r.a) * r.nu))
        bound = c * r.nu ** ((k + 1.0) / 4.0) * d0
        is_global = r.a > R_LINEAR_ALPHA_MIN and r.xi**2 <= 1.0 - R_LINEAR_ALPHA_MIN / r.a
        onset = LN_GOLDEN / math.log(1.0 / math.sqrt(r.nu)) - 1.0
    proof_onset = max(0, math.ceil(onset))
    onset_k = 0 if is_global else proof_onset
    margin = bound - trace.q_seq_err
    scale = 1.0 + d0
    counted = margin[onset_k:]
    return RateBoundReport(
        "RLinearGlobal" if is_global else "RLinearLocal",
        r.nu,
        margin,
        bool(np.all(counted >= -MARGIN_TOL * scale)),
        local_onset_k=None if is_global else onset_k,
        global_regime=is_global,
        proof_onset_k=proof_onset,
        bound_values=bound,
        observed_values=trace.q_seq_err.copy(),
        scale=scale,
    )


def summability_check(trace, bstar):
    """Return ``(sum_k ||b^k - b^{k+1}||_Q^2, a/(1-a) ||b^0 - b*||_Q^2)``.

    ``a`` is ``gamma alpha`` (or ``1 - 1/(2 beta)`` for cocoercive
    certificates, giving the factor ``2 beta - 1``).
    """
    bstar = _check_fixed(trace, bstar)
    r = _rates(trace)
    if r is None:
        raise ValueError("trace carries no certificate")
    factor = 2.0 * r.beta - 1.0 if r.kind == "cocoercive" else r.a / (1.0 - r.a)
    return float(np.sum(trace.q_seq_err**2)), factor * _initial_distance(trace, bstar) ** 2


def asymptotic_regularity(trace, window=10):
    """Empirical ``Q``-asymptotic regularity of a trace.

    True iff the last sequential error is below the trace's stopping
    threshold and the last ``window`` errors are non-increasing.
    """
    if len(trace.iterates) < 2:
        raise ValueError("trace must contain at least two iterates")
    scale = 1.0 + math.sqrt(max(0.0, _qn(trace.metric, trace.b0)))
    threshold = trace.stop_tol * scale
    tail = trace.q_seq_err[-window:]
    slack = 1e-3 * threshold
    return bool(tail[-1] <= threshold and np.all(np.diff(tail) <= slack))


def reference_fixed_point(T, m, stop_tol=1e-14, max_iter=100_000):
    """A fixed point of ``T`` computed independently of any trace.

    Affine operators are handled by a dense solve of ``(I - M) b = c``;
    other operators by Banach-Picard iteration followed by a residual check
    ``||T b - b||_Q <= 1e-10``.
    """
    form = T.affine_form()
    if form is not None:
        M, c = form
        A = np.eye(T.n) - M
        if np.linalg.cond(A) > 1e12:
            raise NoUniqueFixedPoint("I - M is numerically singular")
        return np.linalg.solve(A, c)
    tr = banach_picard(T, m, np.zeros(T.n), max_iter=max_iter, stop_tol=stop_tol)
    b = tr.final
    res = math.sqrt(max(0.0, _qn(m, T(b) - b)))
    if res > 1e-10 * (1.0 + math.sqrt(max(0.0, _qn(m, b)))):
        raise FixedPointNotFound(f"residual {res:.3e} after {tr.K} iterations")
    return b


# -- export --------------------------------------------------------------------

CSV_VERSION = "# qmetric-trace v1"


def _fmt(x):
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def trace_to_csv(trace, reports=(), bstar=None):
    """Render a trace as CSV text.

    Columns: ``k, seq_err_Q, dist_Q`` followed by one ``bound_<kind>``
    column per report.  Row ``k`` carries ``||b^k - b^{k+1}||_Q`` (empty on
    the last row) and ``||b^k - b*||_Q``.  For q-linear reports the bound on
    row ``k+1`` is ``sqrt(nu) ||b^k - b*||_Q``.
    """
    dist = trace.q_dist_to_sol
    if dist is None and bstar is not None:
        dist = _dists(trace.metric, trace.iterates - bstar)
    out = io.StringIO()
    out.write(CSV_VERSION + "\n")
    w = csv.writer(out, lineterminator="\n")
    kinds = [r.bound_kind for r in reports if r.applicable]
    w.writerow(["k", "seq_err_Q", "dist_Q"] + [f"bound_{k}" for k in kinds])
    for k in range(trace.K + 1):
        row = [k, _fmt(trace.q_seq_err[k]) if k < trace.K else "", _fmt(None if dist is None else dist[k])]
        for rep in reports:
            if not rep.applicable:
                continue
            if rep.bound_kind == "QLinear":
                val = rep.bound_values[k - 1] if 1 <= k <= len(rep.bound_values) else None
            else:
                val = rep.bound_values[k] if k < len(rep.bound_values) else None
            row.append(_fmt(val))
        w.writerow(row)
    return out.getvalue()
