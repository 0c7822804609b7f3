"""Metric resolvents ``T = (A + Q)^{-1} Q`` and proximal point iterations.

``A`` is drawn from a small catalog of maximally monotone operators
(affine monotone maps, subdifferentials of catalog functions, strongly
monotone shifts).  Evaluation returns the unique ``z`` with
``0 ∈ A z + Q (z - b)``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .calculus import AveragedCertificate, DerivedByRule
from .errors import (
    InvalidDimension,
    MetricStructureError,
    RuleNotApplicable,
    SingularResolvent,
    UnsupportedPairing,
)
from .fixed_point import DEFAULT_MAX_ITER, DEFAULT_STOP_TOL, banach_picard, krasnoselskii_mann
from .functions import function_from_spec
from .metric import as_vector, matrix_from_payload
from .operators import OperatorHandle, ScaledComplement

__all__ = [
    "MonotoneSpec",
    "AffineMonotone",
    "Subdifferential",
    "ScaledStrong",
    "ResolventHandle",
    "resolvent_apply",
    "ppa",
    "rppa",
    "resolvent_certificate",
    "complement_certificate",
    "monotone_from_spec",
]

MONOTONE_TOL = 1e-9
SINGULAR_RCOND = 1e-13


class MonotoneSpec:
    """Maximally monotone operator from the catalog.

    ``mu`` is the strong-monotonicity modulus (0 when merely monotone).
    """

    kind = "monotone"
    n = None
    mu = 0.0


class AffineMonotone(MonotoneSpec):
    """``A z = M z + c`` with ``M + M^T`` positive semi-definite."""

    kind = "affine"

    def __init__(self, M, c=None):
        M = np.array(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidDimension(f"monotone matrix must be square, got {M.shape}")
        self.n = M.shape[0]
        self.M = M
        self.c = np.zeros(self.n) if c is None else as_vector(c, self.n, "offset")
        lam = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
        if lam < -MONOTONE_TOL:
            raise ValueError(f"affine operator is not monotone: min eigenvalue of sym part {lam:.3e}")
        self.mu = max(0.0, lam)

    def __repr__(self):
        return f"AffineMonotone(n={self.n}, mu={self.mu:.4g})"


class Subdifferential(MonotoneSpec):
    """``A = ∂h`` for a catalog function ``h`` on R^n."""

    kind = "subdifferential"

    def __init__(self, func, n):
        self.func, self.n = func, int(n)
        self.mu = float(func.strong_convexity)

    def __repr__(self):
        return f"Subdifferential({self.func!r}, n={self.n})"


class ScaledStrong(MonotoneSpec):
    """``A + mu I`` for another catalog member ``A``."""

    kind = "scaled_strong"

    def __init__(self, base, mu):
        if not mu > 0:
            raise ValueError("mu must be positive")
        self.base, self.shift, self.n = base, float(mu), base.n
        self.mu = base.mu + self.shift

    def __repr__(self):
        return f"ScaledStrong({self.base!r}, mu={self.shift})"


def _flatten(spec):
    """Split ``spec`` into its innermost member and the accumulated shift."""
    shift = 0.0
    while isinstance(spec, ScaledStrong):
        shift += spec.shift
        spec = spec.base
    return spec, shift


class ResolventHandle(OperatorHandle):
    """The metric resolvent of ``a`` under ``m``.

    The solver is chosen from the pairing: a dense LU factorization of
    ``M + Q`` for affine members (computed once), the closed-form prox when
    ``A`` is a subdifferential and ``Q = (1/tau) I``.  Block-triangular
    saddle operators supply their own ``solver``; their triangular solve is
    well defined for any metric, so they may pass ``require_pd=False``.
    """

    kind = "resolvent"

    def __init__(self, a, m, solver=None, require_pd=True):
        if a.n != m.n:
            raise InvalidDimension(f"operator dimension {a.n} != metric dimension {m.n}")
        if require_pd:
            m.require(pd=True, what="metric resolvent")
        self.a, self.m, self.n = a, m, m.n
        self._lu = None
        if solver is not None:
            self.solver, self._custom = "block_prox", solver
            return
        base, shift = _flatten(a)
        if isinstance(base, AffineMonotone):
            self.solver = "dense_linear"
            K = base.M + shift * np.eye(self.n) + m.q
            lu, piv = scipy.linalg.lu_factor(K, check_finite=False)
            diag = np.abs(np.diag(lu))
            if diag.min() <= SINGULAR_RCOND * max(1.0, diag.max()):
                raise SingularResolvent("M + Q is numerically singular")
            self._lu = (lu, piv)
            self._offset = base.c
        elif isinstance(base, Subdifferential):
            c = m.scalar_multiple()
            if c is None or not c > 0:
                raise UnsupportedPairing("subdifferential resolvents need a scalar metric (1/tau) I")
            self.solver = "prox_formula"
            tau = 1.0 / c
            # 0 ∈ ∂h(z) + shift z + (z - b)/tau  <=>  z = prox_{t h}(b / (1 + shift tau))
            self._scale = 1.0 / (1.0 + shift * tau)
            self._step = tau * self._scale
            self._func = base.func
        else:
            raise UnsupportedPairing(f"no resolvent solver for {a!r}")

    def apply(self, b):
        if self.solver == "dense_linear":
            rhs = self.m.q @ b - self._offset
            return scipy.linalg.lu_solve(self._lu, rhs, check_finite=False)
        if self.solver == "prox_formula":
            return np.asarray(self._func.prox(self._scale * b, self._step), dtype=float)
        return self._custom(b)

    def affine_form(self):
        if self.solver != "dense_linear":
            return None
        lu = self._lu
        M = scipy.linalg.lu_solve(lu, self.m.q, check_finite=False)
        c = -scipy.linalg.lu_solve(lu, self._offset, check_finite=False)
        return M, c

    def inclusion_residual(self, b, z):
        """Residual of ``0 ∈ A z + Q (z - b)`` for catalog members."""
        b, z = as_vector(b, self.n), as_vector(z, self.n)
        base, shift = _flatten(self.a)
        v = self.m.q @ (b - z) - shift * z  # must lie in base(z)
        if isinstance(base, AffineMonotone):
            return float(np.linalg.norm(base.M @ z + base.c - v))
        if isinstance(base, Subdifferential):
            return base.func.subgradient_distance(z, v)
        if hasattr(self.a, "inclusion_residual"):
            return self.a.inclusion_residual(self.m, b, z)
        raise UnsupportedPairing(f"no residual check for {self.a!r}")

    def __repr__(self):
        return f"ResolventHandle({self.a!r}, {self.m!r}, solver={self.solver})"


def resolvent_apply(r, b):
    """Return the unique ``z`` with ``0 ∈ A z + Q (z - b)``."""
    return r(b)


def resolvent_certificate(r):
    """Averaged-class certificate of a metric resolvent.

    ``(1, ½)`` for merely monotone ``A`` and symmetric ``Q``.  For
    ``mu``-strongly monotone ``A`` and symmetric PD ``Q`` the certificate
    tightens to ``(‖Q‖/(2mu + ‖Q‖), (2mu + ‖Q‖)/(2mu + 2‖Q‖))`` with the
    spectral norm ``‖Q‖``.
    """
    m = r.m
    m.require(symmetric=True, what="resolvent_certificate")
    mu = r.a.mu
    if mu > 0 and m.is_pd:
        qn = m.spectral_norm
        xi = qn / (2.0 * mu + qn)
        alpha = (2.0 * mu + qn) / (2.0 * mu + 2.0 * qn)
    else:
        xi, alpha = 1.0, 0.5
    return AveragedCertificate(xi, alpha, m, DerivedByRule("sec4_resolvent"), r)


def complement_certificate(r):
    """Certificate ``(1, ‖Q‖/(2(‖Q‖ + mu)))`` of ``I - T``."""
    m = r.m
    m.require(symmetric=True, what="complement_certificate")
    mu = r.a.mu if m.is_pd else 0.0
    qn = m.spectral_norm
    return AveragedCertificate(1.0, qn / (2.0 * (qn + mu)), m, DerivedByRule("sec4_resolvent_complement"),
                               ScaledComplement(r))


def _default_cert(r):
    try:
        return resolvent_certificate(r)
    except MetricStructureError:
        return None


def ppa(r, b0, max_iter=DEFAULT_MAX_ITER, stop_tol=DEFAULT_STOP_TOL, cert=None):
    """Proximal point iteration ``0 ∈ A b^{k+1} + Q (b^{k+1} - b^k)``."""
    return banach_picard(r, r.m, b0, max_iter, stop_tol, cert if cert is not None else _default_cert(r))


def rppa(r, gamma, b0, max_iter=DEFAULT_MAX_ITER, stop_tol=DEFAULT_STOP_TOL, cert=None):
    """Relaxed proximal point iteration, ``0 < gamma < 2``."""
    if not 0.0 < gamma < 2.0:
        raise RuleNotApplicable(f"relaxation gamma={gamma} outside (0, 2)")
    return krasnoselskii_mann(r, r.m, gamma, b0, max_iter, stop_tol,
                              cert if cert is not None else _default_cert(r))


def monotone_from_spec(spec, n=None):
    """Build a catalog member from a config mapping."""
    kind = spec.get("kind")
    if kind == "affine":
        M = matrix_from_payload(spec["matrix"])
        return AffineMonotone(M, spec.get("offset"))
    if kind == "zero":
        dim = int(spec.get("n", n))
        return AffineMonotone(np.zeros((dim, dim)))
    if kind == "subdifferential":
        dim = int(spec.get("n", n))
        return Subdifferential(function_from_spec(spec["function"]), dim)
    if kind == "scaled_strong":
        return ScaledStrong(monotone_from_spec(spec["base"], n), float(spec["mu"]))
    raise ValueError(f"unknown monotone operator kind {kind!r}")
