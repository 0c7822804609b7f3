"""Empirical certification of nonexpansiveness-type properties.

Each property is an inequality over pairs ``(b1, b2)``.  :func:`certify`
evaluates it on pairs drawn from a box with a seeded PCG64 generator and
reports the worst normalized violation.  A pass is evidence, not proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidDimension
from .operators import Reflection, ScaledComplement

__all__ = [
    "PropertyKind",
    "SamplingSpec",
    "CertifyReport",
    "sample_pairs",
    "violations",
    "certify",
    "certify_equivalences",
    "certify_complement_partly_nonexpansive",
    "DEFAULT_TOLERANCE",
]

DEFAULT_TOLERANCE = 1e-8
DEFAULT_SAMPLES = 1000
GENERATOR = "PCG64"


@dataclass(frozen=True)
class PropertyKind:
    """One of the six pairwise properties, with its parameters."""

    name: str
    xi: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None

    def __post_init__(self):
        for p in (self.xi, self.beta):
            if p is not None and not p > 0:
                raise ValueError(f"{self.name}: parameters must be positive")
        if self.alpha is not None and not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")

    @classmethod
    def partly_nonexpansive(cls):
        return cls("partly_nonexpansive")

    @classmethod
    def nonexpansive(cls):
        return cls("nonexpansive")

    @classmethod
    def lipschitz(cls, xi):
        return cls("lipschitz", xi=float(xi))

    @classmethod
    def firmly_nonexpansive(cls):
        return cls("firmly_nonexpansive")

    @classmethod
    def cocoercive(cls, beta):
        return cls("cocoercive", beta=float(beta))

    @classmethod
    def averaged(cls, xi, alpha):
        return cls("averaged", xi=float(xi), alpha=float(alpha))

    @classmethod
    def from_spec(cls, spec):
        kind = spec["kind"]
        params = {k: float(v) for k, v in spec.items() if k != "kind"}
        return getattr(cls, kind)(**params)

    def label(self):
        params = ", ".join(f"{k}={v:g}" for k, v in self.parameters().items())
        return f"{self.name}({params})" if params else self.name

    def parameters(self):
        return {k: getattr(self, k) for k in ("xi", "alpha", "beta") if getattr(self, k) is not None}


@dataclass(frozen=True)
class SamplingSpec:
    """Uniform sampling box ``[low, high]^n``."""

    low: float = -10.0
    high: float = 10.0

    def __post_init__(self):
        if not (math.isfinite(self.low) and math.isfinite(self.high) and self.low < self.high):
            raise ValueError("sampling box bounds must be finite with low < high")


@dataclass(frozen=True)
class CertifyReport:
    property: PropertyKind
    samples: int
    max_violation: float
    worst_pair: tuple
    verdict: str
    seed: int
    tolerance: float = DEFAULT_TOLERANCE
    metric_id: str = ""
    notes: tuple = field(default_factory=tuple)

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_record(self):
        return {
            "property": self.property.name,
            "parameters": self.property.parameters(),
            "samples": self.samples,
            "seed": self.seed,
            "generator": GENERATOR,
            "max_violation": self.max_violation,
            "tolerance": self.tolerance,
            "verdict": self.verdict,
            "worst_pair": [self.worst_pair[0].tolist(), self.worst_pair[1].tolist()],
            "metric_id": self.metric_id,
            "notes": list(self.notes) + ["empirical certificate: sampled pairs only"],
        }


def sample_pairs(n, n_samples, seed, sampling=SamplingSpec()):
    """Draw ``n_samples`` pairs; the first ``k`` pairs do not depend on ``n_samples``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.uniform(sampling.low, sampling.high, size=(n_samples, 2, n))
    return draws[:, 0, :], draws[:, 1, :]


def _rows(T, B):
    return np.stack([T.apply(b) for b in B])


def _qn(q, X):
    return np.einsum("ij,ij->i", X @ q.T, X)


def violations(p, q, D, TD):
    """Per-sample raw violation of property ``p`` (positive means violated).

    ``D`` holds differences ``b1 - b2`` and ``TD`` the differences
    ``T b1 - T b2``, one pair per row.
    """
    nt = _qn(q, TD)
    if p.name in ("partly_nonexpansive", "cocoercive"):
        inner = np.einsum("ij,ij->i", D @ q.T, TD)
        beta = 1.0 if p.beta is None else p.beta
        return beta * nt - inner
    nd = _qn(q, D)
    if p.name == "nonexpansive":
        return nt - nd
    if p.name == "lipschitz":
        return nt - p.xi**2 * nd
    if p.name == "firmly_nonexpansive":
        return nt + _qn(q, D - TD) - nd
    if p.name == "averaged":
        a = p.alpha
        return nt + (1.0 - a) / a * _qn(q, D - TD) - (1.0 - a + a * p.xi**2) * nd
    raise ValueError(f"unknown property {p.name!r}")


def _report(p, m, B1, B2, D, TD, seed, tolerance):
    raw = violations(p, m.q, D, TD)
    scaled = raw / (1.0 + np.abs(_qn(m.q, D)))
    i = int(np.argmax(scaled))  # first maximum -> lowest sample index
    worst = float(scaled[i])
    notes = ()
    if p.name in ("lipschitz", "nonexpansive", "firmly_nonexpansive", "averaged") and not m.is_psd:
        notes = ("metric is not PSD: squared-seminorm inequality evaluated literally",)
    return CertifyReport(
        property=p,
        samples=len(B1),
        max_violation=worst,
        worst_pair=(B1[i].copy(), B2[i].copy()),
        verdict="pass" if worst <= tolerance else "fail",
        seed=seed,
        tolerance=tolerance,
        metric_id=m.id,
        notes=notes,
    )


def certify(T, m, p, n_samples=DEFAULT_SAMPLES, seed=0, sampling=SamplingSpec(), tolerance=DEFAULT_TOLERANCE):
    """Check property ``p`` of ``T`` under metric ``m`` on sampled pairs.

    Parameters
    ----------
    T : OperatorHandle
    m : Metric
    p : PropertyKind
    n_samples : int
        Number of i.i.d. pairs drawn from ``sampling``.
    seed : int
        Seed of the PCG64 generator; identical inputs give identical reports.
    tolerance : float
        Pass threshold on ``violation / (1 + |‖b1 - b2‖²_Q|)``.

    Returns
    -------
    CertifyReport
    """
    if T.n != m.n:
        raise InvalidDimension(f"operator dimension {T.n} != metric dimension {m.n}")
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    B1, B2 = sample_pairs(m.n, n_samples, seed, sampling)
    D = B1 - B2
    TD = _rows(T, B1) - _rows(T, B2)
    return _report(p, m, B1, B2, D, TD, seed, tolerance)


def certify_complement_partly_nonexpansive(T, m, n_samples=DEFAULT_SAMPLES, seed=0, sampling=SamplingSpec(),
                                           tolerance=DEFAULT_TOLERANCE):
    """``I - T`` partly nonexpansive under ``Q^T``; meaningful for any ``Q``."""
    return certify(ScaledComplement(T), m.transpose(), PropertyKind.partly_nonexpansive(),
                   n_samples, seed, sampling, tolerance)


def certify_equivalences(T, m, n_samples=DEFAULT_SAMPLES, seed=0, sampling=SamplingSpec(),
                         tolerance=DEFAULT_TOLERANCE):
    """Run the five equivalent forms of partial nonexpansiveness on one sample set.

    Returns reports for, in order: T partly NE; T firmly NE; I - T firmly NE;
    2T - I nonexpansive; I - T partly NE under ``Q^T``.  For a symmetric
    metric all five verdicts agree.
    """
    m.require(symmetric=True, what="certify_equivalences")
    comp = ScaledComplement(T)
    fne = PropertyKind.firmly_nonexpansive()
    return [
        certify(T, m, PropertyKind.partly_nonexpansive(), n_samples, seed, sampling, tolerance),
        certify(T, m, fne, n_samples, seed, sampling, tolerance),
        certify(comp, m, fne, n_samples, seed, sampling, tolerance),
        certify(Reflection(T), m, PropertyKind.nonexpansive(), n_samples, seed, sampling, tolerance),
        certify_complement_partly_nonexpansive(T, m, n_samples, seed, sampling, tolerance),
    ]
