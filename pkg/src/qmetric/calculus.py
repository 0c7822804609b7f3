"""Certificates for the averaged-operator family and their transformation rules.

An :class:`AveragedCertificate` ``(xi, alpha)`` claims that
``T = (1 - alpha) I + alpha K`` for some ``K`` that is ``xi``-Lipschitz in
the ``Q``-seminorm.  The rules below map certificates of ``T`` to
certificates of derived operators (``I - gamma T``, ``2T - I``, the
relaxation, the cocoercive view) and classify a certificate into the
regime tree for symmetric PSD metrics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .errors import InvalidCertificate, MetricMismatch, RuleNotApplicable
from .metric import Metric, as_vector
from .operators import OperatorHandle, Reflection, Relaxed, ScaledComplement

__all__ = [
    "Asserted",
    "DerivedByRule",
    "Certified",
    "AveragedCertificate",
    "CocoercivityCertificate",
    "RegimeLeaf",
    "RegimeReport",
    "fclass_gap",
    "cocoercivity_from_class",
    "class_from_cocoercive",
    "subtract_scaled",
    "reflect",
    "relax",
    "classify_regime",
]

# Closed (<=) thresholds are compared with this relative slack so that
# certificates sitting exactly on a boundary survive rounding.  Open
# interval conditions are enforced strictly.
CLOSED_RTOL = 1e-12


def _le(a, b):
    return a <= b + CLOSED_RTOL * max(1.0, abs(b))


# -- provenance --------------------------------------------------------------


@dataclass(frozen=True)
class Asserted:
    def chain(self):
        return [{"kind": "asserted"}]


@dataclass(frozen=True)
class DerivedByRule:
    rule: str
    parent: Union["AveragedCertificate", "CocoercivityCertificate", None] = None

    def chain(self):
        head = {"kind": "derived", "rule": self.rule}
        if self.parent is None:
            return [head]
        head["parent"] = self.parent.parameters()
        return [head] + self.parent.provenance.chain()


@dataclass(frozen=True)
class Certified:
    samples: int
    max_violation: float

    def chain(self):
        return [{"kind": "certified", "samples": self.samples, "max_violation": self.max_violation}]


Provenance = Union[Asserted, DerivedByRule, Certified]


# -- certificates -------------------------------------------------------------


@dataclass(frozen=True)
class AveragedCertificate:
    """Claim ``T ∈ F^Q_{xi, alpha}`` with ``xi > 0`` and ``0 < alpha < 1``.

    ``operator`` optionally names the operator the claim is about; the rules
    propagate it to the matching composite handle.
    """

    xi: float
    alpha: float
    metric: Metric = field(repr=False, compare=False)
    provenance: Provenance = Asserted()
    operator: Optional[OperatorHandle] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        xi, alpha = float(self.xi), float(self.alpha)
        if not (math.isfinite(xi) and xi > 0):
            raise InvalidCertificate(f"xi must be positive, got {xi}")
        if not (0.0 < alpha < 1.0):
            raise InvalidCertificate(f"alpha must lie in (0, 1), got {alpha}")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "alpha", alpha)

    @property
    def metric_id(self):
        return self.metric.id

    @property
    def strongly_averaged(self):
        return self.xi <= 1.0

    @property
    def weakly_averaged(self):
        return self.xi > 1.0

    @property
    def nu(self):
        """Contraction factor ``1 - alpha + alpha xi^2`` of the class inequality."""
        return 1.0 - self.alpha + self.alpha * self.xi**2

    def parameters(self):
        return {"xi": self.xi, "alpha": self.alpha}

    def to_record(self):
        return {
            "type": "averaged",
            "xi": self.xi,
            "alpha": self.alpha,
            "metric_id": self.metric_id,
            "provenance": self.provenance.chain(),
        }


@dataclass(frozen=True)
class CocoercivityCertificate:
    """Claim that ``T`` is ``beta``-cocoercive in the ``Q`` pairing."""

    beta: float
    metric: Metric = field(repr=False, compare=False)
    provenance: Provenance = Asserted()
    operator: Optional[OperatorHandle] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        beta = float(self.beta)
        if not (math.isfinite(beta) and beta > 0):
            raise InvalidCertificate(f"beta must be positive, got {beta}")
        object.__setattr__(self, "beta", beta)

    @property
    def metric_id(self):
        return self.metric.id

    def parameters(self):
        return {"beta": self.beta}

    def to_record(self):
        return {
            "type": "cocoercive",
            "beta": self.beta,
            "metric_id": self.metric_id,
            "provenance": self.provenance.chain(),
        }


# -- the class inequality ------------------------------------------------------


def _check_metric(cert, m):
    if cert.metric_id != m.id:
        raise MetricMismatch(f"certificate refers to {cert.metric_id}, metric is {m.id}")


def fclass_gap(T, m, cert, b1, b2, *, with_scale=False):
    """Slack of the averaged-class inequality at ``(b1, b2)``.

    Returns ``(1 - a + a xi^2) ||d||_Q^2 - (1-a)/a ||(I-T)b1 - (I-T)b2||_Q^2
    - ||T b1 - T b2||_Q^2`` with ``d = b1 - b2``; non-negative whenever the
    certificate holds at the pair.  ``with_scale`` also returns
    ``1 + sum of |terms|`` for relative comparisons.
    """
    _check_metric(cert, m)
    b1 = as_vector(b1, m.n, "b1")
    b2 = as_vector(b2, m.n, "b2")
    d = b1 - b2
    td = T(b1) - T(b2)
    r = d - td
    q = m.q
    nd = float(np.dot(q @ d, d))
    nt = float(np.dot(q @ td, td))
    nr = float(np.dot(q @ r, r))
    a = cert.alpha
    t_d = cert.nu * nd
    t_r = (1.0 - a) / a * nr
    gap = t_d - t_r - nt
    if with_scale:
        return gap, 1.0 + abs(t_d) + abs(t_r) + abs(nt)
    return gap


# -- rules ---------------------------------------------------------------------


def cocoercivity_from_class(cert):
    """``T ∈ F_{xi,alpha}`` with ``xi <= (1-alpha)/alpha`` is ``beta``-cocoercive.

    ``beta = ½ (1 + 1/(1 - alpha + alpha xi^2))``; requires a symmetric PSD
    metric.
    """
    a = cert.alpha
    if not _le(cert.xi, (1.0 - a) / a):
        raise RuleNotApplicable(f"xi={cert.xi} exceeds (1-alpha)/alpha={(1 - a) / a}")
    cert.metric.require(symmetric=True, psd=True, what="cocoercivity_from_class")
    beta = 0.5 * (1.0 + 1.0 / cert.nu)
    return CocoercivityCertificate(beta, cert.metric, DerivedByRule("t_lip_iii", cert), cert.operator)


def class_from_cocoercive(c):
    """A ``beta``-cocoercive operator (``beta > ½``) lies in ``F_{1/(2beta-1), 1-1/(2beta)}``."""
    if not c.beta > 0.5:
        raise RuleNotApplicable(f"beta={c.beta} must exceed 1/2")
    c.metric.require(symmetric=True, what="class_from_cocoercive")
    xi = 1.0 / (2.0 * c.beta - 1.0)
    alpha = 1.0 - 1.0 / (2.0 * c.beta)
    return AveragedCertificate(xi, alpha, c.metric, DerivedByRule("l_cocoercive_i", c), c.operator)


def subtract_scaled(cert, gamma):
    """Certificate of ``I - gamma T``: ``(alpha xi/(1-alpha), gamma (1-alpha))``.

    Valid for ``0 < gamma < 1/(1-alpha)`` under any metric.
    """
    a = cert.alpha
    if not (0.0 < gamma < 1.0 / (1.0 - a)):
        raise RuleNotApplicable(f"gamma={gamma} outside (0, {1.0 / (1.0 - a)})")
    op = None if cert.operator is None else ScaledComplement(cert.operator, gamma)
    return AveragedCertificate(
        a * cert.xi / (1.0 - a), gamma * (1.0 - a), cert.metric, DerivedByRule("t_lip_iv", cert), op
    )


def reflect(cert):
    """Certificate ``(xi, 2 alpha)`` of ``2T - I``; needs ``alpha < ½``."""
    if not cert.alpha < 0.5:
        raise RuleNotApplicable(f"alpha={cert.alpha} must be below 1/2")
    op = None if cert.operator is None else Reflection(cert.operator)
    return AveragedCertificate(cert.xi, 2.0 * cert.alpha, cert.metric, DerivedByRule("t_lip_vii", cert), op)


def relax(cert, gamma):
    """Certificate ``(1, gamma alpha)`` of ``(1-gamma) I + gamma T``; needs ``xi = 1``."""
    if cert.xi != 1.0:
        raise RuleNotApplicable(f"relaxation rule is stated for xi = 1, got {cert.xi}")
    if not (0.0 < gamma < 1.0 / cert.alpha):
        raise RuleNotApplicable(f"gamma={gamma} outside (0, {1.0 / cert.alpha})")
    op = None if cert.operator is None else Relaxed(cert.operator, gamma)
    return AveragedCertificate(1.0, gamma * cert.alpha, cert.metric, DerivedByRule("l_average_iv", cert), op)


# -- regime tree ----------------------------------------------------------------


@dataclass(frozen=True)
class RegimeLeaf:
    label: str
    classified: bool
    cocoercive_beta: Optional[float]
    firmly_nonexpansive: bool
    strongly_averaged: bool
    weakly_averaged: bool
    xi: float
    alpha: float

    def to_record(self):
        return {
            "label": self.label,
            "classified": self.classified,
            "cocoercive_beta": self.cocoercive_beta,
            "firmly_nonexpansive": self.firmly_nonexpansive,
            "strongly_averaged": self.strongly_averaged,
            "weakly_averaged": self.weakly_averaged,
            "xi": self.xi,
            "alpha": self.alpha,
        }


@dataclass(frozen=True)
class RegimeReport:
    operator: RegimeLeaf
    complement: Optional[RegimeLeaf] = None
    gamma: Optional[float] = None
    reflection: Optional[AveragedCertificate] = None

    def to_record(self):
        return {
            "operator": self.operator.to_record(),
            "gamma": self.gamma,
            "complement": None if self.complement is None else self.complement.to_record(),
            "reflection": None if self.reflection is None else self.reflection.parameters(),
        }


def _leaf(xi, alpha):
    beta = None
    if _le(xi, (1.0 - alpha) / alpha):
        beta = 0.5 * (1.0 + 1.0 / (1.0 - alpha + alpha * xi**2))
        if alpha >= 0.5 or _le(xi, 1.0):
            return RegimeLeaf("beta>=1, FNE, strongly averaged", True, beta, True, True, False, xi, alpha)
        return RegimeLeaf("beta<1, non-FNE, weakly averaged", True, beta, False, False, True, xi, alpha)
    return RegimeLeaf("unclassified", False, None, False, xi <= 1.0, xi > 1.0, xi, alpha)


def classify_regime(cert, gamma=None):
    """Place ``T`` (and ``I - gamma T`` when ``gamma`` is given) in the regime tree.

    The tree is drawn for symmetric PSD metrics only.  For the complement the
    leaf is read off the certificate produced by :func:`subtract_scaled`,
    whose thresholds reduce to ``gamma < 1/(2(1-alpha))``,
    ``xi <= (1-alpha)/alpha`` and ``xi <= 1/(gamma alpha) - (1-alpha)/alpha``.
    """
    cert.metric.require(symmetric=True, psd=True, what="classify_regime")
    report = RegimeReport(_leaf(cert.xi, cert.alpha))
    if cert.alpha < 0.5:
        report = replace(report, reflection=reflect(cert))
    if gamma is not None:
        comp = subtract_scaled(cert, gamma)
        report = replace(report, gamma=float(gamma), complement=_leaf(comp.xi, comp.alpha))
    return report
