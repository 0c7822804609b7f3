"""Catalog of convex functions with closed-form proximal maps.

Every member supplies ``prox`` for itself and, through the Moreau
decomposition, for its convex conjugate.  Each also exposes a distance to
its subdifferential (and to the conjugate's subdifferential) so optimality
conditions of resolvent outputs can be checked independently of the prox
formulas.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "ConvexFunction",
    "Quadratic",
    "ScaledL1",
    "BoxIndicator",
    "function_from_spec",
]

# Points closer than this (relative) to a kink are treated as lying on it.
KINK_RTOL = 1e-12


def _interval_distance(g, lo, hi):
    """Componentwise distance from ``g`` to the interval ``[lo, hi]``."""
    return np.maximum(0.0, np.maximum(lo - g, g - hi))


class ConvexFunction:
    """Proper lsc convex function on R^n acting componentwise."""

    name = "convex"
    #: modulus of strong convexity
    strong_convexity = 0.0

    def prox(self, v, t):
        """``argmin_x h(x) + ||x - v||^2 / (2t)``."""
        raise NotImplementedError

    def conj_prox(self, v, t):
        """Prox of the conjugate via ``v - t prox_{h/t}(v/t)``."""
        v = np.asarray(v, dtype=float)
        return v - t * self.prox(v / t, 1.0 / t)

    def subgradient_distance(self, z, g):
        """Euclidean distance from ``g`` to ``∂h(z)``."""
        raise NotImplementedError

    def conj_subgradient_distance(self, s, g):
        """Euclidean distance from ``g`` to ``∂h*(s)``."""
        raise NotImplementedError

    def to_spec(self):
        raise NotImplementedError


class Quadratic(ConvexFunction):
    """``h(x) = ½ ||x - p||^2``."""

    name = "quadratic"
    strong_convexity = 1.0

    def __init__(self, center=0.0):
        self.center = np.asarray(center, dtype=float)

    def prox(self, v, t):
        return (np.asarray(v, dtype=float) + t * self.center) / (1.0 + t)

    def subgradient_distance(self, z, g):
        return float(np.linalg.norm(np.asarray(g) - (np.asarray(z) - self.center)))

    def conj_subgradient_distance(self, s, g):
        # h*(s) = ½||s||² + <s, p>
        return float(np.linalg.norm(np.asarray(g) - (np.asarray(s) + self.center)))

    def to_spec(self):
        return {"kind": self.name, "center": self.center.tolist()}

    def __repr__(self):
        return f"Quadratic(center={self.center.tolist()})"


class ScaledL1(ConvexFunction):
    """``h(x) = lam ||x||_1``; its conjugate is the indicator of ``[-lam, lam]^n``."""

    name = "l1"

    def __init__(self, lam=1.0):
        if lam <= 0:
            raise ValueError("lam must be positive")
        self.lam = float(lam)

    def prox(self, v, t):
        v = np.asarray(v, dtype=float)
        return np.sign(v) * np.maximum(np.abs(v) - t * self.lam, 0.0)

    def subgradient_distance(self, z, g):
        z, g = np.asarray(z, dtype=float), np.asarray(g, dtype=float)
        on_kink = np.abs(z) <= KINK_RTOL * (1.0 + np.abs(g))
        d = np.where(
            on_kink,
            _interval_distance(g, -self.lam, self.lam),
            np.abs(g - self.lam * np.sign(z)),
        )
        return float(np.linalg.norm(d))

    def conj_subgradient_distance(self, s, g):
        s, g = np.asarray(s, dtype=float), np.asarray(g, dtype=float)
        tol = KINK_RTOL * (1.0 + self.lam)
        upper = s >= self.lam - tol
        lower = s <= -self.lam + tol
        # normal cone of the box: R_+ at the upper face, R_- at the lower one
        d = np.where(upper, np.maximum(0.0, -g), np.where(lower, np.maximum(0.0, g), np.abs(g)))
        outside = np.maximum(0.0, np.abs(s) - self.lam - tol)
        return float(np.linalg.norm(d) + np.linalg.norm(outside))

    def to_spec(self):
        return {"kind": self.name, "lam": self.lam}

    def __repr__(self):
        return f"ScaledL1(lam={self.lam})"


class BoxIndicator(ConvexFunction):
    """Indicator of ``[lower, upper]``; conjugate is the box support function."""

    name = "box"

    def __init__(self, lower=-1.0, upper=1.0):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if np.any(self.lower > self.upper):
            raise ValueError("box lower bound exceeds upper bound")

    def prox(self, v, t):
        return np.clip(np.asarray(v, dtype=float), self.lower, self.upper)

    def subgradient_distance(self, z, g):
        z, g = np.asarray(z, dtype=float), np.asarray(g, dtype=float)
        lo, hi = np.broadcast_to(self.lower, z.shape), np.broadcast_to(self.upper, z.shape)
        at_hi = z >= hi - KINK_RTOL * (1.0 + np.abs(hi))
        at_lo = z <= lo + KINK_RTOL * (1.0 + np.abs(lo))
        d = np.where(
            at_hi & at_lo,
            0.0,
            np.where(at_hi, np.maximum(0.0, -g), np.where(at_lo, np.maximum(0.0, g), np.abs(g))),
        )
        outside = np.maximum(0.0, np.maximum(lo - z, z - hi) - KINK_RTOL * (1.0 + np.abs(z)))
        return float(np.linalg.norm(d) + np.linalg.norm(outside))

    def conj_subgradient_distance(self, s, g):
        # ∂σ(s)_i = upper if s_i > 0, lower if s_i < 0, [lower, upper] at 0
        s, g = np.asarray(s, dtype=float), np.asarray(g, dtype=float)
        lo, hi = np.broadcast_to(self.lower, s.shape), np.broadcast_to(self.upper, s.shape)
        on_kink = np.abs(s) <= KINK_RTOL * (1.0 + np.abs(g))
        d = np.where(on_kink, _interval_distance(g, lo, hi), np.where(s > 0, np.abs(g - hi), np.abs(g - lo)))
        return float(np.linalg.norm(d))

    def to_spec(self):
        return {"kind": self.name, "lower": self.lower.tolist(), "upper": self.upper.tolist()}

    def __repr__(self):
        return f"BoxIndicator(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


def function_from_spec(spec):
    """Build a catalog function from ``{"kind": ..., parameters}``."""
    kind = spec.get("kind")
    if kind == "quadratic":
        return Quadratic(spec.get("center", 0.0))
    if kind == "l1":
        return ScaledL1(spec.get("lam", 1.0))
    if kind == "box":
        return BoxIndicator(spec.get("lower", -1.0), spec.get("upper", 1.0))
    raise ValueError(f"unknown function kind {kind!r}")
