"""Single-valued operators on R^n.

All handles are immutable and evaluation is pure.  Composite handles are
restricted to the constructions the certificate calculus reasons about:
relaxation ``(1-g) I + g T``, scaled complement ``I - g T``, reflection
``2T - I`` and composition ``T o S``.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidDimension
from .metric import as_vector

__all__ = [
    "OperatorHandle",
    "Affine",
    "MapOperator",
    "ProxOfConvex",
    "Relaxed",
    "ScaledComplement",
    "Reflection",
    "Composition",
    "identity",
    "scaled_identity",
]


class OperatorHandle:
    """Base class: a deterministic map ``R^n -> R^n``."""

    n: int
    kind = "operator"

    def __call__(self, b):
        return self.apply(as_vector(b, self.n))

    def apply(self, b):
        """Evaluate on a validated vector."""
        raise NotImplementedError

    def affine_form(self):
        """Return ``(M, c)`` with ``T b = M b + c`` when T is affine, else ``None``."""
        return None

    # combinators
    def relaxed(self, gamma):
        return Relaxed(self, gamma)

    def complement(self, gamma=1.0):
        return ScaledComplement(self, gamma)

    def reflected(self):
        return Reflection(self)

    def __matmul__(self, other):
        return Composition(self, other)


class Affine(OperatorHandle):
    """``b -> M b + c``."""

    kind = "affine"

    def __init__(self, M, c=None):
        M = np.array(M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidDimension(f"affine matrix must be square, got {M.shape}")
        self.n = M.shape[0]
        c = np.zeros(self.n) if c is None else as_vector(c, self.n, "offset").copy()
        M.setflags(write=False)
        c.setflags(write=False)
        self.M, self.c = M, c

    def apply(self, b):
        return self.M @ b + self.c

    def affine_form(self):
        return self.M, self.c

    def __repr__(self):
        return f"Affine(n={self.n})"


def identity(n):
    return Affine(np.eye(n))


def scaled_identity(scale, n):
    return Affine(scale * np.eye(n))


class MapOperator(OperatorHandle):
    """Wrap a plain callable as a black-box operator."""

    kind = "map"

    def __init__(self, fn, n, name="map"):
        self.fn, self.n, self.name = fn, int(n), name

    def apply(self, b):
        out = np.asarray(self.fn(b), dtype=float)
        if out.shape != (self.n,):
            raise InvalidDimension(f"{self.name} returned shape {out.shape}")
        return out

    def __repr__(self):
        return f"MapOperator({self.name}, n={self.n})"


class ProxOfConvex(OperatorHandle):
    """``b -> prox_{step h}(b)`` for a catalog function ``h``."""

    kind = "prox"

    def __init__(self, func, step, n):
        if step <= 0:
            raise ValueError("prox step must be positive")
        self.func, self.step, self.n = func, float(step), int(n)

    def apply(self, b):
        return np.asarray(self.func.prox(b, self.step), dtype=float)

    def __repr__(self):
        return f"ProxOfConvex({self.func!r}, step={self.step})"


class Relaxed(OperatorHandle):
    """``(1 - gamma) I + gamma T``.

    Written in this form (rather than ``b + gamma (T b - b)``) so that
    ``gamma = 1`` reproduces ``T b`` exactly.
    """

    kind = "relaxed"

    def __init__(self, base, gamma):
        self.base, self.gamma, self.n = base, float(gamma), base.n

    def apply(self, b):
        return (1.0 - self.gamma) * b + self.gamma * self.base.apply(b)

    def affine_form(self):
        form = self.base.affine_form()
        if form is None:
            return None
        M, c = form
        g = self.gamma
        return (1.0 - g) * np.eye(self.n) + g * M, g * c

    def __repr__(self):
        return f"Relaxed({self.base!r}, gamma={self.gamma})"


class ScaledComplement(OperatorHandle):
    """``I - gamma T``."""

    kind = "complement"

    def __init__(self, base, gamma=1.0):
        self.base, self.gamma, self.n = base, float(gamma), base.n

    def apply(self, b):
        return b - self.gamma * self.base.apply(b)

    def affine_form(self):
        form = self.base.affine_form()
        if form is None:
            return None
        M, c = form
        return np.eye(self.n) - self.gamma * M, -self.gamma * c

    def __repr__(self):
        return f"ScaledComplement({self.base!r}, gamma={self.gamma})"


class Reflection(OperatorHandle):
    """``2T - I``."""

    kind = "reflection"

    def __init__(self, base):
        self.base, self.n = base, base.n

    def apply(self, b):
        return 2.0 * self.base.apply(b) - b

    def affine_form(self):
        form = self.base.affine_form()
        if form is None:
            return None
        M, c = form
        return 2.0 * M - np.eye(self.n), 2.0 * c

    def __repr__(self):
        return f"Reflection({self.base!r})"


class Composition(OperatorHandle):
    """``T o S``: apply ``inner`` first."""

    kind = "composition"

    def __init__(self, outer, inner):
        if outer.n != inner.n:
            raise InvalidDimension("composed operators must share a dimension")
        self.outer, self.inner, self.n = outer, inner, outer.n

    def apply(self, b):
        return self.outer.apply(self.inner.apply(b))

    def affine_form(self):
        fo, fi = self.outer.affine_form(), self.inner.affine_form()
        if fo is None or fi is None:
            return None
        (Mo, co), (Mi, ci) = fo, fi
        return Mo @ Mi, Mo @ ci + co

    def __repr__(self):
        return f"Composition({self.outer!r}, {self.inner!r})"
