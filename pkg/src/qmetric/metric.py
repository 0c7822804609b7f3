"""Arbitrary-matrix inner products and seminorm squares.

A :class:`Metric` wraps a dense square matrix ``Q`` that need not be
symmetric or positive semi-definite.  The bilinear pairing is
``<a | b>_Q = <Q a, b>`` and the (signed) squared seminorm is
``||a||_Q^2 = <Q a, a>``, which only sees the symmetric part of ``Q``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidDimension, MetricStructureError, NonFiniteValue

__all__ = [
    "Metric",
    "as_vector",
    "q_inner",
    "q_norm_sq",
    "q_dist",
    "convex_combination_identity_residual",
    "load_matrix",
]

DEFAULT_SYM_TOL = 1e-9


def as_vector(a, n=None, name="vector"):
    """Return ``a`` as a finite 1-D float array, optionally of length ``n``."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise InvalidDimension(f"{name} must be one-dimensional, got shape {arr.shape}")
    if n is not None and arr.shape[0] != n:
        raise InvalidDimension(f"{name} has length {arr.shape[0]}, expected {n}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteValue(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class Metric:
    """Dense square matrix with a cached structural classification.

    Parameters
    ----------
    q : array_like, shape (n, n)
        The metric matrix.  Any real square matrix is accepted.
    sym_tolerance : float, optional
        Relative tolerance used for the symmetry and definiteness tests.

    Notes
    -----
    Symmetry holds when ``max|Q - Q^T| <= tol * max(1, max|Q|)``.  The PSD
    and PD flags are decided on the symmetric part ``(Q + Q^T)/2`` with the
    same relative tolerance, since the squared seminorm depends on nothing
    else.
    """

    q: np.ndarray
    sym_tolerance: float = DEFAULT_SYM_TOL
    is_symmetric: bool = field(init=False)
    is_psd: bool = field(init=False)
    is_pd: bool = field(init=False)
    min_sym_eigenvalue: float = field(init=False)

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise InvalidDimension(f"metric must be square, got shape {q.shape}")
        if q.shape[0] == 0:
            raise InvalidDimension("metric must have positive dimension")
        if not np.all(np.isfinite(q)):
            raise NonFiniteValue("metric contains non-finite entries")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

        scale = max(1.0, float(np.max(np.abs(q))))
        thresh = self.sym_tolerance * scale
        sym = 0.5 * (q + q.T)
        lam_min = float(np.linalg.eigvalsh(sym)[0])
        object.__setattr__(self, "is_symmetric", bool(np.max(np.abs(q - q.T)) <= thresh))
        object.__setattr__(self, "is_psd", lam_min >= -thresh)
        object.__setattr__(self, "is_pd", lam_min > thresh)
        object.__setattr__(self, "min_sym_eigenvalue", lam_min)

    # -- constructors -----------------------------------------------------
    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @classmethod
    def scalar(cls, c, n):
        """The metric ``c * I_n``."""
        return cls(c * np.eye(n))

    @classmethod
    def from_file(cls, path):
        return cls(load_matrix(path))

    # -- derived quantities -----------------------------------------------
    @property
    def n(self):
        return self.q.shape[0]

    @property
    def structure(self):
        return {
            "is_symmetric": self.is_symmetric,
            "is_psd": self.is_psd,
            "is_pd": self.is_pd,
        }

    @property
    def id(self):
        """Content hash identifying the matrix (stable across runs)."""
        h = hashlib.sha1()
        h.update(np.asarray(self.q.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.q).tobytes())
        return "Q-" + h.hexdigest()[:12]

    @property
    def sym_part(self):
        return 0.5 * (self.q + self.q.T)

    @property
    def spectral_norm(self):
        return float(np.linalg.norm(self.q, 2))

    def transpose(self):
        return Metric(self.q.T, self.sym_tolerance)

    def scalar_multiple(self):
        """Return ``c`` if ``Q == c I`` exactly, else ``None``."""
        c = self.q[0, 0]
        if np.array_equal(self.q, c * np.eye(self.n)):
            return float(c)
        return None

    def require(self, *, symmetric=False, psd=False, pd=False, what="operation"):
        if symmetric and not self.is_symmetric:
            raise MetricStructureError(f"{what} requires a symmetric metric")
        if psd and not self.is_psd:
            raise MetricStructureError(f"{what} requires a positive semi-definite metric")
        if pd and not self.is_pd:
            raise MetricStructureError(f"{what} requires a positive definite metric")
        return self

    def __repr__(self):
        flags = ",".join(k for k, v in self.structure.items() if v) or "none"
        return f"Metric(n={self.n}, id={self.id}, flags={flags})"


def q_inner(m, a, b):
    """``<Q a, b>`` under the Euclidean pairing."""
    a = as_vector(a, m.n, "a")
    b = as_vector(b, m.n, "b")
    return float(np.dot(m.q @ a, b))


def q_norm_sq(m, a):
    """``<Q a, a>``; negative values are legal for indefinite ``Q``."""
    a = as_vector(a, m.n, "a")
    return float(np.dot(m.q @ a, a))


def q_dist(m, a, b):
    """Reporting distance ``sqrt(max(0, ||a - b||_Q^2))`` for PSD metrics."""
    m.require(psd=True, what="q_dist")
    return float(np.sqrt(max(0.0, q_norm_sq(m, as_vector(a, m.n) - as_vector(b, m.n)))))


def convex_combination_identity_residual(m, kappa, b1, b2, *, return_scale=False):
    """Residual of the convex-combination identity under an arbitrary metric.

    Computes ``||k b1 + (1-k) b2||_Q^2 - [k ||b1||_Q^2 + (1-k) ||b2||_Q^2
    - k (1-k) ||b1 - b2||_Q^2]``, which vanishes for every real ``k`` and
    every square ``Q``.  With ``return_scale`` the pair
    ``(residual, 1 + sum of |terms|)`` is returned.
    """
    b1 = as_vector(b1, m.n, "b1")
    b2 = as_vector(b2, m.n, "b2")
    kappa = float(kappa)
    lhs = q_norm_sq(m, kappa * b1 + (1.0 - kappa) * b2)
    t1 = kappa * q_norm_sq(m, b1)
    t2 = (1.0 - kappa) * q_norm_sq(m, b2)
    t3 = kappa * (1.0 - kappa) * q_norm_sq(m, b1 - b2)
    residual = lhs - (t1 + t2 - t3)
    if return_scale:
        return residual, 1.0 + abs(lhs) + abs(t1) + abs(t2) + abs(t3)
    return residual


def load_matrix(path):
    """Read a dense matrix from a text or JSON file.

    Text layout: the first non-comment line holds the dimension ``n`` (or
    ``rows cols``); the following lines hold the entries row by row.  JSON
    layout: ``{"rows": r, "cols": c, "data": [...]}`` in row-major order, or
    ``{"n": n, "data": [...]}`` for square matrices.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json":
        return matrix_from_payload(json.loads(text))
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line.replace(",", " ").split())
    if not tokens:
        raise ValueError(f"{path}: empty matrix file")
    header = [int(t) for t in tokens[0]]
    rows, cols = (header[0], header[0]) if len(header) == 1 else header[:2]
    values = [float(t) for line in tokens[1:] for t in line]
    if len(values) != rows * cols:
        raise InvalidDimension(f"{path}: declared {rows}x{cols} but found {len(values)} entries")
    return np.array(values, dtype=float).reshape(rows, cols)


def matrix_from_payload(payload):
    """Build a matrix from a row-major JSON payload with declared dimensions."""
    if isinstance(payload, list):
        arr = np.array(payload, dtype=float)
        if arr.ndim != 2:
            raise InvalidDimension("nested-list matrix payload must be two-dimensional")
        return arr
    if "n" in payload:
        rows = cols = int(payload["n"])
    else:
        rows, cols = int(payload["rows"]), int(payload["cols"])
    data = np.asarray(payload["data"], dtype=float).ravel()
    if data.size != rows * cols:
        raise InvalidDimension(f"declared {rows}x{cols} but payload has {data.size} entries")
    return data.reshape(rows, cols)
