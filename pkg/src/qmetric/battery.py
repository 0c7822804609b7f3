"""Builders for test operators with known certificates.

The affine families are constructed in the ``Q^{1/2}`` coordinates, where
``Q``-norms become Euclidean norms, so their certificates hold exactly
rather than by estimate.
"""

from __future__ import annotations

import numpy as np

from .functions import BoxIndicator, Quadratic, ScaledL1
from .operators import Affine
from .pdhg import SaddleProblem

__all__ = [
    "rng_for",
    "random_spd",
    "random_pd_nonsymmetric",
    "random_orthogonal",
    "uniform_rotation",
    "q_orthogonal",
    "averaged_affine",
    "cocoercive_affine",
    "strongly_monotone_matrix",
    "saddle_catalog",
]


def rng_for(seed):
    return np.random.Generator(np.random.PCG64(seed))


def random_orthogonal(n, rng):
    """Haar-distributed orthogonal matrix."""
    z = rng.standard_normal((n, n))
    qm, r = np.linalg.qr(z)
    return qm * np.sign(np.diag(r))


def random_spd(n, rng, spectrum=(0.5, 2.0)):
    """Symmetric PD matrix with eigenvalues drawn from ``spectrum``."""
    lo, hi = spectrum
    v = random_orthogonal(n, rng)
    lam = rng.uniform(lo, hi, size=n)
    q = (v * lam) @ v.T
    return 0.5 * (q + q.T)


def random_pd_nonsymmetric(n, rng, skew=1.0):
    """PD (in the symmetric-part sense) but non-symmetric matrix."""
    s = rng.standard_normal((n, n))
    return random_spd(n, rng) + skew * (s - s.T)


def uniform_rotation(n, theta, rng):
    """Orthogonal ``U`` rotating every plane of a random frame by ``theta``.

    ``n`` must be even.  Then ``<d, U d> = cos(theta) ||d||^2`` for every
    ``d``, so every quadratic form built from ``I`` and ``U`` is a multiple
    of ``||d||^2``.
    """
    if n % 2:
        raise ValueError("uniform_rotation needs an even dimension")
    c, s = np.cos(theta), np.sin(theta)
    block = np.array([[c, -s], [s, c]])
    u = np.kron(np.eye(n // 2), block)
    v = random_orthogonal(n, rng)
    return v @ u @ v.T


def q_orthogonal(q, u):
    """``R = Q^{-1/2} U Q^{1/2}``, an isometry of the ``Q``-norm."""
    lam, v = np.linalg.eigh(0.5 * (q + q.T))
    h = (v * np.sqrt(lam)) @ v.T
    return np.linalg.solve(h, u @ h)


def averaged_affine(xi, alpha, q, u, c=None):
    """``T = (1 - alpha) I + alpha xi R`` with ``R = q_orthogonal(q, u)``.

    ``T`` belongs to ``F^Q_{xi, alpha}`` with equality in the class
    inequality for every pair.
    """
    n = q.shape[0]
    return Affine((1.0 - alpha) * np.eye(n) + alpha * xi * q_orthogonal(q, u), c)


def cocoercive_affine(beta, q, u):
    """``T = (1/beta) (I + R)/2``: exactly ``beta``-cocoercive under ``Q``."""
    n = q.shape[0]
    return Affine(0.5 / beta * (np.eye(n) + q_orthogonal(q, u)))


def strongly_monotone_matrix(n, mu, rng, rank=None, skew=1.0):
    """``M = mu I + P + S`` with ``P`` PSD of deficient rank and ``S`` skew.

    The smallest eigenvalue of the symmetric part is exactly ``mu``.
    """
    rank = n - 1 if rank is None else rank
    g = rng.standard_normal((rank, n))
    s = rng.standard_normal((n, n))
    return mu * np.eye(n) + g.T @ g + skew * (s - s.T)


def saddle_catalog(rng=None):
    """Named battery of saddle problems.

    ``lasso_1d``: ``f = ½(x-1)^2``, ``g = |.|``, ``A = [1]``, sigma = tau = ½.
    ``quadratic``: quadratic ``f`` and ``g`` with a random 3x4 ``A``.
    ``box``: box-constrained ``f`` with quadratic ``g``.
    ``decoupled``: ``A = 0``.
    """
    rng = rng_for(7) if rng is None else rng
    a = rng.standard_normal((3, 4))
    na = np.linalg.norm(a, 2)
    step = 0.9 / na
    b = rng.standard_normal((2, 3))
    nb = np.linalg.norm(b, 2)
    return {
        "lasso_1d": SaddleProblem(Quadratic(1.0), ScaledL1(1.0), np.array([[1.0]]), 0.5, 0.5),
        "quadratic": SaddleProblem(Quadratic(rng.standard_normal(4)), Quadratic(rng.standard_normal(3)), a,
                                   step, step),
        "box": SaddleProblem(BoxIndicator(-0.5, 0.5), Quadratic(rng.standard_normal(2)), b, 0.8 / nb, 0.8 / nb),
        "decoupled": SaddleProblem(Quadratic(np.array([1.0, -2.0])), Quadratic(0.0), np.zeros((2, 2)), 1.0, 1.0),
    }
