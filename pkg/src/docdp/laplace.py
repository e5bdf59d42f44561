"""n-dimensional Laplace noise with density proportional to exp(-eps * ||z - x||).

A draw is a uniformly random unit direction (a normalised standard Gaussian
vector) scaled by a Gamma(n, 1/eps) radius. All randomness comes from an
explicit :class:`numpy.random.Generator`; nothing touches global state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError

# Gaussian draws with a smaller norm are redrawn instead of normalised.
_MIN_GAUSSIAN_NORM = 1e-12


def validate_epsilon(eps) -> float:
    eps = float(eps)
    if not (eps > 0 and math.isfinite(eps)):
        raise ValueError(f"epsilon must be positive and finite, got {eps}")
    return eps


def _check_dim(n) -> int:
    if int(n) != n or n < 1:
        raise ValueError(f"dimension must be a positive integer, got {n}")
    return int(n)


@dataclass(frozen=True)
class NoiseSample:
    direction: np.ndarray
    radius: float

    @property
    def offset(self) -> np.ndarray:
        return self.radius * self.direction


def sample_unit_sphere(n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniform point(s) on the unit sphere in R^n.

    Returns shape ``(n,)``, or ``(size, n)`` when ``size`` is given.
    """
    n = _check_dim(n)
    count = 1 if size is None else int(size)
    v = rng.standard_normal((count, n))
    norms = np.sqrt((v * v).sum(axis=1))
    bad = norms < _MIN_GAUSSIAN_NORM
    while bad.any():
        v[bad] = rng.standard_normal((int(bad.sum()), n))
        norms[bad] = np.sqrt((v[bad] * v[bad]).sum(axis=1))
        bad = norms < _MIN_GAUSSIAN_NORM
    u = v / norms[:, None]
    return u[0] if size is None else u


def sample_radius(n: int, eps: float, rng: np.random.Generator, size: int | None = None):
    """Gamma(shape=n, scale=1/eps) draw(s): the distance of the noisy point from the input."""
    n = _check_dim(n)
    eps = validate_epsilon(eps)
    if size is None:
        return float(rng.gamma(n, 1.0 / eps))
    return rng.gamma(n, 1.0 / eps, size=int(size))


def sample_noise_vector(n: int, eps: float, rng: np.random.Generator) -> NoiseSample:
    """One noise draw, kept in radius/direction form."""
    r = sample_radius(n, eps, rng)
    u = sample_unit_sphere(n, rng)
    return NoiseSample(direction=u, radius=r)


def sample_noise(x, eps: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Perturb ``x`` with n-dimensional Laplace noise, n = len(x).

    With ``size`` given, returns ``size`` independent perturbations of the
    same ``x`` as a ``(size, n)`` array. The batched path draws all radii
    before all directions, so its stream differs from repeated single calls;
    both are deterministic for a given generator state.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatchError("x must be a 1-D vector")
    if not np.all(np.isfinite(x)):
        raise ValueError("x must be finite")
    n = x.shape[0]
    if size is None:
        s = sample_noise_vector(n, eps, rng)
        return x + s.offset
    r = sample_radius(n, eps, rng, size)
    u = sample_unit_sphere(n, rng, size)
    return x + r[:, None] * u


def sample_noise_batch(X, eps: float, rng: np.random.Generator) -> np.ndarray:
    """Perturb every row of ``X`` independently."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionMismatchError("X must be 2-D")
    m, n = X.shape
    r = sample_radius(n, eps, rng, m)
    u = sample_unit_sphere(n, rng, m)
    return X + r[:, None] * u


def log_density_unnormalized(x, z, eps: float) -> float:
    """-eps * ||x - z||, the log density up to an additive constant."""
    eps = validate_epsilon(eps)
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    if x.shape != z.shape:
        raise DimensionMismatchError(f"shapes {x.shape} and {z.shape} differ")
    d = x - z
    return -eps * math.sqrt(float((d * d).sum()))
