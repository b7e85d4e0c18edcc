"""Seeded random tuples on the supported varieties and nearby perturbations."""

from __future__ import annotations

import numpy as np
from scipy.stats import unitary_group

from ._validation import as_components, check_positive
from .linalg import (
    MatrixTuple,
    check_variety,
    dagger,
    diagonal_tuple,
    hermitize,
    is_hermitian_variety,
    joint_diagonalize,
    metric_eth,
)
from .manifold import builtin_atlas


def haar_unitary(n: int, rng) -> np.ndarray:
    """Haar-distributed ``n x n`` unitary drawn from ``rng``."""
    if n == 1:
        return np.exp(2j * np.pi * rng.uniform()) * np.ones((1, 1))
    return unitary_group.rvs(n, random_state=rng)


def random_points(variety: str, n: int, m: int, rng) -> np.ndarray:
    """``n`` joint eigenvalues in the spectral set of ``variety``."""
    if variety == "cube":
        return rng.uniform(-1.0, 1.0, (n, m))
    if variety in ("disk", "none"):
        r = np.sqrt(rng.uniform(0.0, 1.0, (n, m)))
        return r * np.exp(1j * rng.uniform(-np.pi, np.pi, (n, m)))
    if variety == "torus":
        return np.exp(1j * rng.uniform(-np.pi, np.pi, (n, m)))
    if variety == "sphere":
        if m < 2:
            raise ValueError("sphere tuples need m >= 2")
        g = rng.standard_normal((n, m))
        return g / np.linalg.norm(g, axis=1, keepdims=True)
    if variety == "spherical-unitary":
        g = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
        return g / np.linalg.norm(g, axis=1, keepdims=True)
    atlas = builtin_atlas(variety)
    if atlas.m != m:
        raise ValueError(f"{variety} lives in R^{atlas.m}, not R^{m}")
    return atlas.sample(n, rng)


def random_tuple(variety: str, n: int, m: int, seed: int | None = None) -> MatrixTuple:
    """Random commuting tuple on ``variety``: random spectrum, Haar eigenbasis."""
    variety = check_variety(variety)
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    rng = np.random.default_rng(seed)
    pts = random_points(variety, n, m, rng)
    Q = haar_unitary(n, rng)
    return MatrixTuple(diagonal_tuple(Q, pts, is_hermitian_variety(variety)), variety)


def _move_points(variety: str, pts: np.ndarray, step: float, rng) -> np.ndarray:
    n, m = pts.shape
    if variety == "cube":
        return np.clip(pts.real + step * rng.uniform(-1.0, 1.0, (n, m)), -1.0, 1.0)
    if variety in ("disk", "none"):
        z = pts + step * np.sqrt(rng.uniform(0.0, 1.0, (n, m))) * np.exp(
            1j * rng.uniform(-np.pi, np.pi, (n, m))
        )
        return z / np.maximum(1.0, np.abs(z))
    if variety == "torus":
        theta = np.angle(pts) + step * rng.uniform(-1.0, 1.0, (n, m))
        return np.exp(1j * theta)
    # sphere-like sets: half step, then renormalize (at most doubles the move)
    if variety == "spherical-unitary":
        g = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
        g *= 0.5 * step / np.linalg.norm(g, axis=1, keepdims=True)
        q = pts + g
        return q / np.linalg.norm(q, axis=1, keepdims=True)
    atlas = builtin_atlas("sphere", m) if variety == "sphere" else builtin_atlas(variety)
    g = rng.standard_normal((n, m))
    g *= 0.5 * step / np.linalg.norm(g, axis=1, keepdims=True)
    return atlas.project(pts.real + g)


def perturb_tuple(X, delta: float, seed: int | None = None, variety: str | None = None):
    """Nearby tuple on the same variety with ``d(X, Y) <= delta``.

    Joint eigenvalues move by at most ``delta/2`` inside the spectral set and
    the eigenbasis is rotated by ``exp(i eta K)`` with ``||K|| = 1``,
    ``eta = delta/20``.

    Returns
    -------
    Y : MatrixTuple
    distance : float
        Measured ``d(X, Y)``.
    """
    comps = as_components(X, "X")
    delta = check_positive(delta, "delta", allow_zero=True)
    if delta > 2.0:
        raise ValueError("delta must be at most 2")
    variety = check_variety(variety or getattr(X, "variety", "none"))
    if delta == 0.0:
        return MatrixTuple(comps.copy(), variety), 0.0
    rng = np.random.default_rng(seed)
    Q, spec = joint_diagonalize(comps)
    pts = _move_points(variety, spec.points, 0.5 * delta, rng)
    n = comps.shape[1]
    K = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    K = hermitize(K)
    w, V = np.linalg.eigh(K)
    w = w / max(np.max(np.abs(w)), 1e-300)
    R = (V * np.exp(0.05j * delta * w)) @ dagger(V)
    hermitian = is_hermitian_variety(variety)
    Y = diagonal_tuple(R @ Q, pts, hermitian)
    return MatrixTuple(Y, variety), metric_eth(comps, Y)
