"""Input validation helpers shared by the public functions."""

import numbers

import numpy as np

PROB_ATOL = 1e-12
STATIONARY_ATOL = 1e-10


def check_torus_points(points, dimension=None, name="points"):
    """Return ``points`` as a float array of shape (m, d) inside [0, 1)^d.

    A single point is promoted to shape (1, d).
    """
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a point or a 2-D array of points")
    if dimension is not None and arr.shape[1] != dimension:
        raise ValueError(f"{name} must have {dimension} coordinates, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if np.any(arr < 0.0) or np.any(arr >= 1.0):
        raise ValueError(f"{name} must lie in [0, 1)^d")
    return arr


def check_probability_vector(p, name="probabilities"):
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size < 2:
        raise ValueError(f"{name} must be a vector with at least 2 entries")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError(f"{name} must be nonnegative")
    if abs(p.sum() - 1.0) > PROB_ATOL:
        raise ValueError(f"{name} must sum to 1 (got {p.sum()!r})")
    return p


def check_stochastic_matrix(P, name="transition"):
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1] or P.shape[0] < 2:
        raise ValueError(f"{name} must be a square matrix of size >= 2")
    for row in P:
        check_probability_vector(row, name=f"{name} row")
    return P


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_delta(delta, allow_zero=False):
    delta = float(delta)
    lo_ok = delta >= 0.0 if allow_zero else delta > 0.0
    if not (lo_ok and delta < 1.0):
        bound = "[0, 1)" if allow_zero else "(0, 1)"
        raise ValueError(f"delta must lie in {bound}, got {delta}")
    return delta


def make_rng(seed, *stream):
    """Counter-based generator (Philox) keyed by ``seed`` and a substream path.

    ``make_rng(seed, task)`` gives independent, reproducible streams per task.
    """
    if seed is None:
        raise ValueError("an explicit seed is required")
    seq = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, stream)])
    return np.random.Generator(np.random.Philox(seq))
