"""Exactly solvable model systems.

Two families are built in:

* :class:`LinearToralModel` -- ``x -> A x + b (mod 1)`` for an integer matrix
  ``A`` with ``|det A| = 1``. ``b`` is an optional translation; it moves the
  center coordinates (a rotation factor) and leaves the unstable leaves alone.
* :class:`ShiftModel` -- the two-sided shift on ``m`` symbols carrying a
  Bernoulli or stationary Markov measure. Points are finite windows
  (:class:`Word`) of a bi-infinite sequence.

Anything with ``name`` and ``identity`` attributes that the downstream
functions know how to dispatch on can act as a system; see
:class:`DynamicalSystem`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Protocol, Union

import numpy as np

from ._validation import STATIONARY_ATOL, check_probability_vector, check_stochastic_matrix
from .errors import (
    NoStableDirection,
    NotUnimodular,
    NoUnstableDirection,
    UnsupportedSpectrum,
    WindowTooShort,
)

SPECTRAL_TOL = 1e-9
MAX_STEPS = 10_000


class DynamicalSystem(Protocol):
    name: str

    @property
    def identity(self) -> str: ...


def _frozen(arr, dtype=float):
    arr = np.array(arr, dtype=dtype)
    arr.setflags(write=False)
    return arr


def _exact_det(rows):
    m = [[Fraction(v) for v in row] for row in rows]
    n = len(m)
    det = Fraction(1)
    for c in range(n):
        pivot = next((r for r in range(c, n) if m[r][c] != 0), None)
        if pivot is None:
            return Fraction(0)
        if pivot != c:
            m[c], m[pivot] = m[pivot], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            if f:
                m[r] = [a - f * b for a, b in zip(m[r], m[c])]
    return det


def _exact_inverse(rows):
    n = len(rows)
    aug = [[Fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)]
           for i, row in enumerate(rows)]
    for c in range(n):
        pivot = next(r for r in range(c, n) if aug[r][c] != 0)
        aug[c], aug[pivot] = aug[pivot], aug[c]
        p = aug[c][c]
        aug[c] = [v / p for v in aug[c]]
        for r in range(n):
            if r != c and aug[r][c] != 0:
                f = aug[r][c]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[c])]
    inv = [row[n:] for row in aug]
    if any(v.denominator != 1 for row in inv for v in row):
        raise NotUnimodular("matrix inverse is not integral")
    return [[int(v) for v in row] for row in inv]


def _matmul(a, b):
    return [[sum(x * y for x, y in zip(row, col)) for col in zip(*b)] for row in a]


def _real_basis(vectors):
    """Orthonormal real basis spanning the real and imaginary parts."""
    if not vectors:
        return np.zeros((0, 0))
    cols = []
    for v in vectors:
        cols.append(v.real)
        if np.linalg.norm(v.imag) > SPECTRAL_TOL:
            cols.append(v.imag)
    q, r = np.linalg.qr(np.array(cols).T)
    keep = np.abs(np.diag(r)) > SPECTRAL_TOL
    return np.array([_canonical_sign(v) + 0.0 for v in q[:, keep].T])


def _canonical_sign(v):
    idx = np.flatnonzero(np.abs(v) > SPECTRAL_TOL)[0]
    return v if v[idx] > 0 else -v


@dataclass(frozen=True, eq=False)
class LinearToralModel:
    """Integer-matrix torus map with its stable/center/unstable splitting.

    Build instances with :func:`build_linear_model`; the constructor does no
    spectral work of its own.
    """

    matrix: np.ndarray
    translation: np.ndarray
    unstable_eigenvalues: np.ndarray
    unstable_dirs: np.ndarray
    unstable_logs: np.ndarray
    center_dirs: np.ndarray
    stable_dirs: np.ndarray
    name: str = "linear"

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]

    @property
    def unstable_dimension(self) -> int:
        return len(self.unstable_logs)

    @property
    def identity(self) -> str:
        rows = ";".join(",".join(str(int(v)) for v in row) for row in self.matrix)
        shift = ",".join(float(v).hex() for v in self.translation)
        return f"linear[{rows}|{shift}]"

    @cached_property
    def _int_rows(self):
        return [[int(v) for v in row] for row in self.matrix]

    @cached_property
    def _int_inverse(self):
        return _exact_inverse(self._int_rows)

    @cached_property
    def _steps_cache(self):
        return {}

    def _affine_power(self, steps):
        """Exact ``(A^steps, c_steps)`` with ``f^steps(x) = A^steps x + c_steps``."""
        cache = self._steps_cache
        if steps in cache:
            return cache[steps]
        d = self.dimension
        b = [Fraction(float(v)) for v in self.translation]
        if steps == 0:
            out = ([[int(i == j) for j in range(d)] for i in range(d)], [Fraction(0)] * d)
        elif steps > 0:
            prev_m, prev_c = self._affine_power(steps - 1)
            a = self._int_rows
            out = (_matmul(a, prev_m),
                   [sum(a[i][j] * prev_c[j] for j in range(d)) + b[i] for i in range(d)])
        else:
            prev_m, prev_c = self._affine_power(steps + 1)
            inv = self._int_inverse
            diff = [pc - bb for pc, bb in zip(prev_c, b)]
            out = (_matmul(inv, prev_m),
                   [sum(inv[i][j] * diff[j] for j in range(d)) for i in range(d)])
        cache[steps] = out
        return out


@dataclass(frozen=True)
class Word:
    """Finite window ``x[start], ..., x[start + len - 1]`` of a bi-infinite word."""

    symbols: tuple
    start: int = 0

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))

    @property
    def stop(self) -> int:
        return self.start + len(self.symbols)

    def __len__(self):
        return len(self.symbols)

    def __getitem__(self, index: int) -> int:
        if not self.start <= index < self.stop:
            raise WindowTooShort(
                f"coordinate {index} outside window [{self.start}, {self.stop})")
        return self.symbols[index - self.start]

    def covers(self, lo: int, hi: int) -> bool:
        """True when coordinates ``lo..hi`` (inclusive) are all known."""
        return self.start <= lo and hi < self.stop

    def slice(self, lo: int, hi: int) -> tuple:
        if not self.covers(lo, hi):
            raise WindowTooShort(
                f"coordinates {lo}..{hi} outside window [{self.start}, {self.stop})")
        return self.symbols[lo - self.start:hi - self.start + 1]


@dataclass(frozen=True, eq=False)
class ShiftModel:
    """Two-sided shift with a Bernoulli or stationary Markov measure."""

    alphabet_size: int
    kind: str
    transition: np.ndarray
    stationary: np.ndarray
    name: str = "shift"

    @property
    def probabilities(self):
        return self.stationary if self.kind == "bernoulli" else None

    @property
    def identity(self) -> str:
        if self.kind == "bernoulli":
            body = ",".join(float(v).hex() for v in self.stationary)
        else:
            body = ";".join(",".join(float(v).hex() for v in row) for row in self.transition)
        return f"shift-{self.kind}[{body}]"


System = Union[LinearToralModel, ShiftModel]


def build_linear_model(matrix, translation=None, name=None) -> LinearToralModel:
    """Spectral splitting of an integer torus automorphism.

    Eigenvalues with modulus above ``1 + 1e-9`` are unstable, below
    ``1 - 1e-9`` stable, the rest center. Unstable eigenvalues must be real
    and simple, otherwise the leaf charts are not well defined and
    :class:`UnsupportedSpectrum` is raised.

    >>> model = build_linear_model([[2, 1], [1, 1]])
    >>> round(float(model.unstable_logs[0]), 7)
    0.9624237
    """
    raw = np.asarray(matrix)
    if raw.ndim != 2 or raw.shape[0] != raw.shape[1]:
        raise ValueError("matrix must be square")
    if raw.shape[0] < 2:
        raise ValueError("dimension must be at least 2")
    if not np.all(np.equal(np.mod(raw.astype(float), 1.0), 0.0)):
        raise ValueError("matrix entries must be integers")
    a = raw.astype(np.int64)
    d = a.shape[0]
    det = _exact_det(a.tolist())
    if abs(det) != 1:
        raise NotUnimodular(f"|det| = {abs(det)}, expected 1")

    if translation is None:
        translation = np.zeros(d)
    translation = np.asarray(translation, dtype=float)
    if translation.shape != (d,):
        raise ValueError(f"translation must have {d} entries")

    eigvals, eigvecs = np.linalg.eig(a.astype(float))
    moduli = np.abs(eigvals)
    unstable = np.flatnonzero(moduli > 1.0 + SPECTRAL_TOL)
    stable = np.flatnonzero(moduli < 1.0 - SPECTRAL_TOL)
    center = np.setdiff1d(np.arange(d), np.concatenate([unstable, stable]))
    if unstable.size == 0:
        raise NoUnstableDirection("no eigenvalue of modulus > 1")
    if stable.size == 0:
        raise NoStableDirection("no eigenvalue of modulus < 1")

    lams = eigvals[unstable]
    if np.any(np.abs(lams.imag) > SPECTRAL_TOL * np.abs(lams)):
        raise UnsupportedSpectrum("complex unstable eigenvalue")
    lams = lams.real
    for i in range(len(lams)):
        for j in range(i + 1, len(lams)):
            if abs(lams[i] - lams[j]) <= SPECTRAL_TOL * max(abs(lams[i]), 1.0):
                raise UnsupportedSpectrum("repeated unstable eigenvalue")

    order = np.argsort(-np.abs(lams), kind="stable")
    dirs = []
    for idx in unstable[order]:
        v = eigvecs[:, idx].real
        dirs.append(_canonical_sign(v / np.linalg.norm(v)))
    lams = lams[order]

    return LinearToralModel(
        matrix=_frozen(a, dtype=np.int64),
        translation=_frozen(translation),
        unstable_eigenvalues=_frozen(lams),
        unstable_dirs=_frozen(np.array(dirs)),
        unstable_logs=_frozen(np.log(np.abs(lams))),
        center_dirs=_frozen(_real_basis([eigvecs[:, i] for i in center]).reshape(-1, d)),
        stable_dirs=_frozen(_real_basis([eigvecs[:, i] for i in stable]).reshape(-1, d)),
        name=name or "linear",
    )


def _stationary_vector(P):
    m = P.shape[0]
    lhs = np.vstack([P.T - np.eye(m), np.ones((1, m))])
    rhs = np.zeros(m + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def build_shift_model(probabilities=None, transition=None, name=None) -> ShiftModel:
    """Bernoulli shift (``probabilities``) or Markov shift (``transition``)."""
    if (probabilities is None) == (transition is None):
        raise ValueError("give exactly one of probabilities or transition")
    if probabilities is not None:
        p = check_probability_vector(probabilities)
        P = np.tile(p, (p.size, 1))
        return ShiftModel(p.size, "bernoulli", _frozen(P), _frozen(p), name=name or "bernoulli")
    P = check_stochastic_matrix(transition)
    pi = _stationary_vector(P)
    if np.max(np.abs(pi @ P - pi)) > STATIONARY_ATOL:
        raise ValueError("transition matrix has no stationary vector within tolerance")
    return ShiftModel(P.shape[0], "markov", _frozen(P), _frozen(pi), name=name or "markov")


def _check_steps(steps):
    if isinstance(steps, bool) or not isinstance(steps, (int, np.integer)):
        raise TypeError("steps must be an integer")
    if abs(steps) > MAX_STEPS:
        raise ValueError(f"|steps| must be <= {MAX_STEPS}")
    return int(steps)


def _apply_linear(model, point, steps):
    exact = any(isinstance(c, Fraction) for c in point)
    x = [Fraction(c) if isinstance(c, Fraction) else Fraction(float(c)) for c in point]
    if len(x) != model.dimension:
        raise ValueError(f"point must have {model.dimension} coordinates")
    mat, off = model._affine_power(steps)
    y = [sum(row[j] * x[j] for j in range(len(x))) + c for row, c in zip(mat, off)]
    y = [v - math.floor(v) for v in y]
    if exact:
        return tuple(y)
    out = np.array([float(v) for v in y])
    out[out >= 1.0] = 0.0
    return out


def apply(system: System, point, steps: int = 1):
    """Image of ``point`` under ``f**steps``.

    Toral points are computed in exact rational arithmetic and rounded once,
    so the result is the correctly rounded image of the given float point.
    Pass :class:`fractions.Fraction` coordinates to stay exact throughout.
    For a shift the window is re-indexed; coordinate 0 of the image must
    still be inside the window.
    """
    steps = _check_steps(steps)
    if isinstance(system, LinearToralModel):
        return _apply_linear(system, point, steps)
    if isinstance(system, ShiftModel):
        if not isinstance(point, Word):
            raise TypeError("shift points are Word windows")
        out = Word(point.symbols, point.start - steps)
        if not out.covers(0, 0):
            raise WindowTooShort(f"window cannot supply coordinate {steps} of the preimage")
        return out
    raise TypeError(f"unsupported system {type(system).__name__}")


def push_forward(model: LinearToralModel, points, steps: int = 1):
    """Vectorised float image of many toral points (no exact arithmetic).

    Adequate for a few steps; error grows like the expansion rate to the
    power ``steps`` times machine epsilon.
    """
    steps = _check_steps(steps)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    mat, off = model._affine_power(steps)
    m = np.array(mat, dtype=float)
    c = np.array([float(v) for v in off])
    out = np.mod(pts @ m.T + c, 1.0)
    out[out >= 1.0] = 0.0
    return out


def leaf_chart(model: LinearToralModel, anchor, t):
    """Point ``anchor + sum_j t_j u_j (mod 1)`` on the unstable leaf of ``anchor``.

    ``t`` holds one coordinate per unstable direction; a 2-D ``t`` (or a 1-D
    array when the leaf is one-dimensional) gives a batch of points.
    """
    anchor = np.asarray(anchor, dtype=float)
    p = model.unstable_dimension
    t = np.asarray(t, dtype=float)
    single = t.ndim == 0 or (t.ndim == 1 and t.size == p and p > 1) or (t.ndim == 1 and t.size == 1 and p == 1)
    tt = t.reshape(-1, p)
    out = np.mod(anchor + tt @ model.unstable_dirs, 1.0)
    out[out >= 1.0] = 0.0
    return out[0] if single else out
