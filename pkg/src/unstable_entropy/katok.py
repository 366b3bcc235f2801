"""scikit-learn style front end to the counting estimators.

The "data" are anchor points: rows of torus coordinates for a linear model,
or a single column of time-zero symbols for a shift. ``fit`` runs the chosen
counting formula on the leaf piece through each anchor and stores the slope
fits; ``transform`` returns one slope per anchor.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .measures import measure_for
from .partitions import DEFAULT_BUDGET, CylinderPartition, build_grid, build_unstable_scheme
from .estimators import anchor_rows, sample_anchors, summarize
from .systems import ShiftModel


class KatokEntropyEstimator(TransformerMixin, BaseEstimator):
    """Per-anchor slope of ``log count`` against ``n``.

    Parameters
    ----------
    system : LinearToralModel or ShiftModel
    k, epsilon0 : grid size and cell-diameter bound for the torus partition
    formula : ``"partition"`` or ``"ball"``
    epsilon : ball radius (ball formula only)
    method : ``"oracle_interval"`` or ``"greedy"`` (ball formula only)
    """

    def __init__(self, system=None, k=10, epsilon0=0.15, leaf_halflength=None,
                 formula="partition", epsilon=0.1, method="oracle_interval", delta=0.1,
                 n_window=(8, 14), block_length=1, sample_count=100_000, seed=0,
                 budget=DEFAULT_BUDGET):
        self.system = system
        self.k = k
        self.epsilon0 = epsilon0
        self.leaf_halflength = leaf_halflength
        self.formula = formula
        self.epsilon = epsilon
        self.method = method
        self.delta = delta
        self.n_window = n_window
        self.block_length = block_length
        self.sample_count = sample_count
        self.seed = seed
        self.budget = budget

    def _setup(self):
        if self.system is None:
            raise ValueError("system is required")
        if self.formula not in ("partition", "ball"):
            raise ValueError(f"unknown formula {self.formula!r}")
        system = self.system
        if isinstance(system, ShiftModel):
            xi = CylinderPartition(system.alphabet_size, self.block_length)
            scheme = build_unstable_scheme(system, CylinderPartition(system.alphabet_size, 1))
        else:
            xi = build_grid(self.k, self.epsilon0, system.dimension)
            scheme = build_unstable_scheme(system, xi, self.leaf_halflength)
        return system, measure_for(system), xi, scheme

    def _check_anchors(self, X, system):
        if isinstance(system, ShiftModel):
            X = check_array(X, dtype=np.int64, ensure_2d=False).reshape(-1, 1)
            if X.min() < 0 or X.max() >= system.alphabet_size:
                raise ValueError("anchor symbols must lie in the alphabet")
            return [int(v) for v in X[:, 0]]
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != system.dimension:
            raise ValueError(f"anchors need {system.dimension} coordinates, got {X.shape[1]}")
        return list(np.mod(X, 1.0))

    def _slopes(self, anchors):
        system, mu, xi, scheme = self._setup()
        lo, hi = self.n_window
        ns = list(range(lo, hi + 1))
        eps = (self.epsilon,) if self.formula == "ball" else ()
        rows = []
        for j, a in enumerate(anchors):
            rows += anchor_rows(system, mu, scheme, xi, j, a, ns, eps, [self.delta],
                                (self.formula,), (self.method,), self.sample_count, self.seed,
                                self.budget)
        estimates, summary = summarize(rows, (lo, hi))
        slopes = np.array([est.slope for est in estimates.values()])
        return rows, list(estimates.values()), summary, slopes

    def fit(self, X=None, y=None, n_anchors=32):
        """Fit on the anchors ``X``; with ``X=None`` draw ``n_anchors`` from the invariant measure."""
        system = self._setup()[0]
        anchors = (sample_anchors(system, n_anchors, self.seed) if X is None
                   else self._check_anchors(X, system))
        rows, estimates, summary, slopes = self._slopes(anchors)
        self.counts_ = rows
        self.estimates_ = estimates
        self.slopes_ = slopes
        self.entropy_ = float(np.median(slopes))
        q25, q75 = np.percentile(slopes, [25, 75])
        self.iqr_ = float(q75 - q25)
        self.n_anchors_ = len(anchors)
        return self

    def transform(self, X):
        """Slope estimates for the leaves through new anchors, shape ``(m, 1)``."""
        check_is_fitted(self, "slopes_")
        anchors = self._check_anchors(X, self.system)
        return self._slopes(anchors)[3].reshape(-1, 1)
