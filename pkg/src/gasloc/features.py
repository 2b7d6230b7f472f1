"""Gas features: value, fixed hit, adaptive hit, and the rank (EDF) feature.

Each feature maps a raw concentration sequence to a feature sequence of the
same length.  The same transform is applied to the measured stream and,
independently per source hypothesis, to the model-estimated stream.

The rank feature assigns each value its normalized rank within the whole
dataset: m_i = (#{j : d_j <= d_i}) / n.  Ties share the same (maximal)
rank.  Because only comparisons enter, the feature is invariant under any
strictly increasing transform of the data, which is what makes it usable
with uncalibrated sensors.  The dataset is kept in sorted order so a batch
of P new values merges in O(L + P log P).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .world import ValidationError

FEATURE_KINDS = ("value", "fixed_hit", "adaptive_hit", "rank")


@dataclass(frozen=True)
class Measurement:
    """One gas sample taken by the robot."""

    position: tuple[float, float]
    time: float
    value: float
    iteration: int


@dataclass(frozen=True)
class FeatureParams:
    """Per-feature knobs; thresholds are resolved by the caller.

    ``d_thres`` is the single fixed-hit threshold, in concentration units,
    shared by the measured and estimated sides.  Sharing one absolute
    threshold is what makes ``fixed_hit`` sensitive to sensor calibration:
    an uncalibrated response curve maps the same gas to a different
    concentration estimate, so the measured hit pattern drifts away from
    every hypothesis's prediction.

    ``lam`` is the smoothing factor of the adaptive-hit moving average
    (0.7 by default, from an exhaustive search).

    ``span_fraction`` positions the default ``d_thres`` at this fraction
    of the largest predicted concentration over all source hypotheses.
    """

    lam: float = 0.7
    d_thres: float | None = None
    span_fraction: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.lam < 1.0:
            raise ValidationError("adaptive-hit smoothing lam must lie in [0, 1)")
        if not 0.0 < self.span_fraction < 1.0:
            raise ValidationError("span_fraction must lie in (0, 1)")


class SortedDataset:
    """Measurement values maintained in sorted order across batch inserts."""

    __slots__ = ("values",)

    def __init__(self, values=()):
        arr = np.sort(np.asarray(values, dtype=float))
        self.values = arr

    def __len__(self) -> int:
        return self.values.size


def insert_batch(dataset: SortedDataset, new_values) -> SortedDataset:
    """Merge P new values into the sorted dataset in O(L + P log P).

    Sorts the new batch, locates each element with a binary search over
    the existing L values, and scatters both lists into the merged array.
    The result equals a from-scratch sort of all L + P values.
    """
    new = np.sort(np.asarray(new_values, dtype=float))
    old = dataset.values
    if new.size == 0:
        merged = old.copy()
    elif old.size == 0:
        merged = new
    else:
        pos = np.searchsorted(old, new, side="left")
        merged = np.empty(old.size + new.size, dtype=float)
        new_idx = pos + np.arange(new.size)
        merged[new_idx] = new
        old_mask = np.ones(merged.size, dtype=bool)
        old_mask[new_idx] = False
        merged[old_mask] = old
    out = SortedDataset.__new__(SortedDataset)
    out.values = merged
    return out


def feature_rank(dataset: SortedDataset, values) -> np.ndarray:
    """Normalized ranks of ``values`` within ``dataset``: (# d_j <= d_i) / n.

    ``dataset`` must hold exactly the n values of the full sequence that
    ``values`` belongs to; ranks lie in (0, 1].
    """
    v = np.asarray(values, dtype=float)
    n = len(dataset)
    if n == 0:
        raise ValidationError("rank feature undefined on an empty dataset")
    return np.searchsorted(dataset.values, v, side="right") / n


def feature_value(values) -> np.ndarray:
    """Identity: the raw sequence is the feature sequence."""
    return np.asarray(values, dtype=float).copy()


def feature_fixed_hit(values, thres: float) -> np.ndarray:
    """Binary hits by a constant threshold; strictly greater than."""
    return (np.asarray(values, dtype=float) > thres).astype(float)


def adaptive_thresholds(values, lam: float) -> np.ndarray:
    """Moving-average thresholds: t_1 = d_1; t_i = lam*t_{i-1} + (1-lam)*d_i."""
    v = np.asarray(values, dtype=float)
    thr = np.empty_like(v)
    if v.size == 0:
        return thr
    thr[0] = v[0]
    for i in range(1, v.size):
        thr[i] = lam * thr[i - 1] + (1.0 - lam) * v[i]
    return thr


def feature_adaptive_hit(values, lam: float) -> np.ndarray:
    """Binary hits against the moving-average threshold (rising edges).

    m_i = 1 iff d_i > t_i.  m_1 is always 0 since t_1 = d_1.
    """
    if not 0.0 <= lam < 1.0:
        raise ValidationError("lam must lie in [0, 1)")
    v = np.asarray(values, dtype=float)
    return (v > adaptive_thresholds(v, lam)).astype(float)


def extract(kind: str, values, params: FeatureParams,
            dataset: SortedDataset | None = None,
            thres: float | None = None) -> np.ndarray:
    """Dispatch to the feature transform named by ``kind``.

    For ``rank``, ``dataset`` must be the sorted copy of ``values``;
    measured and estimated sequences each use their own dataset.  For
    ``fixed_hit``, ``thres`` overrides ``params.d_thres`` when a caller
    has already resolved the default threshold.
    """
    if kind == "value":
        return feature_value(values)
    if kind == "fixed_hit":
        t = thres if thres is not None else params.d_thres
        if t is None:
            raise ValidationError("fixed_hit requires a threshold")
        return feature_fixed_hit(values, t)
    if kind == "adaptive_hit":
        return feature_adaptive_hit(values, params.lam)
    if kind == "rank":
        if dataset is None:
            dataset = SortedDataset(values)
        if len(dataset) != np.asarray(values).size:
            raise ValidationError("rank dataset length must match the value sequence")
        return feature_rank(dataset, values)
    raise ValidationError(f"unknown feature kind {kind!r}; known: {FEATURE_KINDS}")


class MeasuredFeatureStream:
    """Measured-side feature state, grown one batch per iteration.

    Rank features are recomputed for the whole history after every batch
    (the EDF of earlier samples changes as the dataset grows); the other
    three features never rewrite history and are kept incrementally.
    """

    def __init__(self, kind: str, params: FeatureParams):
        if kind not in FEATURE_KINDS:
            raise ValidationError(f"unknown feature kind {kind!r}")
        if kind == "fixed_hit" and params.d_thres is None:
            raise ValidationError("fixed_hit requires params.d_thres on the measured side")
        self.kind = kind
        self.params = params
        self.values = np.empty(0, dtype=float)
        self.dataset = SortedDataset()
        self._hits = np.empty(0, dtype=float)
        self._adaptive_thr = None  # last threshold, carried across batches

    def __len__(self) -> int:
        return self.values.size

    def append(self, new_values) -> None:
        new = np.asarray(new_values, dtype=float)
        self.values = np.concatenate([self.values, new])
        if self.kind == "rank":
            self.dataset = insert_batch(self.dataset, new)
        elif self.kind == "fixed_hit":
            self._hits = np.concatenate([self._hits, feature_fixed_hit(new, self.params.d_thres)])
        elif self.kind == "adaptive_hit":
            lam = self.params.lam
            hits = np.empty(new.size, dtype=float)
            thr = self._adaptive_thr
            for i, d in enumerate(new):
                thr = d if thr is None else lam * thr + (1.0 - lam) * d
                hits[i] = 1.0 if d > thr else 0.0
            self._adaptive_thr = thr
            self._hits = np.concatenate([self._hits, hits])

    def features(self) -> np.ndarray:
        """Feature sequence M_{1:n} over everything appended so far."""
        if self.kind == "value":
            return self.values.copy()
        if self.kind == "rank":
            return feature_rank(self.dataset, self.values)
        return self._hits.copy()


class HypothesisFeatureBank:
    """Estimated-side features for all source hypotheses at once.

    Row j holds the model-estimated concentration sequence C_{1:n} of
    hypothesis j; the bank applies the same per-feature recursion as the
    measured stream, vectorized across hypotheses.  Rank rows each keep
    their own sorted dataset, merged batch-by-batch.
    """

    def __init__(self, kind: str, params: FeatureParams, n_hypotheses: int,
                 thresholds=None):
        if kind not in FEATURE_KINDS:
            raise ValidationError(f"unknown feature kind {kind!r}")
        self.kind = kind
        self.params = params
        self.n_hypotheses = n_hypotheses
        self.values = np.empty((n_hypotheses, 0), dtype=float)
        self._sorted = np.empty((n_hypotheses, 0), dtype=float)
        self._hits = np.empty((n_hypotheses, 0), dtype=float)
        self._adaptive_thr = None  # (n_hypotheses,) after the first sample
        if kind == "fixed_hit":
            if thresholds is None:
                raise ValidationError("fixed_hit requires per-hypothesis thresholds")
            self.thresholds = np.asarray(thresholds, dtype=float).reshape(n_hypotheses)

    @property
    def n(self) -> int:
        return self.values.shape[1]

    def append(self, new_cols: np.ndarray) -> None:
        new = np.atleast_2d(np.asarray(new_cols, dtype=float))
        if new.shape[0] != self.n_hypotheses:
            raise ValidationError("batch rows must match the hypothesis count")
        self.values = np.concatenate([self.values, new], axis=1)
        if self.kind == "rank":
            new_sorted = np.sort(new, axis=1)
            if self._sorted.shape[1] == 0:
                self._sorted = new_sorted
            else:
                merged = np.empty((self.n_hypotheses, self.n), dtype=float)
                for r in range(self.n_hypotheses):
                    old = self._sorted[r]
                    nw = new_sorted[r]
                    pos = np.searchsorted(old, nw, side="left")
                    idx = pos + np.arange(nw.size)
                    merged[r, idx] = nw
                    mask = np.ones(merged.shape[1], dtype=bool)
                    mask[idx] = False
                    merged[r, mask] = old
                self._sorted = merged
        elif self.kind == "fixed_hit":
            hits = (new > self.thresholds[:, None]).astype(float)
            self._hits = np.concatenate([self._hits, hits], axis=1)
        elif self.kind == "adaptive_hit":
            lam = self.params.lam
            hits = np.empty_like(new)
            thr = self._adaptive_thr
            for i in range(new.shape[1]):
                col = new[:, i]
                thr = col.copy() if thr is None else lam * thr + (1.0 - lam) * col
                hits[:, i] = col > thr
            self._adaptive_thr = thr
            self._hits = np.concatenate([self._hits, hits], axis=1)

    def features(self) -> np.ndarray:
        """Feature matrix E of shape (n_hypotheses, n)."""
        if self.kind == "value":
            return self.values.copy()
        if self.kind == "rank":
            n = self.n
            out = np.empty_like(self.values)
            for r in range(self.n_hypotheses):
                out[r] = np.searchsorted(self._sorted[r], self.values[r], side="right")
            out /= n
            return out
        return self._hits.copy()
