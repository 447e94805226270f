"""Correlation, dependent-correlation tests and the lexical complexity regression."""

from __future__ import annotations

import csv
import logging
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .freq import FrequencyProvider
from .validation import check_correlation, check_paired, check_vector

log = logging.getLogger(__name__)

KINDS = ("ldt", "familiarity", "complexity")
RT_RANGE_MS = (200.0, 2000.0)


class UndefinedStatistic(ValueError):
    """A statistic is undefined for the given data (e.g. zero variance)."""


# -- datasets ----------------------------------------------------------------


@dataclass(frozen=True)
class EvalItem:
    text: str
    rating: float
    context: str | None = None


@dataclass
class EvalDataset:
    name: str
    language: str
    items: list[EvalItem]
    kind: str = "familiarity"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if not self.items:
            raise ValueError(f"dataset {self.name!r} is empty")
        for it in self.items:
            if not math.isfinite(it.rating):
                raise ValueError(f"non-finite rating for {it.text!r}")
            if self.kind == "complexity" and not 0.0 <= it.rating <= 1.0:
                raise ValueError(f"complexity rating {it.rating} for {it.text!r} outside [0, 1]")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def ratings(self) -> np.ndarray:
        return np.array([it.rating for it in self.items])


def read_dataset(
    path: str | os.PathLike, name: str = "", language: str = "", kind: str = "familiarity"
) -> EvalDataset:
    """Read ``item<TAB>rating[<TAB>context]``; a non-numeric first row is a header."""
    items = []
    with open(path, encoding="utf-8", newline="") as f:
        for lineno, cols in enumerate(csv.reader(f, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
            if not cols or cols[0].startswith("#"):
                continue
            try:
                rating = float(cols[1])
            except (ValueError, IndexError):
                if lineno == 1:
                    continue
                raise ValueError(f"{path}:{lineno}: expected item<TAB>rating") from None
            items.append(EvalItem(cols[0], rating, cols[2] if len(cols) > 2 else None))
    return EvalDataset(name or os.path.splitext(os.path.basename(path))[0], language, items, kind)


def preprocess_raw_rt(
    trials: Iterable[tuple[str, float]],
    lo: float = RT_RANGE_MS[0],
    hi: float = RT_RANGE_MS[1],
    name: str = "rt",
    language: str = "",
) -> EvalDataset:
    """Mean reaction time per word over trials within ``[lo, hi]`` ms.

    Words left without trials are dropped. Means use exactly rounded sums,
    so the output does not depend on row order.
    """
    kept: dict[str, list[float]] = defaultdict(list)
    for word, rt in trials:
        rt = float(rt)
        if lo <= rt <= hi:
            kept[word].append(rt)
    items = [EvalItem(w, math.fsum(v) / len(v)) for w, v in sorted(kept.items())]
    return EvalDataset(name, language, items, "ldt")


def read_raw_rt(path: str | os.PathLike) -> list[tuple[str, float]]:
    """Rows of ``item<TAB>rt_ms<TAB>participant`` (header row allowed)."""
    out = []
    with open(path, encoding="utf-8", newline="") as f:
        for lineno, cols in enumerate(csv.reader(f, delimiter="\t", quoting=csv.QUOTE_NONE), 1):
            if not cols or cols[0].startswith("#"):
                continue
            try:
                out.append((cols[0], float(cols[1])))
            except (ValueError, IndexError):
                if lineno == 1:
                    continue
                raise ValueError(f"{path}:{lineno}: expected item<TAB>rt_ms") from None
    return out


# -- statistics --------------------------------------------------------------


def pearson(x, y) -> float:
    """Product-moment correlation of two equal-length vectors (n >= 3)."""
    x, y = check_paired(x, y, min_len=3)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = np.dot(dx, dx)
    syy = np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise UndefinedStatistic("correlation undefined: zero variance")
    r = float(np.dot(dx, dy) / math.sqrt(sxx * syy))
    return max(-1.0, min(1.0, r))


def normal_sf2(z: float) -> float:
    """Two-tailed normal p-value, 2 * (1 - Phi(|z|))."""
    return math.erfc(abs(z) / math.sqrt(2.0))


def steiger_test(r12: float, r13: float, r23: float, n: int) -> tuple[float, float]:
    """Steiger's Z for two dependent correlations sharing variable 1.

    Fisher-transforms both correlations and pools their covariance around the
    mean squared correlation (Dunn and Clark), with the pooling factor capped
    at 1. Returns ``(Z, two-tailed p)``.
    """
    r12 = check_correlation(r12, "r12")
    r13 = check_correlation(r13, "r13")
    r23 = check_correlation(r23, "r23")
    if n < 4:
        raise ValueError("steiger_test needs n >= 4")
    z1, z2 = math.atanh(r12), math.atanh(r13)
    rbar2 = (r12 * r12 + r13 * r13) / 2.0
    f = min(1.0, (1.0 - r23) / (2.0 * (1.0 - rbar2)))
    h = (1.0 - f * rbar2) / (1.0 - rbar2)
    z = (z1 - z2) * math.sqrt((n - 3) / (2.0 * (1.0 - r23) * h))
    return z, normal_sf2(z)


def stars(p: float | None) -> str:
    if p is None or p >= 0.05:
        return ""
    if p < 0.001:
        return "***"
    if p < 0.01:
        return "**"
    return "*"


# -- correlating providers with datasets ----------------------------------------


def item_values(provider: FrequencyProvider, dataset: EvalDataset) -> dict[int, float]:
    """Index of item -> provider value, for items that tokenize non-empty."""
    out = {}
    for i, it in enumerate(dataset.items):
        v = provider.value_for_item(it.text)
        if v is not None:
            out[i] = v
    return out


def correlate(provider: FrequencyProvider, dataset: EvalDataset) -> tuple[float, int, float]:
    """``(r, n, coverage)`` between provider values and ratings."""
    vals = item_values(provider, dataset)
    if len(vals) < 3:
        raise UndefinedStatistic(f"only {len(vals)} usable items in {dataset.name!r}")
    idx = sorted(vals)
    r = pearson([vals[i] for i in idx], [dataset.items[i].rating for i in idx])
    return r, len(idx), len(idx) / len(dataset)


@dataclass
class ComparisonRow:
    provider: str
    r: float
    n: int
    coverage: float
    n_common: int
    z: float | None
    p_vs_baseline: float | None
    stars: str


@dataclass
class ComparisonReport:
    dataset: str
    baseline_provider: str
    rows: list[ComparisonRow]
    notes: list[str] = field(default_factory=list)
    regression: dict[str, dict[str, float]] = field(default_factory=dict)

    def row(self, provider: str) -> ComparisonRow:
        for r in self.rows:
            if r.provider == provider:
                return r
        raise KeyError(provider)

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "baseline": self.baseline_provider,
            "rows": [vars(r) for r in self.rows],
            "regression": self.regression,
            "notes": self.notes,
        }

    def to_tsv(self) -> str:
        cols = ["provider", "r", "n", "coverage", "n_common", "z", "p", "stars"]
        lines = ["\t".join(cols)]
        for r in self.rows:
            lines.append("\t".join([
                r.provider, f"{r.r:.6f}", str(r.n), f"{r.coverage:.6f}", str(r.n_common),
                "" if r.z is None else f"{r.z:.6f}",
                "" if r.p_vs_baseline is None else f"{r.p_vs_baseline:.6g}",
                r.stars,
            ]))
        return "\n".join(lines) + "\n"


def compare_providers(
    providers: Mapping[str, FrequencyProvider], baseline: str, dataset: EvalDataset
) -> ComparisonReport:
    """Each provider's r, and Steiger's test of its difference from ``baseline``.

    The test uses the items where both the provider and the baseline have a
    value, so that all three correlations come from one sample.
    """
    if baseline not in providers:
        raise KeyError(f"baseline provider {baseline!r} not configured")
    vals = {name: item_values(p, dataset) for name, p in providers.items()}
    ratings = dataset.ratings
    base = vals[baseline]
    rows = []
    for name in providers:
        r, n, cov = correlate(providers[name], dataset)
        common = sorted(set(base) & set(vals[name]))
        z = p = None
        if name == baseline:
            z, p = 0.0, 1.0
        elif len(common) >= 4:
            b = [base[i] for i in common]
            o = [vals[name][i] for i in common]
            y = ratings[common]
            r12, r13 = pearson(y, b), pearson(y, o)
            r23 = pearson(b, o)
            if max(abs(r12), abs(r13), abs(r23)) < 1.0:
                z, p = steiger_test(r12, r13, r23, len(common))
            elif r12 == r13:
                z, p = 0.0, 1.0
        rows.append(ComparisonRow(name, r, n, cov, len(common), z, p, stars(p)))
    notes = ["significance computed over the item intersection with the baseline"]
    return ComparisonReport(dataset.name, baseline, rows, notes)


# -- lexical complexity regression ---------------------------------------------


@dataclass(frozen=True)
class RegressionModel:
    slope: float
    intercept: float
    fitted_on: str = ""

    def predict_raw(self, x) -> np.ndarray:
        return self.slope * np.asarray(x, dtype=float) + self.intercept


def ols_line(x, y) -> tuple[float, float]:
    x, y = check_paired(x, y, min_len=2)
    dx = x - x.mean()
    sxx = np.dot(dx, dx)
    if sxx == 0:
        raise UndefinedStatistic("regression needs at least two distinct predictor values")
    slope = float(np.dot(dx, y - y.mean()) / sxx)
    return slope, float(y.mean() - slope * x.mean())


def r_squared(y_true, y_pred) -> float:
    y_true, y_pred = check_paired(y_true, y_pred)
    ss_tot = np.sum((y_true - y_true.mean()) ** 2)
    if ss_tot == 0:
        raise UndefinedStatistic("R^2 undefined: ratings have zero variance")
    return float(1.0 - np.sum((y_true - y_pred) ** 2) / ss_tot)


class LexicalComplexityRegressor(RegressorMixin, BaseEstimator):
    """Single-feature least squares with predictions clipped to ``[lo, hi]``.

    ``X`` is one predictor per sample (1-D or a single column). NaN rows,
    from items without tokens, are ignored in ``fit``.
    """

    def __init__(self, clip: tuple[float, float] = (0.0, 1.0)):
        self.clip = clip

    @staticmethod
    def _column(X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise ValueError(f"expected a single feature, got {X.shape[1]}")
            X = X[:, 0]
        return X

    def fit(self, X, y):
        x = self._column(X)
        y = np.asarray(y, dtype=float)
        ok = ~np.isnan(x)
        self.coef_, self.intercept_ = ols_line(x[ok], y[ok])
        self.n_features_in_ = 1
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "coef_")
        x = check_vector(self._column(X), "X")
        return np.clip(self.coef_ * x + self.intercept_, *self.clip)


def _paired(provider: FrequencyProvider, dataset: EvalDataset) -> tuple[np.ndarray, np.ndarray]:
    vals = item_values(provider, dataset)
    idx = sorted(vals)
    return np.array([vals[i] for i in idx]), dataset.ratings[idx]


def fit_lcp(trial: EvalDataset, provider: FrequencyProvider) -> RegressionModel:
    """Least-squares line of rating on provider value over the trial items."""
    x, y = _paired(provider, trial)
    slope, intercept = ols_line(x, y)
    return RegressionModel(slope, intercept, trial.name)


def predict_and_score(
    model: RegressionModel, test: EvalDataset, provider: FrequencyProvider
) -> tuple[float, float, np.ndarray]:
    """``(R^2, r, predictions)`` with predictions clipped to [0, 1]."""
    x, y = _paired(provider, test)
    pred = np.clip(model.predict_raw(x), 0.0, 1.0)
    r2 = r_squared(y, pred)
    try:
        r = pearson(pred, y)
    except UndefinedStatistic:
        r = float("nan")  # every prediction clipped to the same bound
    return r2, r, pred
