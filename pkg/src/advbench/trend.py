"""Curve fits and correlation statistics for accuracy-versus-epsilon series.

Five families are fitted, all by (weighted) linear least squares:

=============  ======================  ==================================
family         model                   regression
=============  ======================  ==================================
linear         a + b*x                 y on [1, x]
logarithmic    a + b*ln(x)             y on [1, ln x]
quadratic      a + b*x + c*x**2        y on [1, x, x**2]
exponential    a * exp(b*x)            ln y on [1, x], row weights y
power          a * x**b                ln y on [1, ln x]
=============  ======================  ==================================

Weighting the exponential log-regression by ``y`` makes it approximate
least squares in the original scale (d ln y = dy / y). The reported r² is
``1 - SSE/SST``; it is measured on ``y`` for every family except power, whose
fit is judged on ``ln y``. For the unweighted linear-in-parameters families
this equals the squared Pearson correlation between observed and fitted values.

Fits work on accuracy fractions. :func:`constant_fit` keeps the caller's
units so that percentages stay percentages.
"""

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import (
    AlignmentError,
    DomainError,
    FamilyError,
    FitError,
    NoIntersectionError,
    RangeError,
)

FAMILIES = ("linear", "exponential", "logarithmic", "quadratic", "power")
N_COEFFICIENTS = {"linear": 2, "exponential": 2, "logarithmic": 2, "quadratic": 3, "power": 2}


@dataclass(frozen=True)
class AccuracySeries:
    model_id: str
    epsilons: tuple
    accuracies: tuple
    unit: str = "fraction"  # or "percent"

    def __post_init__(self):
        eps = np.asarray(self.epsilons, dtype=float)
        acc = np.asarray(self.accuracies, dtype=float)
        object.__setattr__(self, "epsilons", tuple(eps.tolist()))
        object.__setattr__(self, "accuracies", tuple(acc.tolist()))
        if eps.shape != acc.shape or eps.ndim != 1:
            raise AlignmentError(f"{self.model_id}: epsilon/accuracy lengths differ")
        if len(eps) < 2:
            raise FitError(f"{self.model_id}: a series needs at least 2 points, got {len(eps)}")
        if np.any(eps <= 0) or np.any(np.diff(eps) <= 0):
            raise RangeError(f"{self.model_id}: epsilons must be positive and strictly increasing")
        top = {"fraction": 1.0, "percent": 100.0}.get(self.unit)
        if top is None:
            raise RangeError(f"unknown unit {self.unit!r}")
        if np.any(acc < 0) or np.any(acc > top):
            raise RangeError(f"{self.model_id}: accuracies outside [0, {top:g}]")

    @property
    def x(self):
        return np.asarray(self.epsilons)

    @property
    def fractions(self):
        y = np.asarray(self.accuracies)
        return y / 100.0 if self.unit == "percent" else y

    def __len__(self):
        return len(self.epsilons)


@dataclass(frozen=True)
class FitResult:
    family: str
    coefficients: tuple
    r2: float
    eps_max: float
    n_points: int

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        c = self.coefficients
        if self.family == "linear":
            return c[0] + c[1] * x
        if self.family == "logarithmic":
            return c[0] + c[1] * np.log(x)
        if self.family == "quadratic":
            return c[0] + c[1] * x + c[2] * x * x
        if self.family == "exponential":
            return c[0] * np.exp(c[1] * x)
        return c[0] * np.power(x, c[1])

    def equation(self, digits=3):
        def num(v):
            return f"{v:.{digits}g}"

        def term(v, suffix):
            sign = "-" if v < 0 else "+"
            return f" {sign} {num(abs(v))}{suffix}"

        c = self.coefficients
        if self.family == "linear":
            return num(c[0]) + term(c[1], "x")
        if self.family == "logarithmic":
            return num(c[0]) + term(c[1], " ln x")
        if self.family == "quadratic":
            return num(c[0]) + term(c[1], "x") + term(c[2], "x^2")
        if self.family == "exponential":
            return f"{num(c[0])} e^({num(c[1])}x)"
        return f"{num(c[0])} x^({num(c[1])})"

    def to_dict(self):
        return {
            "family": self.family,
            "coefficients": list(self.coefficients),
            "r2": self.r2,
            "eps_max": self.eps_max,
            "n_points": self.n_points,
            "equation": self.equation(),
        }


def _design(family, x):
    one = np.ones_like(x)
    if family in ("linear", "exponential"):
        return np.column_stack([one, x])
    if family in ("logarithmic", "power"):
        return np.column_stack([one, np.log(x)])
    return np.column_stack([one, x, x * x])


def _cod(obs, fitted):
    sse = float(np.sum((obs - fitted) ** 2))
    sst = float(np.sum((obs - obs.mean()) ** 2))
    if sst == 0.0:
        return 1.0 if sse == 0.0 else 0.0
    return min(1.0, max(0.0, 1.0 - sse / sst))


def fit(series, family, eps_max=2.0):
    """Least-squares fit of ``family`` to the points of ``series`` with eps <= eps_max."""
    if family not in N_COEFFICIENTS:
        raise FamilyError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    keep = series.x <= eps_max
    x = series.x[keep]
    y = series.fractions[keep]
    k = N_COEFFICIENTS[family]
    if len(x) < k:
        raise FitError(
            f"{series.model_id}: {len(x)} points with eps <= {eps_max:g}, {family} needs {k}"
        )
    design = _design(family, x)
    if family in ("exponential", "power"):
        if np.any(y <= 0):
            raise DomainError(f"{series.model_id}: {family} fit needs accuracies > 0")
        target = np.log(y)
    else:
        target = y
    w = np.sqrt(y) if family == "exponential" else np.ones_like(y)
    beta = np.linalg.lstsq(design * w[:, None], target * w, rcond=None)[0]
    if family in ("exponential", "power"):
        coefs = (float(np.exp(beta[0])), float(beta[1]))
    else:
        coefs = tuple(float(v) for v in beta)
    result = FitResult(family, coefs, 0.0, float(eps_max), int(len(x)))
    if family == "power":
        r2 = _cod(target, design @ beta)
    else:
        r2 = _cod(y, result.predict(x))
    return FitResult(family, coefs, r2, float(eps_max), int(len(x)))


def fit_all(series, eps_max=2.0, families=FAMILIES):
    """``{family: FitResult or FitError}`` for every family."""
    out = {}
    for family in families:
        try:
            out[family] = fit(series, family, eps_max)
        except FitError as exc:
            out[family] = exc
    return out


def constant_fit(series):
    """Mean accuracy over every point of ``series``, in the series' own units."""
    if len(series) == 0:
        raise FitError("constant fit of an empty series")
    y = np.asarray(series.accuracies)
    # shifting by the first value keeps a constant series exactly constant
    return float(y[0] + np.mean(y - y[0]))


class SlopeLine(NamedTuple):
    """The derivative ``intercept + slope*x`` of a quadratic fit."""

    intercept: float
    slope: float

    def __call__(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)


def poly_derivative(result):
    """Return ``(SlopeLine(b, 2c), 2c)`` for a quadratic ``a + b*x + c*x**2``."""
    if result.family != "quadratic":
        raise FamilyError(f"derivative needs a quadratic fit, got {result.family}")
    _, b, c = result.coefficients
    return SlopeLine(b, 2.0 * c), 2.0 * c


def integrate_slope(line, intercept):
    """Antiderivative of ``line`` through ``(0, intercept)`` as (a, b, c)."""
    return (intercept, line.intercept, line.slope / 2.0)


def intersect_slopes(l1, l2):
    """Epsilon at which two derivative lines take the same value."""
    if l1.slope == l2.slope:
        raise NoIntersectionError(f"parallel slope lines {tuple(l1)} and {tuple(l2)}")
    return (l2.intercept - l1.intercept) / (l1.slope - l2.slope)


def quadratic_minimum(result):
    if result.family != "quadratic":
        raise FamilyError(f"vertex needs a quadratic fit, got {result.family}")
    _, b, c = result.coefficients
    if c <= 0:
        raise FitError("quadratic opens downward and has no minimum")
    return -b / (2.0 * c)


@dataclass(frozen=True)
class CorrelationMatrix:
    model_ids: tuple
    values: np.ndarray
    statistic: str = "abs_r"

    def __getitem__(self, pair):
        a, b = pair
        return float(self.values[self.model_ids.index(a), self.model_ids.index(b)])

    def to_dict(self):
        return {
            "model_ids": list(self.model_ids),
            "statistic": self.statistic,
            "matrix": self.values.tolist(),
        }


def pearson(a, b):
    a = np.asarray(a, dtype=float) - np.mean(a)
    b = np.asarray(b, dtype=float) - np.mean(b)
    denom = np.sqrt(np.dot(a, a) * np.dot(b, b))
    if denom == 0.0:
        return 0.0
    return float(np.clip(np.dot(a, b) / denom, -1.0, 1.0))


def correlation_matrix(series_list, statistic="abs_r"):
    """Pairwise Pearson correlation between accuracy series on a shared grid.

    ``statistic`` is ``"abs_r"`` (magnitude of Pearson's r) or ``"r2"`` (its
    square). Both are invariant under affine rescaling of either series, so
    percentages and fractions give the same matrix.
    """
    if statistic not in ("abs_r", "r2"):
        raise ValueError(f"unknown statistic {statistic!r}")
    series_list = list(series_list)
    if not series_list:
        raise AlignmentError("no series to correlate")
    grid = series_list[0].epsilons
    for s in series_list[1:]:
        if s.epsilons != grid:
            raise AlignmentError(
                f"{s.model_id} is on a different epsilon grid than {series_list[0].model_id}"
            )
    n = len(series_list)
    values = np.eye(n)
    for i, j in itertools.combinations(range(n), 2):
        r = pearson(series_list[i].fractions, series_list[j].fractions)
        values[i, j] = values[j, i] = abs(r) if statistic == "abs_r" else r * r
    return CorrelationMatrix(tuple(s.model_id for s in series_list), values, statistic)
