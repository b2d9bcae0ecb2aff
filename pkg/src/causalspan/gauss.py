"""Gaussian data containers and estimators.

Datasets hold an n x (p+1) sample with one designated response column.
Covariance matrices double as population objects through the n=None
sentinel, so every estimator here can run either on data or on an exact
covariance.  Conventions: sample covariance and correlation use the n-1
denominator; the per-vertex DAG maximum likelihood fit uses 1/n residual
variances, as maximum likelihood requires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np
from scipy.stats import norm

from .errors import (
    DegenerateDataError,
    InsufficientSampleError,
    NumericalRankError,
)
from .graphs import PDGraph

# Relative condition-number threshold above which linear systems are
# treated as rank deficient.
CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class Dataset:
    """An n x (p+1) numeric sample with named columns and a response.

    `standardized` records that the covariate columns have been rescaled to
    mean zero and unit sample variance (the response is centered but keeps
    its scale, so effect estimates stay in response units).
    """

    values: np.ndarray
    names: tuple[str, ...]
    response: int
    standardized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("values must be a 2-d array")
        if v.shape[0] < 2:
            raise ValueError("need at least two rows")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        if len(self.names) != v.shape[1]:
            raise ValueError("names length must match column count")
        if len(set(self.names)) != len(self.names):
            raise ValueError("column names must be unique")
        if not (0 <= self.response < v.shape[1]):
            raise ValueError("response index out of range")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "names", tuple(self.names))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    @property
    def covariates(self) -> tuple[int, ...]:
        return tuple(i for i in range(self.n_columns) if i != self.response)

    def standardize(self) -> "Dataset":
        """Center every column; rescale covariates to unit sample variance.

        Raises DegenerateDataError naming the first constant covariate."""
        v = self.values.copy()
        v -= v.mean(axis=0)
        for i in self.covariates:
            sd = v[:, i].std(ddof=1)
            if sd <= 0 or not np.isfinite(sd):
                raise DegenerateDataError(
                    f"column '{self.names[i]}' is constant; cannot standardize"
                )
            v[:, i] /= sd
        return replace(self, values=v, standardized=True)

    def resample_rows(self, indices: np.ndarray) -> "Dataset":
        return replace(self, values=self.values[indices, :], standardized=False)


@dataclass(frozen=True)
class CovMatrix:
    """A covariance (or correlation) matrix, optionally with a sample size.

    n=None marks a population matrix: tests against it use the exact-zero
    rule instead of a finite-sample test.
    """

    values: np.ndarray
    n: int | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("covariance must be square")
        if not np.all(np.isfinite(v)):
            raise ValueError("covariance must be finite")
        scale = max(1.0, float(np.abs(v).max()))
        if not np.allclose(v, v.T, atol=1e-8 * scale):
            raise ValueError("covariance must be symmetric")
        w = np.linalg.eigvalsh((v + v.T) / 2.0)
        if w.min() < -1e-8 * scale:
            raise ValueError("covariance must be positive semidefinite")
        if self.n is not None and self.n < 2:
            raise ValueError("sample size must be at least 2")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def is_population(self) -> bool:
        return self.n is None

    @property
    def n_columns(self) -> int:
        return self.values.shape[1]

    def correlation(self) -> "CovMatrix":
        d = np.sqrt(np.diag(self.values))
        if np.any(d <= 0):
            bad = int(np.nonzero(d <= 0)[0][0])
            raise DegenerateDataError(f"column {bad} has zero variance")
        c = self.values / np.outer(d, d)
        np.fill_diagonal(c, 1.0)
        return CovMatrix((c + c.T) / 2.0, n=self.n)


@dataclass(frozen=True)
class CITestConfig:
    """Settings for the conditional-independence test."""

    alpha: float = 0.01

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError("alpha must lie strictly between 0 and 1")


def sample_covariance(d: Dataset, ml: bool = False) -> CovMatrix:
    """Sample covariance with the n-1 denominator (1/n when ml=True)."""
    v = d.values - d.values.mean(axis=0)
    denom = d.n if ml else d.n - 1
    return CovMatrix(v.T @ v / denom, n=d.n)


def correlation_matrix(d: Dataset) -> CovMatrix:
    """Sample correlation matrix; constant columns raise
    DegenerateDataError naming the column."""
    sd = d.values.std(axis=0, ddof=1)
    bad = np.nonzero(~(sd > 0))[0]
    if bad.size:
        raise DegenerateDataError(
            f"column '{d.names[int(bad[0])]}' is constant; correlations undefined"
        )
    return sample_covariance(d).correlation()


def _solve_checked(a: np.ndarray, b: np.ndarray, what: str) -> np.ndarray:
    if a.size and np.linalg.cond(a) > CONDITION_LIMIT:
        raise NumericalRankError(f"{what}: matrix is singular or ill-conditioned")
    if a.size == 0:
        return np.zeros_like(b)
    return np.linalg.solve(a, b)


def partial_correlation(c: CovMatrix, i: int, j: int, s: tuple[int, ...] = ()) -> float:
    """Correlation of columns i and j after removing the linear effect of
    the columns in s, computed from the precision of the (i, j, s)
    correlation submatrix."""
    s = tuple(int(x) for x in s)
    if len({i, j, *s}) != len(s) + 2:
        raise ValueError("i, j and s must be distinct")
    idx = [i, j, *s]
    sub = c.correlation().values[np.ix_(idx, idx)]
    if np.linalg.cond(sub) > CONDITION_LIMIT:
        raise NumericalRankError(
            f"correlation submatrix for ({i}, {j} | {s}) is singular"
        )
    om = np.linalg.inv(sub)
    r = -om[0, 1] / math.sqrt(om[0, 0] * om[1, 1])
    return float(min(1.0, max(-1.0, r)))


def fisher_z_dependent(rho: float, n: int, s_size: int, alpha: float) -> bool:
    """Decide dependence from a sample partial correlation.

    Uses the z-transform z = atanh(rho); dependent when
    |z| * sqrt(n - s_size - 3) exceeds the 1 - alpha/2 normal quantile.
    |rho| = 1 is dependent outright.  Requires n - s_size - 3 >= 1.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly between 0 and 1")
    if n - s_size - 3 < 1:
        raise InsufficientSampleError(
            f"need n - |S| - 3 >= 1, got n={n} with |S|={s_size}"
        )
    if abs(rho) >= 1.0:
        return True
    stat = abs(math.atanh(rho)) * math.sqrt(n - s_size - 3)
    return bool(stat > norm.ppf(1.0 - alpha / 2.0))


def beta_given_s(
    source: Dataset | CovMatrix, i: int, s: tuple[int, ...], y: int
) -> float:
    """Coefficient of column i in the least-squares regression of y on
    {i} union s (with intercept).  Returns 0.0 when y is in s: a response
    that appears among the regressors indicates y is upstream of i, so the
    effect of i on y is zero.
    """
    s = tuple(int(x) for x in s)
    if i == y:
        raise ValueError("covariate and response must differ")
    if i in s:
        raise ValueError("covariate must not appear in the adjustment set")
    if y in s:
        return 0.0
    if isinstance(source, Dataset):
        cols = [i, *sorted(s)]
        x = np.column_stack(
            [np.ones(source.n), source.values[:, cols]]
        )
        yv = source.values[:, y]
        if np.linalg.matrix_rank(x) < x.shape[1]:
            raise NumericalRankError(
                f"regression design for ({i} | {s}) is rank deficient"
            )
        coef, *_ = np.linalg.lstsq(x, yv, rcond=None)
        return float(coef[1])
    idx = [i, *sorted(s)]
    a = source.values[np.ix_(idx, idx)]
    b = source.values[idx, y]
    coef = _solve_checked(a, b, f"regression ({i} | {s})")
    return float(coef[0])


class DagFit(NamedTuple):
    """Maximum likelihood Gaussian fit of a DAG model."""

    covariance: np.ndarray
    mean: np.ndarray
    loglik: float


def dag_mle(d: Dataset, dag: PDGraph) -> DagFit:
    """Fit a linear Gaussian model with the given DAG structure by
    per-vertex least squares on the parents, and return the implied
    covariance, the mean vector, and the exact log-likelihood at the fit.
    """
    if not dag.is_dag():
        raise ValueError("dag_mle requires a fully directed acyclic graph")
    if dag.n != d.n_columns:
        raise ValueError("graph size must match dataset columns")
    n, p1 = d.values.shape
    v = d.values - d.values.mean(axis=0)
    b = np.zeros((p1, p1))
    resid_var = np.zeros(p1)
    loglik = 0.0
    for i in range(p1):
        pa = sorted(dag.parents(i))
        if pa:
            x = v[:, pa]
            g = x.T @ x
            coef = _solve_checked(g, x.T @ v[:, i], f"vertex {i} regression")
            b[i, pa] = coef
            resid = v[:, i] - x @ coef
        else:
            resid = v[:, i]
        s2 = float(resid @ resid) / n
        if s2 <= 0:
            raise NumericalRankError(f"vertex {i} has zero residual variance")
        resid_var[i] = s2
        loglik += -0.5 * n * (math.log(2.0 * math.pi * s2) + 1.0)
    ib = np.eye(p1) - b
    inv_ib = np.linalg.inv(ib)
    sigma = inv_ib @ np.diag(resid_var) @ inv_ib.T
    return DagFit((sigma + sigma.T) / 2.0, d.values.mean(axis=0), loglik)


def _trek_nonzero_count(dag: PDGraph) -> int:
    """Count the structurally nonzero entries on or above the diagonal of
    the covariance a DAG model implies: entry (i, j) is nonzero exactly
    when i and j share an ancestor (each vertex is its own ancestor)."""
    n = dag.n
    anc = [set([i]) for i in range(n)]
    for i in (dag.topological_order() or []):
        for p in dag.parents(i):
            anc[i] |= anc[p]
    count = 0
    for i in range(n):
        for j in range(i, n):
            if anc[i] & anc[j]:
                count += 1
    return count


def bic_score(d: Dataset, dag: PDGraph) -> float:
    """BIC of the DAG model: -2 log-likelihood plus log(n) times the
    parameter count, which is the number of structurally nonzero
    upper-triangle (diagonal included) covariance entries plus one mean
    per column.  Structural zeros come from the graph, not from
    thresholding fitted values."""
    fit = dag_mle(d, dag)
    k = _trek_nonzero_count(dag) + d.n_columns
    return float(-2.0 * fit.loglik + math.log(d.n) * k)


def structural_covariance(
    weights: np.ndarray, error_variances: np.ndarray | None = None
) -> np.ndarray:
    """Exact covariance of the linear system X = W X + e where W[i, j] is
    the coefficient of X_j in the equation for X_i and e has independent
    components with the given variances (default all one)."""
    w = np.asarray(weights, dtype=float)
    p1 = w.shape[0]
    if error_variances is None:
        error_variances = np.ones(p1)
    ib = np.eye(p1) - w
    inv_ib = np.linalg.inv(ib)
    sigma = inv_ib @ np.diag(np.asarray(error_variances, dtype=float)) @ inv_ib.T
    return (sigma + sigma.T) / 2.0
