"""Linear-regression primitives on centered numeric columns.

Every fit here is intercept-free: inputs are expected to be centered (or
standardized), and :func:`fit_ols` / :func:`fit_2sls` refuse columns whose
sample mean is not zero. Least squares is solved through a QR factorization
of the design matrix; a design whose condition number exceeds ``1e10`` is
rejected as collinear.

Standardization uses the ``n - 1`` divisor. Using ``n`` instead would change
every standardized value by the factor ``sqrt(n / (n - 1))``, an ``O(1/n)``
effect that does not change any probability limit.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CollinearError,
    NotCenteredError,
    RankDeficientError,
    WeakDenominatorError,
    ZeroVarianceError,
)

__all__ = [
    "RegressionFit",
    "TslsFit",
    "center",
    "design_matrix",
    "first_stage_f",
    "fit_2sls",
    "fit_ols",
    "partial_r2",
    "r_squared",
    "residual_sd",
    "residualize",
    "standardize",
]

CONDITION_LIMIT = 1e10
F_CAP = 1e15
WEAK_F = 10.0
_CENTER_TOL = 1e-8


def standardize(values) -> np.ndarray:
    """Return ``values`` shifted to mean 0 and scaled to sample variance 1.

    Raises
    ------
    ZeroVarianceError
        If the sample variance is below ``1e-12``.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a 1-D column, got shape {x.shape}")
    if x.size < 3:
        raise ValueError(f"need at least 3 observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("column contains non-finite values")
    centered = x - x.mean()
    var = centered @ centered / (x.size - 1)
    if var < 1e-12:
        raise ZeroVarianceError(f"column is constant (sample variance {var:.3g})")
    return centered / np.sqrt(var)


def center(values) -> np.ndarray:
    x = np.asarray(values, dtype=np.float64)
    return x - x.mean(axis=0)


def design_matrix(columns, n: int | None = None) -> np.ndarray:
    """Stack ``columns`` into an ``(n, k)`` float array.

    Accepts a 2-D array, a single 1-D array, or a sequence of 1-D arrays
    (possibly empty, in which case ``n`` must be given).
    """
    if isinstance(columns, np.ndarray):
        mat = columns.astype(np.float64, copy=False)
        if mat.ndim == 1:
            mat = mat[:, None]
    else:
        cols = [np.asarray(c, dtype=np.float64) for c in columns]
        if not cols:
            if n is None:
                raise ValueError("empty design needs an explicit row count")
            return np.empty((n, 0))
        mat = np.column_stack(cols)
    if n is not None and mat.shape[0] != n:
        raise ValueError(f"column length {mat.shape[0]} does not match {n}")
    return mat


def _check_centered(mat: np.ndarray, what: str) -> None:
    if mat.size == 0:
        return
    scale = np.maximum(np.abs(mat).max(axis=0), 1.0)
    means = np.abs(mat.mean(axis=0))
    bad = np.flatnonzero(means > _CENTER_TOL * scale)
    if bad.size:
        raise NotCenteredError(
            f"{what} column(s) {bad.tolist()} are not centered "
            f"(|mean| up to {means[bad].max():.3g}); fits have no intercept"
        )


def _qr(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q, r = np.linalg.qr(mat, mode="reduced")
    sv = np.linalg.svd(r, compute_uv=False)
    if sv[-1] <= sv[0] / CONDITION_LIMIT:
        cond = np.inf if sv[-1] == 0 else sv[0] / sv[-1]
        raise CollinearError(f"design is numerically singular (condition number {cond:.3g})")
    return q, r


def _lstsq(y: np.ndarray, mat: np.ndarray) -> np.ndarray:
    q, r = _qr(mat)
    return np.linalg.solve(r, q.T @ y)


def residualize(target, Z=()) -> np.ndarray:
    """Residual of ``target`` after least-squares projection on the columns of ``Z``.

    With an empty ``Z`` the target is returned unchanged (as a float copy).
    """
    y = np.asarray(target, dtype=np.float64)
    mat = design_matrix(Z, n=y.shape[0])
    if mat.shape[1] == 0:
        return y.copy()
    q, _ = _qr(mat)
    return y - q @ (q.T @ y)


def residual_sd(target, Z=()) -> float:
    """Standard deviation of ``residualize(target, Z)`` with the ``n - 1`` divisor.

    For a standardized target this equals ``sqrt(1 - R^2)``.
    """
    r = residualize(target, Z)
    return float(np.sqrt(r @ r / (r.shape[0] - 1)))


@dataclass(frozen=True)
class RegressionFit:
    coefficients: np.ndarray
    residuals: np.ndarray
    r_squared: float
    n: int
    regressor_names: tuple[str, ...] = ()

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.regressor_names.index(name)])


def fit_ols(y, X, names: Sequence[str] | None = None) -> RegressionFit:
    """Intercept-free least squares of ``y`` on the columns of ``X``."""
    yv = np.asarray(y, dtype=np.float64)
    mat = design_matrix(X, n=yv.shape[0])
    _check_centered(yv[:, None], "outcome")
    _check_centered(mat, "regressor")
    if names is None:
        names = tuple(f"x{i}" for i in range(mat.shape[1]))
    names = tuple(names)
    if len(names) != mat.shape[1]:
        raise ValueError("one name per regressor is required")
    sst = float(yv @ yv)
    if sst <= 0.0:
        raise ZeroVarianceError("outcome is constant")
    if mat.shape[1] == 0:
        return RegressionFit(np.empty(0), yv.copy(), 0.0, yv.shape[0], names)
    beta = _lstsq(yv, mat)
    resid = yv - mat @ beta
    r2 = 1.0 - float(resid @ resid) / sst
    return RegressionFit(beta, resid, r2, yv.shape[0], names)


def r_squared(y, X=()) -> float:
    """Uncentered R^2 of ``y`` on ``X`` (equal to the usual R^2 for centered data)."""
    yv = np.asarray(y, dtype=np.float64)
    sst = float(yv @ yv)
    if sst <= 0.0:
        raise ZeroVarianceError("outcome is constant")
    r = residualize(yv, X)
    return float(min(max(1.0 - (r @ r) / sst, 0.0), 1.0))


def partial_r2(y, added, given=()) -> float:
    """Share of the variance of ``y`` left after ``given`` that ``added`` explains.

    Computed through residualization, which equals
    ``(R2_full - R2_reduced) / (1 - R2_reduced)``. Added columns that are
    exact linear combinations of ``given`` contribute nothing; if all of them
    do, the result is 0.
    """
    yv = np.asarray(y, dtype=np.float64)
    n = yv.shape[0]
    add = design_matrix(added, n=n)
    cond = design_matrix(given, n=n)
    ry = residualize(yv, cond)
    ra = np.column_stack([residualize(add[:, j], cond) for j in range(add.shape[1])]) if add.shape[1] else add
    sst = float(ry @ ry)
    if sst <= 1e-24 * max(float(yv @ yv), 1e-300):
        return 0.0
    norms = np.einsum("ij,ij->j", ra, ra)
    keep = norms > 1e-20 * np.maximum(np.einsum("ij,ij->j", add, add), 1e-300)
    ra = ra[:, keep]
    if ra.shape[1] == 0:
        return 0.0
    q, _ = _qr(ra)
    explained = q.T @ ry
    return float(min(max((explained @ explained) / sst, 0.0), 1.0))


def first_stage_f(endogenous, instruments, exogenous=()) -> float:
    """F statistic for joint significance of ``instruments`` in the first stage.

    Degrees of freedom count the mean removed by centering, matching a
    regression with an intercept. Capped at ``1e15``.
    """
    x = np.asarray(endogenous, dtype=np.float64)
    n = x.shape[0]
    inst = design_matrix(instruments, n=n)
    exo = design_matrix(exogenous, n=n)
    q = inst.shape[1]
    if q == 0:
        raise RankDeficientError("no instruments supplied")
    r_restricted = residualize(x, exo)
    r_full = residualize(x, np.column_stack([inst, exo]))
    ssr_r = float(r_restricted @ r_restricted)
    ssr_u = float(r_full @ r_full)
    df = n - q - exo.shape[1] - 1
    if df <= 0:
        raise ValueError("not enough observations for the first-stage F statistic")
    if ssr_u <= 1e-30 * max(ssr_r, 1e-300):
        return F_CAP
    f = ((ssr_r - ssr_u) / q) / (ssr_u / df)
    return float(min(max(f, 0.0), F_CAP))


@dataclass(frozen=True)
class TslsFit:
    coefficients: np.ndarray
    first_stage_f: tuple[float, ...]
    residuals: np.ndarray
    n: int
    regressor_names: tuple[str, ...] = ()
    wald_ratio: float | None = None
    warnings: tuple[str, ...] = field(default=())

    def coefficient(self, name: str) -> float:
        return float(self.coefficients[self.regressor_names.index(name)])


def fit_2sls(y, endogenous, instruments, exogenous=(), names: Sequence[str] | None = None) -> TslsFit:
    """Two-stage least squares without intercept.

    Each endogenous column is projected on ``instruments + exogenous``; the
    outcome is then regressed on the fitted values and ``exogenous``.
    Coefficients are ordered endogenous first, then exogenous.

    With one instrument, one endogenous column and no exogenous columns the
    fit also reports the Wald ratio ``cov(y, z) / cov(x, z)``.

    Raises
    ------
    RankDeficientError
        Fewer instruments than endogenous columns.
    WeakDenominatorError
        The instruments leave no variation in an endogenous column beyond
        the exogenous regressors.
    """
    yv = np.asarray(y, dtype=np.float64)
    n = yv.shape[0]
    endo = design_matrix(endogenous, n=n)
    inst = design_matrix(instruments, n=n)
    exo = design_matrix(exogenous, n=n)
    k_e, k_i, k_x = endo.shape[1], inst.shape[1], exo.shape[1]
    if k_e == 0:
        raise ValueError("at least one endogenous column is required")
    if k_i < k_e:
        raise RankDeficientError(f"{k_i} instrument(s) for {k_e} endogenous column(s)")
    for mat, what in ((yv[:, None], "outcome"), (endo, "endogenous"), (inst, "instrument"), (exo, "exogenous")):
        _check_centered(mat, what)
    if names is None:
        names = tuple(f"endog{i}" for i in range(k_e)) + tuple(f"exog{i}" for i in range(k_x))
    names = tuple(names)

    wald = None
    if k_e == 1 and k_i == 1 and k_x == 0:
        zx = float(inst[:, 0] @ endo[:, 0]) / n
        if abs(zx) < 1e-10:
            raise WeakDenominatorError(f"instrument is uncorrelated with the exposure (cov {zx:.3g})")
        wald = float(inst[:, 0] @ yv) / n / zx

    q_full, _ = _qr(np.column_stack([inst, exo]))
    fitted = q_full @ (q_full.T @ endo)
    # pivot: fitted exposure left after partialling out the exogenous block
    pivot = np.column_stack([residualize(fitted[:, j], exo) for j in range(k_e)])
    scale = np.einsum("ij,ij->j", endo, endo) / n
    if np.any(np.einsum("ij,ij->j", pivot, pivot) / n < 1e-10 * np.maximum(scale, 1.0)):
        raise WeakDenominatorError("instruments carry no variation in an endogenous column")
    second = np.column_stack([fitted, exo])
    try:
        beta = _lstsq(yv, second)
    except CollinearError as exc:
        raise WeakDenominatorError(str(exc)) from exc
    resid = yv - np.column_stack([endo, exo]) @ beta

    fs = tuple(first_stage_f(endo[:, j], inst, exo) for j in range(k_e))
    notes = tuple(
        f"weak instrument: first-stage F = {f:.3f} < {WEAK_F:g} for {names[j]}"
        for j, f in enumerate(fs)
        if f < WEAK_F
    )
    return TslsFit(beta, fs, resid, n, names, wald, notes)
