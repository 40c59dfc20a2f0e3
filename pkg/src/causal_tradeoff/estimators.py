"""The three competing estimators of the exposure effect.

All of them read named columns (``Y``, ``X``, ``Z`` and, when covariates are
used, ``W``; the heterogeneity variants additionally need ``XW`` and ``ZW``),
center them, and return the coefficient on ``X``.
"""

from __future__ import annotations

from collections.abc import Mapping

import numpy as np

from .regression import center, fit_2sls, fit_ols

__all__ = ["ESTIMATORS", "estimate", "estimate_all"]

ESTIMATORS = ("ols_without_z", "ols_with_z", "tsls_with_z")


def _controls(cols: Mapping[str, np.ndarray], covariates: bool, heterogeneity: bool) -> list[np.ndarray]:
    if not covariates:
        return []
    out = [center(cols["W"])]
    if heterogeneity:
        out.append(center(cols["XW"]))
    return out


def estimate(
    cols: Mapping[str, np.ndarray],
    estimator: str,
    covariates: bool = False,
    heterogeneity: bool = False,
) -> float:
    """Exposure coefficient from one estimator.

    ``ols_without_z``
        Y on X and the controls.
    ``ols_with_z``
        Y on X, Z and the controls.
    ``tsls_with_z``
        X instrumented by Z. With heterogeneity and covariates, ``XW`` is a
        second endogenous column instrumented by ``ZW``, and ``W`` is exogenous.

    Controls are ``W`` (and ``XW`` under heterogeneity) when ``covariates``.
    """
    y = center(cols["Y"])
    x = center(cols["X"])
    z = center(cols["Z"])
    if estimator == "ols_without_z":
        return float(fit_ols(y, [x] + _controls(cols, covariates, heterogeneity)).coefficients[0])
    if estimator == "ols_with_z":
        return float(fit_ols(y, [x, z] + _controls(cols, covariates, heterogeneity)).coefficients[0])
    if estimator == "tsls_with_z":
        if not covariates:
            return float(fit_2sls(y, [x], [z]).coefficients[0])
        w = center(cols["W"])
        if heterogeneity:
            fit = fit_2sls(y, [x, center(cols["XW"])], [z, center(cols["ZW"])], [w])
        else:
            fit = fit_2sls(y, [x], [z], [w])
        return float(fit.coefficients[0])
    raise ValueError(f"unknown estimator {estimator!r}; expected one of {ESTIMATORS}")


def estimate_all(cols, covariates: bool = False, heterogeneity: bool = False, estimators=ESTIMATORS) -> dict[str, float]:
    return {name: estimate(cols, name, covariates, heterogeneity) for name in estimators}
