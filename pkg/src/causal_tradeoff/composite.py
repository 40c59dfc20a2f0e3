"""Single-column summary of several observed covariates."""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .errors import ZeroVarianceError
from .regression import standardize

__all__ = ["CompositeW", "composite_w"]


@dataclass(frozen=True)
class CompositeW:
    column: np.ndarray
    loadings: np.ndarray
    component_list: tuple[str, ...]
    explained_variance: float


def composite_w(covariates, names: Sequence[str] | None = None) -> CompositeW:
    """First principal component of the covariates' correlation matrix.

    Each input column is standardized first. With a single covariate the
    (standardized) column is returned as is. Otherwise the scores on the
    leading eigenvector are restandardized to unit sample variance. The
    eigenvector sign is fixed so that its largest-magnitude loading is
    positive (ties go to the lowest index).

    Parameters
    ----------
    covariates : sequence of 1-D arrays, or a 2-D array with one column per covariate
    names : optional covariate names, recorded in ``component_list``

    Returns
    -------
    CompositeW
        ``explained_variance`` is the leading eigenvalue of the correlation
        matrix, i.e. the variance share times the number of covariates.
    """
    if isinstance(covariates, np.ndarray) and covariates.ndim == 2:
        cols = [covariates[:, j] for j in range(covariates.shape[1])]
    else:
        cols = list(covariates)
    if not cols:
        raise ValueError("at least one covariate is required")
    if names is None:
        names = [f"w{j + 1}" for j in range(len(cols))]
    names = tuple(names)
    std = np.column_stack([standardize(c) for c in cols])
    if std.shape[1] == 1:
        return CompositeW(std[:, 0], np.ones(1), names, 1.0)

    corr = std.T @ std / (std.shape[0] - 1)
    eigval, eigvec = np.linalg.eigh(corr)
    lead = eigvec[:, -1]
    pivot = int(np.argmax(np.abs(lead).round(12)))
    if lead[pivot] < 0:
        lead = -lead
    scores = std @ lead
    try:
        column = standardize(scores)
    except ZeroVarianceError as exc:
        raise ZeroVarianceError("leading principal component is constant") from exc
    return CompositeW(column, lead, names, float(eigval[-1]))
