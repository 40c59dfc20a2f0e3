"""Partial-R² sensitivity analysis: which estimator is expected to be less inconsistent.

For each violation kind the ratio of 2SLS inconsistency to OLS inconsistency
factors into three pieces:

``phi``
    computable from the observed columns,
``gamma``
    grows with the strength of unobserved confounding,
``theta``
    grows with the size of the instrument's assumption violation.

``gamma`` and ``theta`` involve the unobserved confounder ``U``. They are
*benchmarked* by substituting each observed covariate ``W_j`` for ``U`` and
keeping the largest value. A multiplier ``M`` scales the benchmarked
confounding. The *implied* confounding is the ``gamma`` that puts the ratio at
exactly 1 (ambivalence). The *required* violation is the ``theta`` that does
the same at a given ``M``.

Ratio definitions (all are 2SLS over OLS inconsistency):

exclusion restriction
    ``IR = theta * phi / (M * gamma)``, compared against OLS adjusting for Z.
independence
    ``IR = theta / (phi * M * gamma)``, compared against OLS adjusting for Z.
heterogeneity
    with ``rho = M * gamma1 * gamma2 / (phi2 * theta)``, ``IR = phi1 / (rho + psi)``
    when the confounding and heterogeneity channels push the same way and
    ``phi1 / |rho - psi|`` otherwise; compared against OLS without Z.
    ``psi`` measures how much of the exposure-by-confounder interaction
    survives adjustment for ``W`` and ``XW``. It is exactly 1 without
    covariates and is taken as 1 when benchmarking (only the oracle mode
    measures it).

Setting ``oracle=True`` computes every unobserved quantity from an exposed
``U`` column instead of benchmarks. That mode exists to check the algebra on
simulated data.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .composite import composite_w
from .data import Dataset
from .errors import DataError, DegenerateDenominatorError
from .regression import center, fit_ols, partial_r2, residual_sd, residualize, standardize
from .scenarios import Kind

__all__ = [
    "BenchmarkSet",
    "Curve",
    "SampleMoments",
    "SensitivityDecomposition",
    "SensitivityReport",
    "analyze",
    "benchmark",
    "decompose",
    "inconsistency_ratio",
    "oracle_quantities",
    "required_independence_r2",
    "sensitivity_curves",
]

DEFAULT_MULTIPLIERS = (0.5, 1.0, 1.5)
R2_CEILING = 1.0 - 1e-12
DENOMINATOR_FLOOR = 1e-10
SAME_SIGN = "same_sign"
OPPOSITE_SIGN = "opposite_sign"


# ---------------------------------------------------------------------------
# moments


class SampleMoments:
    """Partial R² and residual spreads over a fixed set of named centered columns."""

    def __init__(self, columns: Mapping[str, np.ndarray]):
        self._cols = {k: np.asarray(v, dtype=np.float64) for k, v in columns.items()}

    def __contains__(self, name: str) -> bool:
        return name in self._cols

    def _get(self, names: Sequence[str]) -> list[np.ndarray]:
        return [self._cols[n] for n in names]

    def r2(self, target: str, added: Sequence[str], given: Sequence[str] = ()) -> float:
        return partial_r2(self._cols[target], self._get(added), self._get(given))

    def res_sd(self, target: str, given: Sequence[str] = ()) -> float:
        return residual_sd(self._cols[target], self._get(given))

    def var(self, target: str) -> float:
        return self.res_sd(target) ** 2

    def res_cov(self, target: str, other: str, given: Sequence[str] = ()) -> float:
        """Covariance of ``other`` with the residual of ``target`` on ``given``."""
        r = residualize(self._cols[target], self._get(given))
        return float(r @ self._cols[other]) / (r.shape[0] - 1)


def _frame(data: Dataset, kind: Kind, oracle: bool) -> tuple[SampleMoments, list[str]]:
    """Standardize role columns and build the derived columns the kind needs."""
    roles = data.roles
    cols = {
        "Y": standardize(data[roles.outcome]),
        "X": standardize(data[roles.exposure]),
        "Z": standardize(data[roles.instrument]),
    }
    keys = []
    for j, name in enumerate(roles.covariates):
        cols[f"W[{j}]"] = standardize(data[name])
        keys.append(f"W[{j}]")
    if keys:
        cols["W"] = composite_w([cols[k] for k in keys]).column
    if oracle:
        if roles.confounder is None:
            raise DataError("oracle mode needs the confounder column (role u=...)")
        cols["U"] = standardize(data[roles.confounder])
    if kind is Kind.HETEROGENEITY:
        extra = {}
        for src in [k for k in cols if k == "W" or k.startswith("W[")] + (["U"] if oracle else []):
            extra["X" + src] = center(cols["X"] * cols[src])
            extra["Z" + src] = center(cols["Z"] * cols[src])
        cols.update(extra)
    return SampleMoments(cols), keys


# ---------------------------------------------------------------------------
# unobserved quantities


@dataclass(frozen=True)
class BenchmarkSet:
    """Values substituted for the unobserved quantities of one kind.

    ``values`` maps a quantity name (for example ``"R2_Y~U|X,W,Z"``) to its
    value. ``argmax`` records which covariate index produced the maximum
    (``None`` for quantities not taken as a maximum), and ``per_covariate``
    keeps every candidate so an analyst can override the choice.
    ``insufficient`` lists quantities whose conditioning set of other
    covariates was empty because only one covariate was available.
    ``source`` is ``"benchmark"`` or ``"oracle"``.
    """

    kind: Kind
    values: Mapping[str, float]
    argmax: Mapping[str, int | None] = field(default_factory=dict)
    per_covariate: Mapping[str, tuple[float, ...]] = field(default_factory=dict)
    insufficient: tuple[str, ...] = ()
    source: str = "benchmark"

    def __getitem__(self, key: str) -> float:
        return self.values[key]

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "values": dict(self.values),
            "argmax": dict(self.argmax),
            "per_covariate": {k: list(v) for k, v in self.per_covariate.items()},
            "insufficient_covariates": list(self.insufficient),
        }


def _max_over(values: Sequence[float]) -> tuple[float, int]:
    best = 0
    for j, v in enumerate(values):
        if v > values[best]:
            best = j
    return float(values[best]), best


class _Builder:
    def __init__(self, kind: Kind, keys: list[str]):
        self.kind = kind
        self.keys = keys
        self.values: dict[str, float] = {}
        self.argmax: dict[str, int | None] = {}
        self.per: dict[str, tuple[float, ...]] = {}
        self.insufficient: list[str] = []

    def fixed(self, name: str, value: float) -> None:
        self.values[name] = float(value)
        self.argmax[name] = None

    def maximum(self, name: str, fn, uses_others: bool = False) -> None:
        cands = tuple(float(fn(j, [k for i, k in enumerate(self.keys) if i != j])) for j in range(len(self.keys)))
        self.values[name], self.argmax[name] = _max_over(cands)
        self.per[name] = cands
        if uses_others and len(self.keys) == 1:
            self.insufficient.append(name)

    def build(self, source: str) -> BenchmarkSet:
        return BenchmarkSet(self.kind, self.values, self.argmax, self.per, tuple(self.insufficient), source)


def _benchmarks_from(m, kind: Kind, keys: list[str]) -> BenchmarkSet:
    if not keys:
        raise DataError("benchmarking needs at least one observed covariate")
    b = _Builder(kind, keys)
    wc = ["W"]
    if kind in (Kind.EXCLUSION, Kind.PERFECT_IV):
        b.fixed("R2_Y~Z|X,W,U", m.r2("Y", ["Z"], ["X", *wc]))
        b.maximum("R2_X~U", lambda j, o: m.r2("X", [keys[j]]))
        b.maximum("R2_Y~U|X,W,Z", lambda j, o: m.r2("Y", [keys[j]], ["X", *o, "Z"]), True)
        b.maximum("R2_U~X|W,Z", lambda j, o: m.r2(keys[j], ["X"], [*o, "Z"]), True)
        b.maximum("R2_Y~U|X,W", lambda j, o: m.r2("Y", [keys[j]], ["X", *o]), True)
        b.maximum("R2_Z~U|X,W", lambda j, o: m.r2("Z", [keys[j]], ["X", *o]), True)
    elif kind is Kind.INDEPENDENCE:
        b.maximum("R2_X~U|Z,W", lambda j, o: m.r2("X", [keys[j]], [*o, "Z"]), True)
        b.maximum("R2_Z~U", lambda j, o: m.r2("Z", [keys[j]]))
        b.maximum("R2_Z~U|W", lambda j, o: m.r2("Z", [keys[j]], o), True)
    else:
        xw = [f"X{k}" for k in keys]
        b.maximum("R2_X~U", lambda j, o: m.r2("X", [keys[j]]))
        b.maximum("R2_Y~U|X,W,XU,XW", lambda j, o: m.r2("Y", [keys[j]], ["X", *o, *xw]), True)
        b.maximum(
            "R2_Y~U|X,W,XW", lambda j, o: m.r2("Y", [keys[j]], ["X", *o, *[f"X{k}" for k in o]]), True
        )
        b.maximum(
            "R2_Y~XU|X,W,U,XW", lambda j, o: m.r2("Y", [f"X{keys[j]}"], ["X", *keys, *[f"X{k}" for k in o]]), True
        )
        b.maximum(
            "R2_Y~XU|X,W,XW", lambda j, o: m.r2("Y", [f"X{keys[j]}"], ["X", *o, *[f"X{k}" for k in o]]), True
        )
        b.maximum("R2_U~X|W,XW", lambda j, o: m.r2(keys[j], ["X"], [*o, *[f"X{k}" for k in o]]), True)
        b.maximum(
            "sd(XU|X,W,XW)", lambda j, o: m.res_sd(f"X{keys[j]}", ["X", *o, *[f"X{k}" for k in o]]), True
        )
        b.maximum("R2_X~ZU", lambda j, o: m.r2("X", [f"Z{keys[j]}"]))
    return b.build("benchmark")


def _oracle_from(m, kind: Kind, has_w: bool) -> BenchmarkSet:
    b = _Builder(kind, [])
    w = ["W"] if has_w else []
    xw = ["XW"] if has_w else []
    if kind in (Kind.EXCLUSION, Kind.PERFECT_IV):
        b.fixed("R2_Y~Z|X,W,U", m.r2("Y", ["Z"], ["X", *w, "U"]))
        b.fixed("R2_X~U", m.r2("X", ["U"]))
        b.fixed("R2_Y~U|X,W,Z", m.r2("Y", ["U"], ["X", *w, "Z"]))
        b.fixed("R2_U~X|W,Z", m.r2("U", ["X"], [*w, "Z"]))
        b.fixed("R2_Y~U|X,W", m.r2("Y", ["U"], ["X", *w]))
        b.fixed("R2_Z~U|X,W", m.r2("Z", ["U"], ["X", *w]))
    elif kind is Kind.INDEPENDENCE:
        b.fixed("R2_X~U|Z,W", m.r2("X", ["U"], [*w, "Z"]))
        b.fixed("R2_Z~U", m.r2("Z", ["U"]))
        b.fixed("R2_Z~U|W", m.r2("Z", ["U"], w))
    else:
        b.fixed("R2_X~U", m.r2("X", ["U"]))
        b.fixed("R2_Y~U|X,W,XU,XW", m.r2("Y", ["U"], ["X", *w, "XU", *xw]))
        b.fixed("R2_Y~U|X,W,XW", m.r2("Y", ["U"], ["X", *w, *xw]))
        b.fixed("R2_Y~XU|X,W,U,XW", m.r2("Y", ["XU"], ["X", *w, "U", *xw]))
        b.fixed("R2_Y~XU|X,W,XW", m.r2("Y", ["XU"], ["X", *w, *xw]))
        b.fixed("R2_U~X|W,XW", m.r2("U", ["X"], [*w, *xw]))
        b.fixed("sd(XU|X,W,XW)", m.res_sd("XU", ["X", *w, *xw]))
        b.fixed("R2_X~ZU", m.r2("X", ["ZU"]))
        b.fixed("Cov(X|W,XW;XU)", m.res_cov("X", "XU", [*w, *xw]))
    return b.build("oracle")


def benchmark(data: Dataset, kind: Kind | str) -> BenchmarkSet:
    """Benchmark every unobserved quantity of ``kind`` with the observed covariates."""
    kind = Kind.parse(kind)
    m, keys = _frame(data, kind, oracle=False)
    return _benchmarks_from(m, kind, keys)


def oracle_quantities(data: Dataset, kind: Kind | str) -> BenchmarkSet:
    """True values of the unobserved quantities, using the exposed confounder column."""
    kind = Kind.parse(kind)
    m, keys = _frame(data, kind, oracle=True)
    return _oracle_from(m, kind, bool(keys))


# ---------------------------------------------------------------------------
# decomposition


@dataclass(frozen=True)
class SensitivityDecomposition:
    """Observed factor, benchmarked factors and the projection statistics behind them.

    For heterogeneity ``phi``/``phi2`` are the two observed factors and
    ``gamma``/``gamma2`` the confounding and heterogeneity parts of the
    confounding factor; the multiplier only scales ``gamma``.
    """

    kind: Kind
    phi: float
    gamma: float
    theta: float
    phi2: float | None = None
    gamma2: float | None = None
    psi: float = 1.0
    projection_stats: Mapping[str, float] = field(default_factory=dict)
    r2_z_w: float | None = None
    quantities: BenchmarkSet | None = None
    notes: tuple[str, ...] = ()

    @property
    def gamma_total(self) -> float:
        """Confounding on the plotted scale (``gamma1 * gamma2`` for heterogeneity)."""
        return self.gamma * (self.gamma2 if self.gamma2 is not None else 1.0)

    def with_gamma_total(self, gamma_total: float) -> SensitivityDecomposition:
        g2 = self.gamma2 if self.gamma2 is not None else 1.0
        return replace(self, gamma=gamma_total / g2)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "phi": self.phi,
            "phi2": self.phi2,
            "gamma": self.gamma,
            "gamma2": self.gamma2,
            "theta": self.theta,
            "psi": self.psi if self.kind is Kind.HETEROGENEITY else None,
            "r2_z_w": self.r2_z_w,
            "projection_stats": dict(self.projection_stats),
            "notes": list(self.notes),
        }


def _clamp(values: Mapping[str, float], notes: list[str]) -> dict[str, float]:
    out = {}
    for k, v in values.items():
        if k.startswith("R2") and v > R2_CEILING:
            notes.append(f"{k} = {v:.17g} clamped to {R2_CEILING!r}")
            v = R2_CEILING
        out[k] = v
    return out


def _check(value: float, factor: str) -> float:
    if not math.isfinite(value) or abs(value) < DENOMINATOR_FLOOR:
        raise DegenerateDenominatorError(f"denominator factor {factor} = {value:.3g} is below {DENOMINATOR_FLOOR:g}", factor)
    return value


def _decompose_from(m, kind: Kind, q: BenchmarkSet, has_w: bool) -> SensitivityDecomposition:
    notes: list[str] = []
    v = _clamp(q.values, notes)
    w = ["W"] if has_w else []
    r2 = lambda t, a, g=(): min(m.r2(t, a, g), R2_CEILING)  # noqa: E731

    if kind in (Kind.EXCLUSION, Kind.PERFECT_IV):
        stats = {
            "1-R2_X~W+Z": 1 - r2("X", [*w, "Z"]),
            "R2_Y~Z|X,W": r2("Y", ["Z"], ["X", *w]),
            "R2_X~Z": r2("X", ["Z"]),
            "sd(Z|X,W)": m.res_sd("Z", ["X", *w]),
        }
        den = math.sqrt(1 - stats["R2_Y~Z|X,W"]) * math.sqrt(stats["R2_X~Z"]) * stats["sd(Z|X,W)"]
        phi = stats["1-R2_X~W+Z"] / _check(den, "sqrt(1-R2_Y~Z|X,W) sqrt(R2_X~Z) sd(Z|X,W)")
        gden = math.sqrt(1 - v["R2_U~X|W,Z"]) * math.sqrt(1 - v["R2_Y~U|X,W"])
        gamma = (
            math.sqrt(v["R2_X~U"])
            * math.sqrt(v["R2_Y~U|X,W,Z"])
            * math.sqrt(1 - v["R2_Z~U|X,W"])
            / _check(gden, "sqrt(1-R2_U~X|W,Z) sqrt(1-R2_Y~U|X,W)")
        )
        theta = math.sqrt(v["R2_Y~Z|X,W,U"])
        return SensitivityDecomposition(kind, phi, gamma, theta, projection_stats=stats, quantities=q, notes=tuple(notes))

    if kind is Kind.INDEPENDENCE:
        stats = {
            "R2_X~Z|W": r2("X", ["Z"], w),
            "sd(X|Z,W)": m.res_sd("X", ["Z", *w]),
            "sd(X|W)": m.res_sd("X", w),
            "sd(Z|W)": m.res_sd("Z", w),
            "R2_X~W": r2("X", w) if w else 0.0,
            "R2_Z~W": r2("Z", w) if w else 0.0,
        }
        den = (1 - stats["R2_X~W"]) * (1 - stats["R2_X~Z|W"])
        phi = (
            math.sqrt(stats["R2_X~Z|W"])
            * stats["sd(X|Z,W)"]
            * stats["sd(X|W)"]
            * stats["sd(Z|W)"]
            / _check(den, "(1-R2_X~W)(1-R2_X~Z|W)")
        )
        _check(phi, "phi")
        gamma = math.sqrt(v["R2_X~U|Z,W"])
        theta = math.sqrt(v["R2_Z~U"]) / _check(math.sqrt(1 - v["R2_Z~U|W"]), "sqrt(1-R2_Z~U|W)")
        return SensitivityDecomposition(
            kind, phi, gamma, theta, projection_stats=stats, r2_z_w=stats["R2_Z~W"], quantities=q, notes=tuple(notes)
        )

    # heterogeneity
    r2_xz = r2("X", ["Z"])
    stats = {"R2_X~Z": r2_xz, "Var(X|W,XW)": m.res_sd("X", [*w, *(["XW"] if has_w else [])]) ** 2}
    if has_w:
        r2_xzw = r2("X", ["ZW"])
        fitted_var = m.var("XW") * r2("XW", ["Z", "ZW"])
        stats.update({"R2_X~ZW": r2_xzw, "Var(fitted XW)": fitted_var})
        ratio = r2_xzw / _check(fitted_var, "Var(fitted XW)")
        num = 0.5 - ratio
        den = r2_xz + r2_xzw - 4 * r2_xz * ratio
    else:
        num, den = 0.5, r2_xz
    phi1 = abs(num / _check(den, "phi1 denominator")) * stats["Var(X|W,XW)"]
    phi2 = 2 * math.sqrt(r2_xz)
    _check(phi2, "phi2")
    gden = math.sqrt(1 - v["R2_Y~U|X,W,XW"]) * math.sqrt(1 - v["R2_U~X|W,XW"])
    gamma1 = math.sqrt(v["R2_X~U"]) * math.sqrt(v["R2_Y~U|X,W,XU,XW"]) / _check(gden, "gamma1 denominator")
    gamma2 = (
        math.sqrt(1 - v["R2_Y~XU|X,W,XW"])
        * v["sd(XU|X,W,XW)"]
        / _check(math.sqrt(v["R2_Y~XU|X,W,U,XW"]), "sqrt(R2_Y~XU|X,W,U,XW)")
    )
    theta = math.sqrt(v["R2_X~ZU"])
    psi = 1.0
    if "Cov(X|W,XW;XU)" in v and theta > 0:
        psi = abs(v["Cov(X|W,XW;XU)"]) / (phi2 * theta)
    return SensitivityDecomposition(
        kind,
        phi1,
        gamma1,
        theta,
        phi2=phi2,
        gamma2=gamma2,
        psi=psi,
        projection_stats=stats,
        quantities=q,
        notes=tuple(notes),
    )


def decompose(data: Dataset, kind: Kind | str, quantities: BenchmarkSet | None = None) -> SensitivityDecomposition:
    """Assemble ``phi``, ``gamma`` and ``theta`` for ``kind``.

    ``quantities`` defaults to :func:`benchmark` of the same data; pass the
    result of :func:`oracle_quantities` to use the exposed confounder.

    Raises
    ------
    DegenerateDenominatorError
        A denominator factor is below ``1e-10``; ``factor`` names it.
    """
    kind = Kind.parse(kind)
    oracle = quantities is not None and quantities.source == "oracle"
    m, keys = _frame(data, kind, oracle=oracle)
    if quantities is None:
        quantities = _benchmarks_from(m, kind, keys)
    if quantities.kind is not kind:
        raise ValueError(f"quantities were computed for {quantities.kind.value}, not {kind.value}")
    return _decompose_from(m, kind, quantities, bool(keys))


# ---------------------------------------------------------------------------
# ratios


def _rho(dec: SensitivityDecomposition, multiplier: float, theta: float | None = None) -> float:
    theta = dec.theta if theta is None else theta
    return multiplier * dec.gamma_total / _check(dec.phi2 * theta, "phi2 * theta")


def heterogeneity_branch(dec: SensitivityDecomposition, multiplier: float, sign_case: str) -> str:
    """Which of the three ratio forms applies: ``same``, ``opposite_main`` or ``opposite_interaction``."""
    if sign_case == SAME_SIGN:
        return "same"
    if sign_case != OPPOSITE_SIGN:
        raise ValueError(f"sign_case must be {SAME_SIGN!r} or {OPPOSITE_SIGN!r}")
    return "opposite_main" if _rho(dec, multiplier) > dec.psi else "opposite_interaction"


def inconsistency_ratio(
    dec: SensitivityDecomposition,
    multiplier: float = 1.0,
    sign_case: str = SAME_SIGN,
    theta: float | None = None,
) -> float:
    """2SLS-to-OLS inconsistency ratio at confounding ``multiplier * gamma``.

    ``theta`` overrides the benchmarked violation; ``sign_case`` only matters
    for heterogeneity.
    """
    if multiplier <= 0:
        raise ValueError("multiplier must be positive")
    theta = dec.theta if theta is None else theta
    if dec.kind in (Kind.EXCLUSION, Kind.PERFECT_IV):
        return theta * dec.phi / _check(multiplier * dec.gamma, "M * gamma")
    if dec.kind is Kind.INDEPENDENCE:
        return theta / _check(dec.phi * multiplier * dec.gamma, "phi * M * gamma")
    if theta == 0:
        return 0.0
    rho = _rho(dec, multiplier, theta)
    if sign_case == SAME_SIGN:
        return dec.phi / (rho + dec.psi)
    if sign_case != OPPOSITE_SIGN:
        raise ValueError(f"sign_case must be {SAME_SIGN!r} or {OPPOSITE_SIGN!r}")
    return dec.phi / _check(abs(rho - dec.psi), "|rho - psi|")


def implied_gamma(dec: SensitivityDecomposition, sign_case: str = SAME_SIGN) -> float | None:
    """Confounding (on the plotted scale) that makes the ratio exactly 1 at the benchmarked violation.

    ``None`` when no such level exists for the heterogeneity sign case.
    """
    if dec.kind in (Kind.EXCLUSION, Kind.PERFECT_IV):
        return dec.theta * dec.phi
    if dec.kind is Kind.INDEPENDENCE:
        return dec.theta / dec.phi
    base = dec.phi2 * dec.theta
    if sign_case == SAME_SIGN:
        return (dec.phi - dec.psi) * base if dec.phi > dec.psi else None
    # the main-effect-dominant solution always exists; the other only when phi1 < psi
    return (dec.phi + dec.psi) * base


def required_violation(dec: SensitivityDecomposition, multiplier: float, sign_case: str = SAME_SIGN) -> float | None:
    """Violation factor ``theta`` that returns the ratio to 1 at ``multiplier``."""
    g = multiplier * dec.gamma_total
    if dec.kind in (Kind.EXCLUSION, Kind.PERFECT_IV):
        return g / _check(dec.phi, "phi")
    if dec.kind is Kind.INDEPENDENCE:
        return dec.phi * g
    if sign_case == SAME_SIGN:
        return g / (dec.phi2 * (dec.phi - dec.psi)) if dec.phi > dec.psi else None
    if dec.theta > 0 and heterogeneity_branch(dec, multiplier, sign_case) == "opposite_interaction":
        return g / (dec.phi2 * (dec.psi - dec.phi)) if dec.phi < dec.psi else None
    return g / (dec.phi2 * (dec.phi + dec.psi))


def required_independence_r2(theta: float, r2_z_w: float) -> float:
    """``R2_Z~U`` matching a violation factor ``theta`` when U is unrelated to W.

    Inverts ``theta^2 = R / (1 - R / (1 - R2_Z~W))``.
    """
    t2 = theta * theta
    return t2 / (1 + t2 / (1 - r2_z_w))


def violation_to_r2(dec: SensitivityDecomposition, theta: float | None) -> float | None:
    """Express a violation factor on the R² scale used in legends."""
    if theta is None:
        return None
    if dec.kind is Kind.INDEPENDENCE:
        return required_independence_r2(theta, dec.r2_z_w or 0.0)
    return theta * theta


def benchmarked_violation_r2(dec: SensitivityDecomposition) -> float:
    if dec.kind is Kind.INDEPENDENCE:
        return dec.quantities["R2_Z~U"] if dec.quantities else violation_to_r2(dec, dec.theta)
    return dec.theta * dec.theta


# ---------------------------------------------------------------------------
# curves and reports


_LEGEND = {
    Kind.EXCLUSION: ("Benchmarked ER Violation", "ER Violation Required"),
    Kind.PERFECT_IV: ("Benchmarked ER Violation", "ER Violation Required"),
    Kind.INDEPENDENCE: ("U-Z B", "U-Z Req."),
    Kind.HETEROGENEITY: ("ZU B", "ZU Req."),
}


@dataclass(frozen=True)
class Curve:
    """One plotted line: ``gamma`` is constant and ``ir`` varies with the violation."""

    label: str
    multiplier: float | None
    gamma: float
    violation: tuple[float, ...]
    ir: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "multiplier": self.multiplier,
            "gamma": self.gamma,
            "violation": list(self.violation),
            "ir": list(self.ir),
        }


@dataclass(frozen=True)
class SensitivityReport:
    kind: Kind
    decomposition: SensitivityDecomposition
    multipliers: tuple[float, ...]
    ir_per_multiplier: tuple[float, ...]
    required_violation_per_multiplier: tuple[float | None, ...]
    benchmarked_violation: float
    gamma_implied: float | None
    sign_case: str | None = None
    branches: tuple[str, ...] = ()
    branch_rho: float | None = None
    curves: tuple[Curve, ...] = ()
    legend: tuple[str, ...] = ()
    true_ir: float | None = None

    def to_dict(self) -> dict:
        """JSON-ready mapping; key order is part of the output format."""
        q = self.decomposition.quantities
        return {
            "kind": self.kind.value,
            "sign_case": self.sign_case,
            "source": q.source if q else None,
            "multipliers": list(self.multipliers),
            "ir_per_multiplier": list(self.ir_per_multiplier),
            "required_violation_per_multiplier": list(self.required_violation_per_multiplier),
            "benchmarked_violation": self.benchmarked_violation,
            "gamma_benchmark": self.decomposition.gamma_total,
            "gamma_implied": self.gamma_implied,
            "branches": list(self.branches),
            "branch_rho": self.branch_rho,
            "true_ir": self.true_ir,
            "decomposition": self.decomposition.to_dict(),
            "quantities": q.to_dict() if q else None,
            "legend": list(self.legend),
            "curves": [c.to_dict() for c in self.curves],
        }


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.3f}"


def sensitivity_curves(
    dec: SensitivityDecomposition,
    multipliers: Sequence[float] = DEFAULT_MULTIPLIERS,
    sign_case: str | None = None,
    points: int = 101,
    true_ir: float | None = None,
) -> SensitivityReport:
    """Ratios, required violations and plot lines for each multiplier.

    Each line holds confounding fixed at ``M * gamma`` and sweeps the
    violation factor from 0 to twice the largest of the benchmarked and
    required violations. The anchor line sits at the implied confounding.
    """
    mults = tuple(float(m) for m in multipliers)
    if not mults or any(m <= 0 for m in mults):
        raise ValueError("multipliers must be positive")
    if dec.kind is Kind.HETEROGENEITY:
        sign_case = sign_case or SAME_SIGN
    else:
        sign_case = None
    case = sign_case or SAME_SIGN

    irs = tuple(inconsistency_ratio(dec, m, case) for m in mults)
    req_theta = [required_violation(dec, m, case) for m in mults]
    req = tuple(violation_to_r2(dec, t) for t in req_theta)
    g_imp = implied_gamma(dec, case)
    b_viol = benchmarked_violation_r2(dec)

    top = max([dec.theta] + [t for t in req_theta if t is not None])
    grid = np.linspace(0.0, 2.0 * top if top > 0 else 1.0, points)

    def line(label, m, gamma):
        d = dec.with_gamma_total(gamma) if gamma > 0 else None
        ir = tuple(
            float(inconsistency_ratio(d, 1.0, case, theta=float(t))) if d is not None else math.inf for t in grid
        )
        return Curve(label, m, gamma, tuple(float(t) for t in grid), ir)

    curves = [line(f"M = {m:g}", m, m * dec.gamma_total) for m in mults]
    if g_imp is not None and g_imp > 0:
        curves.append(line("anchor", None, g_imp))

    b_label, r_label = _LEGEND[dec.kind]
    legend = tuple(
        f"M = {m:g}: IR {ir:.3f}; {b_label} {b_viol:.3f}; {r_label} {_fmt(r)}" for m, ir, r in zip(mults, irs, req)
    )
    het_ok = dec.kind is Kind.HETEROGENEITY and dec.theta > 0
    branches = tuple(heterogeneity_branch(dec, m, case) for m in mults) if het_ok else ()
    rho = _rho(dec, 1.0) if het_ok else None
    return SensitivityReport(
        dec.kind, dec, mults, irs, req, b_viol, g_imp, sign_case, branches, rho, tuple(curves), legend, true_ir
    )


def oracle_sign_case(data: Dataset) -> str:
    """Heterogeneity sign case read off regressions that include the exposed confounder.

    Compares the sign of the confounding channel (U on X times U on Y) with
    that of the interaction channel (XU on Y times the covariance of XU with
    the adjusted exposure).
    """
    m, keys = _frame(data, Kind.HETEROGENEITY, oracle=True)
    col = m._cols
    w = ["W", "XW"] if keys else []
    first = fit_ols(col["X"], [col["Z"], col["U"], col["ZU"], *[col[k] for k in (["W", "ZW"] if keys else [])]])
    second = fit_ols(col["Y"], [col["X"], col["U"], col["XU"], *[col[k] for k in w]])
    main = first.coefficients[1] * second.coefficients[1]
    inter = second.coefficients[2] * m.res_cov("X", "XU", w)
    return SAME_SIGN if np.sign(main) == np.sign(inter) else OPPOSITE_SIGN


def analyze(
    data: Dataset,
    kind: Kind | str,
    multipliers: Sequence[float] = DEFAULT_MULTIPLIERS,
    oracle: bool = False,
    true_ir: float | None = None,
) -> list[SensitivityReport]:
    """Benchmark, decompose and build reports for one kind.

    Heterogeneity yields one report per sign case unless both agree to 1e-6
    at every multiplier (then only the same-sign report). In oracle mode the
    sign case is read from the data and only that report is produced.
    """
    kind = Kind.parse(kind)
    q = oracle_quantities(data, kind) if oracle else benchmark(data, kind)
    dec = decompose(data, kind, q)
    if kind is not Kind.HETEROGENEITY:
        return [sensitivity_curves(dec, multipliers, true_ir=true_ir)]
    if oracle:
        return [sensitivity_curves(dec, multipliers, oracle_sign_case(data), true_ir=true_ir)]
    same = sensitivity_curves(dec, multipliers, SAME_SIGN, true_ir=true_ir)
    try:
        opp = sensitivity_curves(dec, multipliers, OPPOSITE_SIGN, true_ir=true_ir)
    except DegenerateDenominatorError:
        return [same]
    if np.allclose(same.ir_per_multiplier, opp.ir_per_multiplier, rtol=0, atol=1e-6):
        return [same]
    return [same, opp]
