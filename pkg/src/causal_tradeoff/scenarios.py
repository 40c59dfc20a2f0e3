"""Structural scenarios: specification, closed-form limits, feasibility, data generation.

Four scenario kinds are supported, each with or without an observed
confounder ``W``:

``PerfectIV``
    ``X = c1 U + c3 Z [+ c5 W] + e``, ``Y = c0 X + c2 U [+ c6 W] + e``.
``ExclusionRestriction``
    As above with an extra direct edge ``c_er Z`` into ``Y``.
``Independence``
    As ``PerfectIV`` with ``Z = c_i U [+ c7 W] + e``.
``Heterogeneity``
    ``X = a1 Z + a2 U + a3 ZU [+ a4 W + a5 ZW] + e``,
    ``Y = b1 X + b2 U + b3 XU [+ b4 W + b5 XW] + e``.

Every root variable (``U``, ``W``, and ``Z`` outside the Independence kind)
is standard normal, and each error variance is chosen so that the variable
it enters has variance exactly one.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType

import numpy as np

from .composite import composite_w
from .data import Dataset, Roles
from .errors import InfeasibleError, NotDerivedError, WeakDenominatorError

__all__ = [
    "ClosedFormResult",
    "GeneratedData",
    "Kind",
    "ScenarioSpec",
    "closed_form",
    "feasible_error_variances",
    "generate",
    "true_inconsistency_ratio",
]

VARIANCE_FLOOR = 1e-6
DEFAULT_INTERACTION_WEIGHT = 0.2


class Kind(str, Enum):
    PERFECT_IV = "PerfectIV"
    EXCLUSION = "ExclusionRestriction"
    INDEPENDENCE = "Independence"
    HETEROGENEITY = "Heterogeneity"

    @classmethod
    def parse(cls, value: str | Kind) -> Kind:
        if isinstance(value, Kind):
            return value
        key = str(value).replace("-", "").replace("_", "").replace(" ", "").lower()
        if key in _KIND_ALIASES:
            return _KIND_ALIASES[key]
        raise ValueError(f"unknown scenario kind {value!r}; expected one of {[k.value for k in cls]}")

    @property
    def violation_key(self) -> str | None:
        return {Kind.EXCLUSION: "c_er", Kind.INDEPENDENCE: "c_i", Kind.HETEROGENEITY: "a3"}.get(self)

    @property
    def strength_key(self) -> str:
        return "a1" if self is Kind.HETEROGENEITY else "c3"

    @property
    def ace_key(self) -> str:
        return "b1" if self is Kind.HETEROGENEITY else "c0"


_KIND_ALIASES = {
    "perfectiv": Kind.PERFECT_IV,
    "perfect": Kind.PERFECT_IV,
    "exclusionrestriction": Kind.EXCLUSION,
    "exclusion": Kind.EXCLUSION,
    "er": Kind.EXCLUSION,
    "independence": Kind.INDEPENDENCE,
    "ind": Kind.INDEPENDENCE,
    "heterogeneity": Kind.HETEROGENEITY,
    "het": Kind.HETEROGENEITY,
}

_BASE = ("c0", "c1", "c2", "c3")
_KEYS = {
    (Kind.PERFECT_IV, False): _BASE,
    (Kind.PERFECT_IV, True): _BASE + ("c5", "c6"),
    (Kind.EXCLUSION, False): _BASE + ("c_er",),
    (Kind.EXCLUSION, True): _BASE + ("c_er", "c5", "c6"),
    (Kind.INDEPENDENCE, False): _BASE + ("c_i",),
    (Kind.INDEPENDENCE, True): _BASE + ("c_i", "c5", "c6", "c7"),
    (Kind.HETEROGENEITY, False): ("a1", "a2", "a3", "b1", "b2", "b3"),
    (Kind.HETEROGENEITY, True): ("a1", "a2", "a3", "a4", "a5", "b1", "b2", "b3", "b4", "b5"),
}
_KEY_ALIASES = {"cer": "c_er", "c_ER": "c_er", "ci": "c_i", "c_I": "c_i", "c4": "c_er"}


def _greek(key: str) -> str:
    for prefix, short in (("alpha", "a"), ("beta", "b")):
        if key.startswith(prefix) and key[len(prefix):].isdigit():
            return short + key[len(prefix):]
    return key


def _canonical_key(key: str) -> str:
    key = _KEY_ALIASES.get(key, key).lower()
    return _greek(_KEY_ALIASES.get(key, key))


@dataclass(frozen=True)
class ScenarioSpec:
    """A scenario kind plus its structural weights.

    Weights not supplied default to 0, except the heterogeneity interaction
    weights ``b4`` and ``b5`` which default to 0.2 when covariates are present.
    ``n_covariates`` only matters for data generation: with more than one,
    the structural ``W`` is the first principal component of independent
    standard-normal ``W1..WJ``.
    """

    kind: Kind
    with_covariates: bool = False
    weights: Mapping[str, float] = field(default_factory=dict)
    n: int | None = None
    seed: int | None = None
    n_covariates: int = 1

    def __post_init__(self):
        kind = Kind.parse(self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "with_covariates", bool(self.with_covariates))
        allowed = _KEYS[(kind, self.with_covariates)]
        given = {}
        for raw_key, value in dict(self.weights).items():
            key = _canonical_key(raw_key)
            if key not in allowed:
                raise ValueError(
                    f"weight {raw_key!r} does not belong to {kind.value}"
                    f"{' with' if self.with_covariates else ' without'} covariates; allowed: {list(allowed)}"
                )
            value = float(value)
            if not math.isfinite(value) or not -1.0 < value < 1.0:
                raise ValueError(f"weight {key} = {value!r} must lie strictly inside (-1, 1)")
            given[key] = value
        full = {}
        for key in allowed:
            default = DEFAULT_INTERACTION_WEIGHT if key in ("b4", "b5") else 0.0
            full[key] = given.get(key, default)
        object.__setattr__(self, "weights", MappingProxyType(full))
        if self.n_covariates < 1:
            raise ValueError("n_covariates must be at least 1")
        if self.n is not None and self.n < 10:
            raise ValueError("n must be at least 10")

    def __getitem__(self, key: str) -> float:
        return self.weights[key]

    def replace(self, **weights: float) -> ScenarioSpec:
        merged = dict(self.weights)
        merged.update(weights)
        return ScenarioSpec(self.kind, self.with_covariates, merged, self.n, self.seed, self.n_covariates)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "with_covariates": self.with_covariates, "weights": dict(self.weights)}
        if self.n is not None:
            out["n"] = self.n
        if self.seed is not None:
            out["seed"] = self.seed
        if self.n_covariates != 1:
            out["n_covariates"] = self.n_covariates
        return out

    @classmethod
    def from_dict(cls, doc: Mapping) -> ScenarioSpec:
        unknown = set(doc) - {"kind", "with_covariates", "weights", "n", "seed", "n_covariates"}
        if unknown:
            raise ValueError(f"unknown scenario field(s): {sorted(unknown)}")
        if "kind" not in doc:
            raise ValueError("scenario document needs a 'kind'")
        return cls(
            kind=doc["kind"],
            with_covariates=doc.get("with_covariates", False),
            weights=doc.get("weights", {}),
            n=doc.get("n"),
            seed=doc.get("seed"),
            n_covariates=doc.get("n_covariates", 1),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> ScenarioSpec:
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# error variances


def _error_variance_terms(spec: ScenarioSpec) -> dict[str, tuple[float, str]]:
    w = spec.weights
    cov = spec.with_covariates
    if spec.kind is Kind.HETEROGENEITY:
        a1, a2, a3, b1, b2, b3 = (w[k] for k in ("a1", "a2", "a3", "b1", "b2", "b3"))
        a4, a5, b4, b5 = (w.get(k, 0.0) for k in ("a4", "a5", "b4", "b5"))
        x_expl = a1**2 + a2**2 + a3**2 + a4**2 + a5**2
        y_expl = (
            b1**2
            + b2**2
            + b3**2 * (1 + a2**2 + 2 * a3**2)
            + 2 * b1 * b2 * a2
            + 4 * b1 * b3 * a1 * a3
        )
        if cov:
            y_expl += (
                b4**2
                + b5**2 * (1 + a4**2 + 2 * a5**2)
                + 2 * b1 * b4 * a4
                + 4 * b1 * b5 * a1 * a5
                + 2 * b3 * b5 * (a2 * a4 + 2 * a3 * a5)
            )
        return {
            "eps_x": (1 - x_expl, "var(eps_x) = 1 - (a1^2 + a2^2 + a3^2 [+ a4^2 + a5^2])"),
            "eps_y": (1 - y_expl, "var(eps_y) = 1 - var(b1 X + b2 U + b3 XU [+ b4 W + b5 XW])"),
        }

    c0, c1, c2, c3 = (w[k] for k in ("c0", "c1", "c2", "c3"))
    c5, c6, c7 = (w.get(k, 0.0) for k in ("c5", "c6", "c7"))
    cer, ci = w.get("c_er", 0.0), w.get("c_i", 0.0)
    out = {}
    if spec.kind is Kind.INDEPENDENCE:
        out["eps_z"] = (1 - ci**2 - c7**2, "var(eps_z) = 1 - c_i^2 [- c7^2]")
        x_expl = c1**2 + c3**2 + c5**2 + 2 * c1 * c3 * ci + 2 * c3 * c5 * c7
        y_expl = c0**2 + c2**2 + c6**2 + 2 * c0 * c2 * (c1 + c3 * ci) + 2 * c0 * c6 * (c5 + c3 * c7)
    else:
        x_expl = c1**2 + c3**2 + c5**2
        y_expl = c0**2 + c2**2 + cer**2 + c6**2 + 2 * c0 * c1 * c2 + 2 * c0 * c3 * cer + 2 * c0 * c5 * c6
    out["eps_x"] = (1 - x_expl, "var(eps_x) = 1 - var(structural part of X)")
    out["eps_y"] = (1 - y_expl, "var(eps_y) = 1 - var(structural part of Y)")
    return out


def feasible_error_variances(spec: ScenarioSpec) -> dict[str, float]:
    """Error variances that give every structural variable unit variance.

    Returns a map with keys ``eps_x``, ``eps_y`` (and ``eps_z`` for the
    Independence kind).

    Raises
    ------
    InfeasibleError
        If any variance is below ``1e-6``; ``constraint`` names the equation.
    """
    terms = _error_variance_terms(spec)
    for name, (value, formula) in terms.items():
        if value < VARIANCE_FLOOR:
            raise InfeasibleError(
                f"{spec.kind.value} weights are infeasible: {formula} evaluates to {value:.6g} (< {VARIANCE_FLOOR:g})",
                constraint=name,
            )
    return {name: value for name, (value, _) in terms.items()}


def is_feasible(spec: ScenarioSpec) -> bool:
    try:
        feasible_error_variances(spec)
    except InfeasibleError:
        return False
    return True


# ---------------------------------------------------------------------------
# closed forms


@dataclass(frozen=True)
class ClosedFormResult:
    """Probability limits of the three estimators and their distances to the ACE.

    ``a2``: OLS of Y on X (plus covariates). ``a3``: the same regression with
    Z added. ``a4``: 2SLS using Z as instrument. ``a3`` is ``None`` when no
    closed form exists (heterogeneity with covariates).
    """

    a1: float
    a2: float
    a3: float | None
    a4: float

    @property
    def lambda2(self) -> float:
        return abs(self.a2 - self.a1)

    @property
    def lambda3(self) -> float | None:
        return None if self.a3 is None else abs(self.a3 - self.a1)

    @property
    def lambda4(self) -> float:
        return abs(self.a4 - self.a1)

    def require(self, name: str) -> float:
        value = getattr(self, name)
        if value is None:
            raise NotDerivedError(f"{name} has no closed form for this scenario")
        return value

    def lambdas(self) -> tuple[float, float | None, float]:
        return self.lambda2, self.lambda3, self.lambda4

    def to_dict(self) -> dict:
        return {
            "a1": self.a1,
            "a2": self.a2,
            "a3": self.a3,
            "a4": self.a4,
            "lambda2": self.lambda2,
            "lambda3": self.lambda3,
            "lambda4": self.lambda4,
        }


def _instrument_check(value: float, what: str) -> None:
    if abs(value) < 1e-12:
        raise WeakDenominatorError(f"instrument is irrelevant for the exposure ({what} = 0)")


def closed_form(spec: ScenarioSpec) -> ClosedFormResult:
    """Evaluate the probability limits of the three estimators for ``spec``.

    Raises
    ------
    InfeasibleError
        The weights cannot produce unit-variance variables.
    WeakDenominatorError
        The instrument has no population association with the exposure.
    """
    feasible_error_variances(spec)
    w = spec.weights
    if spec.kind is Kind.HETEROGENEITY:
        return _closed_form_heterogeneity(spec)

    c0, c1, c2, c3 = (w[k] for k in ("c0", "c1", "c2", "c3"))
    c5, c7 = w.get("c5", 0.0), w.get("c7", 0.0)
    if spec.kind is Kind.INDEPENDENCE:
        ci = w["c_i"]
        zw_free = 1 - c7**2
        zx = c3 * zw_free + c1 * ci
        _instrument_check(zx, "c3 (1 - c7^2) + c1 c_i")
        a2 = c0 + (c1 * c2 + c2 * c3 * ci) / (1 - (c5 + c3 * c7) ** 2)
        a3 = c0 + (c1 * c2 * (1 - c7**2 - ci**2) / zw_free) / (
            1 - (c5 + c3 * c7) ** 2 - zw_free * (c3 + c1 * ci / zw_free) ** 2
        )
        a4 = c0 + c2 * ci / zx
        return ClosedFormResult(c0, a2, a3, a4)

    cer = w.get("c_er", 0.0)
    _instrument_check(c3, "c3")
    a2 = c0 + (c1 * c2 + c3 * cer) / (1 - c5**2)
    a3 = c0 + c1 * c2 / (1 - c3**2 - c5**2)
    a4 = c0 + cer / c3
    return ClosedFormResult(c0, a2, a3, a4)


def _closed_form_heterogeneity(spec: ScenarioSpec) -> ClosedFormResult:
    w = spec.weights
    a1, a2, a3, b1, b2, b3 = (w[k] for k in ("a1", "a2", "a3", "b1", "b2", "b3"))
    if not spec.with_covariates:
        _instrument_check(a1, "a1")
        return ClosedFormResult(
            b1,
            b1 + a2 * b2 + 2 * a1 * a3 * b3,
            b1 + (a2 * b2 + a1 * a3 * b3) / (1 - a1**2),
            b1 + a3 * b3 / a1,
        )
    a4, a5 = w["a4"], w["a5"]
    # Var(XW) left over after W, and its covariance with the ZU channel
    xw_var = 1 + a4**2 + 2 * a5**2
    denom = 1 - a4**2 - 4 * a1**2 * a5**2 / xw_var
    num = a2 * b2 + b3 * (2 * a1 * a3 - 2 * a1 * a5 * (a2 * a4 + 2 * a3 * a5) / xw_var)
    _instrument_check(a1**2 - a5**2, "a1^2 - a5^2")
    return ClosedFormResult(b1, b1 + num / denom, None, b1 + a1 * a3 * b3 / (a1**2 - a5**2))


def true_inconsistency_ratio(spec: ScenarioSpec) -> float:
    """2SLS inconsistency over the relevant OLS inconsistency.

    The comparison is against OLS with Z for the exclusion, independence and
    perfect-IV kinds, and against OLS without Z for heterogeneity.
    """
    res = closed_form(spec)
    ols = res.lambda2 if spec.kind is Kind.HETEROGENEITY else res.lambda3
    if ols == 0:
        return math.inf if res.lambda4 > 0 else math.nan
    return res.lambda4 / ols


# ---------------------------------------------------------------------------
# generation


@dataclass(frozen=True)
class GeneratedData:
    """Columns drawn from a scenario's structural equations.

    ``columns`` always holds ``Y``, ``X``, ``Z`` and ``U``; with covariates
    also the structural ``W`` and its raw components ``W1..WJ``; for the
    heterogeneity kind the products ``XU``, ``XW``, ``ZU``, ``ZW``.
    """

    columns: Mapping[str, np.ndarray]
    spec: ScenarioSpec
    n: int
    seed: int
    covariate_names: tuple[str, ...] = ()

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def to_dataset(self, expose_u: bool = False) -> Dataset:
        """The observable view as a :class:`~causal_tradeoff.data.Dataset`.

        Covariates are the raw ``W1..WJ``; ``U`` is included (as the
        confounder role) only when ``expose_u`` is set.
        """
        roles = Roles("Y", "X", "Z", self.covariate_names, "U" if expose_u else None)
        return Dataset({c: self.columns[c] for c in roles.all_columns()}, roles)


def rng_for(seed: int) -> np.random.Generator:
    """The package's random stream: PCG64 seeded with a non-negative integer."""
    if seed < 0:
        raise ValueError("seeds must be non-negative")
    return np.random.Generator(np.random.PCG64(seed))


def generate(spec: ScenarioSpec, n: int | None = None, seed: int | None = None) -> GeneratedData:
    """Draw ``n`` observations from ``spec``.

    Draw order from a PCG64 stream: ``U``, the covariates ``W1..WJ``, the
    instrument noise, the exposure noise, the outcome noise. ``n`` and
    ``seed`` fall back to the values stored on the spec.
    """
    n = spec.n if n is None else n
    seed = spec.seed if seed is None else seed
    if n is None or seed is None:
        raise ValueError("both n and seed are required")
    if n < 10:
        raise ValueError("n must be at least 10")
    var = feasible_error_variances(spec)
    w = spec.weights
    rng = rng_for(seed)

    u = rng.standard_normal(n)
    cols: dict[str, np.ndarray] = {}
    names: tuple[str, ...] = ()
    wv = np.zeros(n)
    if spec.with_covariates:
        raw = rng.standard_normal((n, spec.n_covariates))
        names = tuple(f"W{j + 1}" for j in range(spec.n_covariates))
        wv = raw[:, 0].copy() if spec.n_covariates == 1 else composite_w(raw, names).column
        for j, name in enumerate(names):
            cols[name] = raw[:, j]
    ez = rng.standard_normal(n)
    ex = rng.standard_normal(n) * math.sqrt(var["eps_x"])
    ey = rng.standard_normal(n) * math.sqrt(var["eps_y"])

    if spec.kind is Kind.HETEROGENEITY:
        z = ez
        g = lambda k: w.get(k, 0.0)  # noqa: E731
        x = g("a1") * z + g("a2") * u + g("a3") * z * u + g("a4") * wv + g("a5") * z * wv + ex
        y = g("b1") * x + g("b2") * u + g("b3") * x * u + g("b4") * wv + g("b5") * x * wv + ey
        cols.update(XU=x * u, XW=x * wv, ZU=z * u, ZW=z * wv)
    else:
        g = lambda k: w.get(k, 0.0)  # noqa: E731
        if spec.kind is Kind.INDEPENDENCE:
            z = g("c_i") * u + g("c7") * wv + ez * math.sqrt(var["eps_z"])
        else:
            z = ez
        x = g("c1") * u + g("c3") * z + g("c5") * wv + ex
        y = g("c0") * x + g("c2") * u + g("c_er") * z + g("c6") * wv + ey

    cols.update(Y=y, X=x, Z=z, U=u)
    if spec.with_covariates:
        cols["W"] = wv
    return GeneratedData(MappingProxyType(cols), spec, n, seed, names)
