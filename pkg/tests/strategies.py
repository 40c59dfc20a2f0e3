"""Hypothesis strategies for random feasible scenarios."""

from hypothesis import assume
from hypothesis import strategies as st

from causal_tradeoff import ScenarioSpec, WeakDenominatorError, closed_form
from causal_tradeoff.scenarios import _KEYS, Kind, is_feasible

weight = st.floats(-0.6, 0.6).map(lambda v: round(v, 2))


@st.composite
def feasible_specs(draw, kinds=(Kind.PERFECT_IV, Kind.EXCLUSION, Kind.INDEPENDENCE, Kind.HETEROGENEITY), covariates=None):
    kind = draw(st.sampled_from(kinds))
    cov = draw(st.booleans()) if covariates is None else covariates
    weights = {k: draw(weight) for k in _KEYS[(kind, cov)]}
    spec = ScenarioSpec(kind, cov, weights)
    assume(is_feasible(spec))
    try:
        closed_form(spec)
    except WeakDenominatorError:
        assume(False)
    return spec
