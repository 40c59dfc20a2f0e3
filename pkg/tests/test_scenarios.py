import json
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st
from population import error_variances, population_lambdas
from strategies import feasible_specs

from causal_tradeoff import (
    InfeasibleError,
    Kind,
    NotDerivedError,
    ScenarioSpec,
    WeakDenominatorError,
    closed_form,
    feasible_error_variances,
    generate,
)
from causal_tradeoff.scenarios import is_feasible, true_inconsistency_ratio

ORACLE_SETTINGS = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])


class TestClosedForm:
    def test_table_specs_match_population_oracle(self, table_case):
        name, spec = table_case
        exact = population_lambdas(spec.kind.value, dict(spec.weights), spec.with_covariates)
        cf = closed_form(spec)
        assert cf.lambda2 == pytest.approx(exact[0], abs=1e-12)
        assert cf.lambda4 == pytest.approx(exact[2], abs=1e-12)
        if cf.lambda3 is not None:
            assert cf.lambda3 == pytest.approx(exact[1], abs=1e-12)

    @ORACLE_SETTINGS
    @given(feasible_specs())
    def test_random_specs_match_population_oracle(self, spec):
        exact = population_lambdas(spec.kind.value, dict(spec.weights), spec.with_covariates)
        cf = closed_form(spec)
        assert cf.lambda2 == pytest.approx(exact[0], abs=1e-9)
        assert cf.lambda4 == pytest.approx(exact[2], abs=1e-9)
        if cf.lambda3 is not None:
            assert cf.lambda3 == pytest.approx(exact[1], abs=1e-9)

    @pytest.mark.parametrize(
        "kind,cov,weights",
        [
            ("er", False, {"c0": 0.3, "c1": 0.5, "c2": 0.5, "c3": 0.5, "c_er": 0.0}),
            ("er", True, {"c0": 0.3, "c1": 0.4, "c2": 0.4, "c3": 0.5, "c5": 0.3, "c6": 0.3}),
            ("ind", True, {"c0": 0.3, "c1": 0.4, "c2": 0.4, "c3": 0.5, "c5": 0.3, "c6": 0.3}),
            ("het", False, {"b1": 0.1, "b2": 0.2, "b3": 0.1, "a1": 0.45, "a2": 0.15}),
            ("het", True, {"b1": 0.1, "b2": 0.2, "b3": 0.1, "a1": 0.45, "a2": 0.15, "a4": 0.1}),
        ],
    )
    def test_no_violation_means_consistent_2sls(self, kind, cov, weights):
        assert closed_form(ScenarioSpec(kind, cov, weights)).lambda4 == pytest.approx(0.0, abs=1e-15)

    @settings(max_examples=80, deadline=None)
    @given(feasible_specs(kinds=(Kind.PERFECT_IV,)))
    def test_perfect_iv_bias_amplification(self, spec):
        w = spec.weights
        cf = closed_form(spec)
        assert cf.lambda4 == 0.0
        if w["c1"] * w["c2"] != 0 and w["c3"] != 0:
            assert cf.lambda3 > cf.lambda2 > 0

    def test_a3_not_derived_with_heterogeneity_covariates(self):
        cf = closed_form(ScenarioSpec("het", True, {"a1": 0.45, "b1": 0.1}))
        assert cf.a3 is None and cf.lambda3 is None
        with pytest.raises(NotDerivedError):
            cf.require("a3")

    def test_irrelevant_instrument(self):
        with pytest.raises(WeakDenominatorError):
            closed_form(ScenarioSpec("er", False, {"c0": 0.3, "c1": 0.5, "c2": 0.5, "c3": 0.0, "c_er": 0.1}))

    def test_true_ratio_compares_against_the_right_ols(self):
        er = ScenarioSpec("er", False, {"c0": 0.3, "c1": 0.5, "c2": 0.5, "c3": 0.5, "c_er": 0.25})
        cf = closed_form(er)
        assert true_inconsistency_ratio(er) == pytest.approx(cf.lambda4 / cf.lambda3)
        het = ScenarioSpec("het", False, {"b1": 0.1, "b2": 0.2, "b3": 0.1, "a1": 0.45, "a2": 0.15, "a3": 0.1})
        cf = closed_form(het)
        assert true_inconsistency_ratio(het) == pytest.approx(cf.lambda4 / cf.lambda2)


class TestTradeoffBoundaries:
    positive = st.floats(0.05, 0.9).map(lambda v: round(v, 3))

    @settings(max_examples=200, deadline=None)
    @given(positive, positive, positive, positive)
    def test_exclusion_boundary(self, c1, c2, c3, cer):
        spec = ScenarioSpec("er", False, {"c0": 0.3, "c1": c1, "c2": c2, "c3": c3, "c_er": cer})
        assume(is_feasible(spec))
        lhs, rhs = cer / c3, c1 * c2 / (1 - c3**2)
        assume(abs(lhs - rhs) > 1e-9)
        cf = closed_form(spec)
        assert (cf.lambda4 >= cf.lambda3) == (lhs >= rhs)

    @settings(max_examples=200, deadline=None)
    @given(positive, positive, positive, positive, positive)
    def test_amplification_condition(self, a1, a2, a3, b2, b3):
        spec = ScenarioSpec("het", False, {"a1": a1, "a2": a2, "a3": a3, "b1": 0.1, "b2": b2, "b3": b3})
        assume(is_feasible(spec))
        score = 2 * a1**2 + a1 * a2 * b2 / (a3 * b3)
        assume(abs(score - 1) > 1e-9)
        cf = closed_form(spec)
        assert (cf.lambda3 > cf.lambda2) == (score > 1)

    def test_amplification_needs_first_stage_weight(self):
        # without the a1 factor on the confounding term the condition predicts amplification here
        w = {"a1": 0.05, "a2": 0.05, "a3": 0.05, "b1": 0.1, "b2": 0.05, "b3": 0.05}
        assert 2 * w["a1"] ** 2 + w["a2"] * w["b2"] / (w["a3"] * w["b3"]) > 1
        lam2, lam3, _ = population_lambdas("Heterogeneity", w, False)
        assert lam3 < lam2


class TestFeasibility:
    def test_perfect_iv_example(self):
        var = feasible_error_variances(ScenarioSpec("PerfectIV", False, {"c1": 0.5, "c3": 0.5}))
        assert var["eps_x"] == pytest.approx(0.5)

    def test_perfect_iv_infeasible(self):
        with pytest.raises(InfeasibleError) as info:
            feasible_error_variances(ScenarioSpec("PerfectIV", False, {"c1": 0.8, "c3": 0.8}))
        assert info.value.constraint == "eps_x"

    def test_independence_example(self):
        spec = ScenarioSpec("ind", False, {"c0": 0.3, "c1": 0.5, "c2": 0.5, "c3": 0.5, "c_i": 0.25})
        assert feasible_error_variances(spec)["eps_x"] == pytest.approx(0.375)

    @ORACLE_SETTINGS
    @given(feasible_specs())
    def test_error_variances_match_oracle(self, spec):
        ours = feasible_error_variances(spec)
        exact = error_variances(spec.kind.value, dict(spec.weights), spec.with_covariates)
        assert set(ours) == set(exact)
        for key in ours:
            assert ours[key] == pytest.approx(exact[key], abs=1e-12)

    def test_margin(self):
        # eps_x = 1 - 0.6^2 - 0.8^2 = 0 exactly, below the 1e-6 floor
        assert not is_feasible(ScenarioSpec("PerfectIV", False, {"c1": 0.6, "c3": 0.8}))


class TestSpec:
    def test_rejects_foreign_weight(self):
        with pytest.raises(ValueError, match="does not belong"):
            ScenarioSpec("er", False, {"c7": 0.1})

    @pytest.mark.parametrize("value", [1.0, -1.0, 1.5, math.nan])
    def test_rejects_out_of_range(self, value):
        with pytest.raises(ValueError):
            ScenarioSpec("er", False, {"c1": value})

    def test_aliases(self):
        spec = ScenarioSpec("independence", True, {"c_I": 0.2})
        assert spec.weights["c_i"] == 0.2
        het = ScenarioSpec("het", False, {"alpha1": 0.3, "beta2": 0.1})
        assert het["a1"] == 0.3 and het["b2"] == 0.1

    def test_interaction_defaults(self):
        spec = ScenarioSpec("het", True, {})
        assert spec["b4"] == 0.2 and spec["b5"] == 0.2

    def test_json_round_trip(self, table_case):
        _, spec = table_case
        again = ScenarioSpec.from_json(spec.to_json())
        assert again == spec
        assert json.loads(spec.to_json())["kind"] == spec.kind.value

    def test_unknown_field(self):
        with pytest.raises(ValueError):
            ScenarioSpec.from_dict({"kind": "er", "colour": "red"})


class TestGenerate:
    ER = ScenarioSpec("er", False, {"c0": 0.3, "c1": 0.5, "c2": 0.5, "c3": 0.5, "c_er": 0.25})

    def test_bit_identical_for_same_seed(self):
        a, b = generate(self.ER, 300, 5), generate(self.ER, 300, 5)
        for c in a.columns:
            assert a[c].tobytes() == b[c].tobytes()
        assert generate(self.ER, 300, 6)["X"].tobytes() != a["X"].tobytes()

    def test_perfect_iv_cov(self):
        spec = ScenarioSpec("PerfectIV", False, {"c0": 0.3, "c1": 0.5, "c2": 0.5, "c3": 0.5})
        d = generate(spec, 1_000_000, 1)
        assert np.cov(d["X"], d["Z"])[0, 1] == pytest.approx(0.5, abs=0.005)

    def test_confounder_moments(self):
        # sd(U^3) = sqrt(15) and sd(U^4) = sqrt(96), so the bounds 5/sqrt(n) and
        # 20/sqrt(n) hold for about 80% and 96% of seeds; check those rates.
        n, seeds = 20_000, 200
        u = [generate(self.ER, n, s)["U"] for s in range(seeds)]
        third = np.mean([abs(np.mean(x**3)) < 5 / math.sqrt(n) for x in u])
        fourth = np.mean([abs(np.mean(x**4) - 3) < 20 / math.sqrt(n) for x in u])
        p3 = math.erf(5 / math.sqrt(15) / math.sqrt(2))
        p4 = math.erf(20 / math.sqrt(96) / math.sqrt(2))
        assert abs(third - p3) < 4 * math.sqrt(p3 * (1 - p3) / seeds)
        assert abs(fourth - p4) < 4 * math.sqrt(p4 * (1 - p4) / seeds) + 0.01

    def test_unit_variances(self, table_case):
        _, spec = table_case
        n = 100_000
        d = generate(spec, n, 3)
        for c in ("Y", "X", "Z", "U") + (("W",) if spec.with_covariates else ()):
            assert d[c].var() == pytest.approx(1.0, abs=5 / math.sqrt(n))

    def test_heterogeneity_columns(self):
        d = generate(ScenarioSpec("het", True, {"a1": 0.4, "b1": 0.1}), 100, 4)
        for c in ("XU", "XW", "ZU", "ZW", "W", "W1"):
            assert c in d.columns
        np.testing.assert_allclose(d["XU"], d["X"] * d["U"])

    def test_composite_with_several_covariates(self):
        spec = ScenarioSpec("er", True, {"c0": 0.3, "c3": 0.5, "c5": 0.4}, n_covariates=3)
        d = generate(spec, 2_000, 5)
        assert d.covariate_names == ("W1", "W2", "W3")
        assert d["W"].var(ddof=1) == pytest.approx(1.0, abs=1e-10)

    def test_to_dataset_hides_confounder(self):
        d = generate(self.ER, 50, 6)
        assert d.to_dataset().roles.confounder is None
        assert "U" not in d.to_dataset().columns
        assert d.to_dataset(expose_u=True).u is not None

    def test_infeasible(self):
        with pytest.raises(InfeasibleError):
            generate(ScenarioSpec("PerfectIV", False, {"c1": 0.8, "c3": 0.8}), 100, 1)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32))
    def test_seed_determinism_property(self, seed):
        assert generate(self.ER, 20, seed)["Y"].tobytes() == generate(self.ER, 20, seed)["Y"].tobytes()
