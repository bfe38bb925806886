"""Belief-triple closed forms against brute-force vector arithmetic."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from aoisched.belief import (
    BeliefTriple,
    Observation,
    active_probability,
    age_gap_array,
    belief_pmf,
    evolve,
    expected_age_gap,
    phi_array,
    support_max,
)

GRID = [
    (k, m, u, lam)
    for k in range(1, 11)
    for m in range(1, 11)
    for u in range(0, 11)
    for lam in (0.1, 0.3, 0.5, 0.7, 0.9)
]


def pmf_oracle_gap(b: BeliefTriple) -> float:
    """Age gap computed as D minus the pmf mean, independent of the closed form."""
    support = support_max(b) + 2
    vec = belief_pmf(b, support)
    return b.aoi - float(np.arange(1, support + 1) @ vec)


class TestBeliefPmf:
    def test_renormalized_tail_after_failure(self):
        """Summary (5, 1, 4) at rate 0.7: plain geometric start, tiny tail."""
        vec = belief_pmf(BeliefTriple(5, 1, 4, 0.7), 5)
        assert vec == pytest.approx([0.7, 0.21, 0.063, 0.0189, 0.0081], abs=1e-12)

    def test_pending_failure_mixes_geometric_and_scaled_tail(self):
        vec = belief_pmf(BeliefTriple(1, 4, 1, 0.7), 5)
        assert vec == pytest.approx(
            [0.7, 0.21171, 0.06351, 0.01905, 0.00571], abs=5e-6
        )

    def test_single_gap_slot_collapses_geometric_run(self):
        vec = belief_pmf(BeliefTriple(3, 1, 0, 0.5), 6)
        assert vec == pytest.approx([0.5, 0.0, 0.0, 0.5, 0.0, 0.0], abs=0)

    def test_normalization_on_grid(self):
        for k, m, u, lam in GRID:
            b = BeliefTriple(k, m, u, lam)
            vec = belief_pmf(b, support_max(b))
            assert abs(vec.sum() - 1.0) <= 1e-12

    def test_no_mass_above_aoi(self):
        for k, m, u, lam in [(2, 3, 0, 0.4), (1, 5, 2, 0.7), (4, 2, 6, 0.2)]:
            b = BeliefTriple(k, m, u, lam)
            vec = belief_pmf(b, b.aoi + 5)
            assert np.all(vec[b.aoi :] == 0.0)
            # Active probability is exactly one minus the mass at the AoI.
            assert active_probability(b) == 1.0 - vec[b.aoi - 1]

    def test_rejects_small_support(self):
        with pytest.raises(ValueError, match="max_support"):
            belief_pmf(BeliefTriple(3, 2, 0, 0.5), 4)
        with pytest.raises(ValueError, match="max_support"):
            belief_pmf(BeliefTriple(1, 3, 2, 0.5), 4)


class TestActiveProbability:
    def test_from_pmf_mass(self):
        assert active_probability(BeliefTriple(2, 1, 0, 0.5)) == pytest.approx(0.5)
        assert active_probability(BeliefTriple(4, 3, 0, 0.7)) == pytest.approx(
            1.0 - 0.3**3
        )

    def test_pending_failure_is_certainty(self):
        for lam in (0.1, 0.5, 0.99):
            assert active_probability(BeliefTriple(1, 3, 2, lam)) == 1.0

    def test_equals_mass_below_aoi(self):
        for k, m, u, lam in [(4, 3, 0, 0.7), (2, 2, 0, 0.3), (1, 6, 0, 0.9)]:
            b = BeliefTriple(k, m, u, lam)
            vec = belief_pmf(b, support_max(b))
            assert active_probability(b) == pytest.approx(vec[: b.aoi - 1].sum(), abs=1e-12)


class TestExpectedAgeGap:
    def test_one_gap_slot(self):
        assert expected_age_gap(BeliefTriple(3, 1, 0, 0.5)) == pytest.approx(1.5)
        assert expected_age_gap(BeliefTriple(3, 1, 0, 0.5)) == pytest.approx(
            pmf_oracle_gap(BeliefTriple(3, 1, 0, 0.5)), abs=1e-12
        )

    def test_deterministic_arrival_limit(self):
        assert expected_age_gap(BeliefTriple(1, 1, 0, 1.0)) == pytest.approx(1.0)

    def test_pending_failure_case_matches_oracle(self):
        b = BeliefTriple(2, 2, 3, 0.7)
        assert expected_age_gap(b) == pytest.approx(pmf_oracle_gap(b), abs=1e-12)

    def test_oracle_agreement_on_grid(self):
        for k, m, u, lam in GRID:
            b = BeliefTriple(k, m, u, lam)
            assert abs(expected_age_gap(b) - pmf_oracle_gap(b)) <= 1e-10

    def test_always_positive(self):
        for k, m, u, lam in GRID:
            assert expected_age_gap(BeliefTriple(k, m, u, lam)) > 0.0


class TestEvolve:
    def test_unscheduled_grows_gap(self):
        assert evolve(BeliefTriple(1, 1, 0, 0.5), Observation.not_scheduled()) == BeliefTriple(
            1, 2, 0, 0.5
        )

    def test_success_resets_to_observed_age(self):
        assert evolve(BeliefTriple(2, 3, 0, 0.5), Observation.success(2)) == BeliefTriple(
            2, 1, 0, 0.5
        )

    def test_empty_buffer_reveals_age(self):
        assert evolve(BeliefTriple(4, 2, 0, 0.5), Observation.empty_buffer()) == BeliefTriple(
            6, 1, 0, 0.5
        )

    def test_failure_starts_and_extends_pending_count(self):
        assert evolve(BeliefTriple(2, 3, 0, 0.5), Observation.failed()) == BeliefTriple(
            2, 3, 1, 0.5
        )
        assert evolve(BeliefTriple(2, 3, 4, 0.5), Observation.failed()) == BeliefTriple(
            2, 3, 5, 0.5
        )

    def test_unscheduled_with_pending_failure_extends_it(self):
        assert evolve(BeliefTriple(1, 2, 3, 0.5), Observation.not_scheduled()) == BeliefTriple(
            1, 2, 4, 0.5
        )

    def test_empty_buffer_impossible_with_pending_failure(self):
        with pytest.raises(ValueError, match="empty buffer"):
            evolve(BeliefTriple(1, 2, 1, 0.5), Observation.empty_buffer())

    def test_success_outside_support_rejected(self):
        with pytest.raises(ValueError, match="support"):
            evolve(BeliefTriple(4, 2, 0, 0.5), Observation.success(3))
        with pytest.raises(ValueError, match="support"):
            evolve(BeliefTriple(1, 2, 2, 0.5), Observation.success(5))

    @settings(max_examples=200, deadline=None)
    @given(st.data())
    def test_closure_under_random_observation_sequences(self, data):
        """Any feasible observation sequence keeps the triple well-formed."""
        lam = data.draw(st.sampled_from([0.2, 0.5, 0.8]))
        b = BeliefTriple.initial(lam)
        for _ in range(data.draw(st.integers(1, 40))):
            choices = ["not_scheduled", "failed", "success"]
            if b.u == 0:
                choices.append("empty_buffer")
            kind = data.draw(st.sampled_from(choices))
            if kind == "success":
                if b.u == 0:
                    support = list(range(1, b.m + 1)) + [b.k + b.m]
                else:
                    support = list(range(1, b.u + b.m + 1))
                obs = Observation.success(data.draw(st.sampled_from(support)))
            else:
                obs = Observation(kind)
            b = evolve(b, obs)
            assert b.k >= 1 and b.m >= 1 and b.u >= 0
            vec = belief_pmf(b, support_max(b))
            assert abs(vec.sum() - 1.0) <= 1e-12


class TestVectorizedForms:
    def test_match_scalar_functions(self):
        rng = np.random.default_rng(1)
        k = rng.integers(1, 12, size=200)
        m = rng.integers(1, 12, size=200)
        u = rng.integers(0, 12, size=200)
        lam = rng.uniform(0.05, 0.95, size=200)
        phis = phi_array(m, u, lam)
        gaps = age_gap_array(k, m, u, lam)
        for i in range(200):
            b = BeliefTriple(int(k[i]), int(m[i]), int(u[i]), float(lam[i]))
            assert phis[i] == pytest.approx(active_probability(b), abs=1e-14)
            assert gaps[i] == pytest.approx(expected_age_gap(b), abs=1e-11)


class TestValidation:
    def test_rejects_bad_triples(self):
        with pytest.raises(ValueError):
            BeliefTriple(0, 1, 0, 0.5)
        with pytest.raises(ValueError):
            BeliefTriple(1, 0, 0, 0.5)
        with pytest.raises(ValueError):
            BeliefTriple(1, 1, -1, 0.5)
        with pytest.raises(ValueError):
            BeliefTriple(1, 1, 0, 0.0)
        with pytest.raises(ValueError):
            BeliefTriple(1, 1, 0, 1.2)

    def test_rejects_bad_observations(self):
        with pytest.raises(ValueError):
            Observation("nonsense")
        with pytest.raises(ValueError):
            Observation.success(0)
        with pytest.raises(ValueError):
            Observation("failed", d=3)

    def test_aoi_is_triple_sum(self):
        assert BeliefTriple(2, 3, 4, 0.5).aoi == 9
        assert BeliefTriple.initial(0.5).aoi == 2
