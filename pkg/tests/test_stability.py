import math

import numpy as np
import pytest

from opinion_lab import (
    Model,
    OpinionState,
    Termination,
    build_digraph,
    check_agreement_sufficient,
    check_equal_topology,
    check_limit_equilibrium,
    classify,
    equi_topology_distance,
    fvct,
    in_neighborhood,
    invariant_equi_topology_distance,
    is_agreement_vector,
    is_equilibrium,
    simulate,
    stability_report,
)
from opinion_lab.graph import SccClass

from conftest import random_state


def sample_in_neighborhood(rng, z, radii, scale=1.0):
    """Random vector inside the (strict) box of the given radii around z."""
    y = np.array(z, dtype=float)
    for i, rad in enumerate(radii):
        if rad > 0:
            span = min(rad, 1e6)  # keep the inf sentinel usable
            y[i] += rng.uniform(-0.999, 0.999) * span * scale
    return y


class TestEquiTopologyDistance:
    def test_equilibrium_three_agent(self):
        state = OpinionState([0.0, 0.5, 1.0], [0.25, 1.0, 0.25], Model.SBC)
        assert np.allclose(
            equi_topology_distance(state), [0.125, 0.125, 0.125], atol=1e-15
        )

    def test_boundary_pair_gives_zero(self):
        state = OpinionState([0.0, 0.5, 1.0], [0.5, 1.0, 0.25], Model.SBC)
        eps = equi_topology_distance(state)
        assert eps[0] == 0.0

    def test_two_agents(self):
        state = OpinionState([0.0, 1.0], [0.3, 0.3], Model.SBC)
        assert np.allclose(equi_topology_distance(state), [0.35, 0.35])

    def test_single_agent_sentinel(self):
        eps = equi_topology_distance(OpinionState([0.2], [0.1]))
        assert math.isinf(eps[0])


class TestInvariantDistance:
    def test_equilibrium_three_agent(self):
        state = OpinionState([0.0, 0.5, 1.0], [0.25, 1.0, 0.25], Model.SBC)
        eps = equi_topology_distance(state)
        delta = invariant_equi_topology_distance(state, eps)
        assert np.allclose(delta, [0.125, 0.125, 0.125], atol=1e-15)

    def test_boundary_variant_all_zero(self):
        state = OpinionState([0.0, 0.5, 1.0], [0.5, 1.0, 0.25], Model.SBC)
        eps = equi_topology_distance(state)
        delta = invariant_equi_topology_distance(state, eps)
        assert np.array_equal(delta, [0.0, 0.0, 0.0])

    def test_isolated_agents_delta_equals_eps(self):
        state = OpinionState([0.0, 10.0, 20.0], [0.1, 0.1, 0.1], Model.SBC)
        eps = equi_topology_distance(state)
        delta = invariant_equi_topology_distance(state, eps)
        assert np.array_equal(delta, eps)

    def test_delta_bounded_by_eps(self):
        rng = np.random.default_rng(91)
        for _ in range(300):
            state = random_state(rng)
            if state.n == 1:
                continue
            eps = equi_topology_distance(state)
            delta = invariant_equi_topology_distance(state, eps)
            assert np.all(delta <= eps + 1e-15)


class TestInNeighborhood:
    def test_center_always_inside(self):
        rng = np.random.default_rng(97)
        for _ in range(50):
            state = random_state(rng)
            radii = rng.uniform(0, 0.1, state.n)
            assert in_neighborhood(state.opinions, state, radii)

    def test_strict_interior(self):
        z = OpinionState([0.0, 0.5, 1.0], [0.25, 1.0, 0.25], Model.SBC)
        assert in_neighborhood([0.0, 0.6, 1.0], z, [0.125, 0.125, 0.125])
        assert not in_neighborhood([0.0, 0.7, 1.0], z, [0.125, 0.125, 0.125])

    def test_zero_radius_forces_equality(self):
        z = OpinionState([0.0, 1.0], [0.2, 0.2], Model.SBC)
        assert not in_neighborhood([0.0, 1.0 + 1e-15], z, [0.1, 0.0])
        assert in_neighborhood([0.05, 1.0], z, [0.1, 0.0])

    def test_boundary_excluded(self):
        z = OpinionState([0.0, 1.0], [0.2, 0.2], Model.SBC)
        assert not in_neighborhood([0.1, 1.0], z, [0.1, 0.1])

    def test_iet_subset_of_et(self):
        rng = np.random.default_rng(101)
        for _ in range(300):
            state = random_state(rng)
            if state.n == 1:
                continue
            eps = equi_topology_distance(state)
            delta = invariant_equi_topology_distance(state, eps)
            y = sample_in_neighborhood(rng, state.opinions, delta)
            if in_neighborhood(y, state, delta):
                assert in_neighborhood(y, state, eps)


class TestEqualTopologyLemma:
    def test_identity(self, fig41_state):
        assert check_equal_topology(fig41_state.opinions, fig41_state)

    def test_far_state_differs(self):
        z = OpinionState([0.0, 0.1, 0.2], [0.15, 0.15, 0.15], Model.SBC)
        assert not check_equal_topology([0.0, 5.0, 10.0], z)

    def test_lemma_on_random_pairs(self):
        rng = np.random.default_rng(103)
        for _ in range(1000):
            state = random_state(rng, max_n=15)
            if state.n == 1:
                continue
            eps = equi_topology_distance(state)
            y = sample_in_neighborhood(rng, state.opinions, eps)
            if not in_neighborhood(y, state, eps):
                continue
            assert check_equal_topology(y, state)


class TestEquilibriumAndAgreement:
    def test_three_agent_equilibrium(self):
        state = OpinionState([0.0, 0.5, 1.0], [0.25, 1.0, 0.25], Model.SBC)
        assert is_equilibrium(state, tol=1e-15)

    def test_consensus_is_equilibrium(self):
        state = OpinionState([0.5] * 4, [0.3] * 4, Model.SBI)
        assert is_equilibrium(state, tol=0.0)

    def test_perturbed_state_is_not(self, fig41_state):
        assert not is_equilibrium(fig41_state, tol=1e-12)

    def test_agreement_disconnected_clusters(self):
        state = OpinionState([0.0, 0.0, 1.0], [0.1, 0.1, 0.1], Model.SBC)
        assert is_agreement_vector(state)

    def test_fixed_but_not_agreement(self, finite_fix_state):
        traj = simulate(finite_fix_state, max_steps=100, limit_tol=0.0)
        final = traj.final_state()
        assert is_equilibrium(final, tol=0.0)
        assert not is_agreement_vector(final)

    def test_global_consensus_is_agreement(self):
        state = OpinionState([0.5] * 6, [0.2] * 6, Model.SBC)
        assert is_agreement_vector(state)

    def test_agreement_implies_positive_eps(self):
        rng = np.random.default_rng(107)
        checked = 0
        for _ in range(500):
            n = int(rng.integers(2, 9))
            # Random clusters in consensus, far apart relative to bounds.
            k = int(rng.integers(1, 4))
            centers = np.cumsum(rng.uniform(2.0, 3.0, k))
            y = centers[rng.integers(0, k, n)]
            r = rng.uniform(0.05, 0.4, n)
            state = OpinionState(y, r, Model.SBC if rng.random() < 0.5 else Model.SBI)
            if not is_agreement_vector(state):
                continue
            checked += 1
            assert equi_topology_distance(state).min() > 0.0
        assert checked > 100


class TestAgreementSufficientCondition:
    def test_single_wcc_large_bounds(self):
        state = OpinionState([0.0, 0.1, 0.2], [0.5, 0.5, 0.5], Model.SBC)
        result = check_agreement_sufficient(state)
        assert result.separation_ok
        assert result.bounds_ok
        assert result.predicted_finite_time
        sbi = check_agreement_sufficient(
            OpinionState([0.0, 0.1, 0.2], [0.5, 0.5, 0.5], Model.SBI)
        )
        assert sbi.predicted_finite_time

    def test_two_separated_wccs_predict_finite_time(self):
        state = OpinionState(
            [0.0, 0.1, 5.0, 5.1], [0.2, 0.2, 0.2, 0.2], Model.SBC
        )
        result = check_agreement_sufficient(state)
        assert result.predicted_finite_time
        traj = simulate(state, max_steps=1000, limit_tol=0.0)
        assert traj.termination is Termination.FIXED_STATE
        assert is_agreement_vector(traj.final_state())

    def test_sbc_sbi_asymmetry(self):
        y = [0.0, 0.3, 0.6]
        r = [0.7, 0.05, 0.05]
        sbi = check_agreement_sufficient(OpinionState(y, r, Model.SBI))
        assert sbi.bounds_ok
        sbc = check_agreement_sufficient(OpinionState(y, r, Model.SBC))
        assert not sbc.bounds_ok

    def test_sufficient_condition_oracle(self):
        # Whenever both conditions hold, the trajectory must reach a fixed
        # agreement vector in finite time, and every weak component must
        # keep a node that is an out-neighbor of all its nodes.
        from opinion_lab.stability import _weak_components

        rng = np.random.default_rng(109)
        checked = 0
        trials = 0
        while checked < 200 and trials < 20000:
            trials += 1
            n = int(rng.integers(2, 9))
            kind = Model.SBC if rng.random() < 0.5 else Model.SBI
            k = int(rng.integers(1, 4))
            centers = np.cumsum(rng.uniform(3.0, 5.0, k))
            y = centers[rng.integers(0, k, n)] + rng.uniform(-0.3, 0.3, n)
            r = rng.uniform(0.05, 1.2, n)
            state = OpinionState(y, r, kind)
            result = check_agreement_sufficient(state)
            if not result.predicted_finite_time:
                continue
            checked += 1
            traj = simulate(state, max_steps=2000, limit_tol=0.0)
            assert traj.termination is Termination.FIXED_STATE
            assert is_agreement_vector(traj.final_state())
            for x in traj.states:
                s_now = state.with_opinions(x)
                g = build_digraph(s_now)
                for members in _weak_components(s_now):
                    assert any(
                        all(j in g.out_neighbors[i] for i in members)
                        for j in members
                    )
        assert checked == 200


class TestLimitEquilibrium:
    def test_three_agent_limit(self, fig41_state):
        traj = simulate(fig41_state, max_steps=500)
        verdict = check_limit_equilibrium(traj)
        assert np.allclose(verdict.x_infinity, [0.0, 0.5, 1.0], atol=1e-12)
        assert verdict.min_epsilon == pytest.approx(0.125)
        assert verdict.premise_holds
        assert verdict.topology_matches_tail
        assert verdict.limit_is_equilibrium

    def test_boundary_limit_premise_fails(self):
        # Agent 2 chases agent 1 down to 0.5; its limit sits at distance
        # exactly equal to its own bound from agent 0 (all dyadic, so the
        # zero slack is exact).  Agent 1's tiny bound keeps it from ever
        # reciprocating.
        state = OpinionState(
            [0.0, 0.5, 0.5 + 2.0**-20], [0.1, 1e-12, 0.5], Model.SBC
        )
        traj = simulate(state, max_steps=10, limit_tol=1e-12)
        assert traj.termination is Termination.MAX_STEPS
        verdict = check_limit_equilibrium(traj)
        assert np.array_equal(verdict.x_infinity, [0.0, 0.5, 0.5])
        assert verdict.min_epsilon == 0.0
        assert not verdict.premise_holds
        assert verdict.topology_matches_tail is None
        assert not verdict.premise_holds
        assert verdict.topology_matches_tail is None

    def test_finite_time_agreement_premise_holds(self):
        state = OpinionState(
            [0.0, 0.1, 5.0, 5.1], [0.2, 0.2, 0.2, 0.2], Model.SBC
        )
        traj = simulate(state, max_steps=200, limit_tol=0.0)
        verdict = check_limit_equilibrium(traj)
        assert verdict.premise_holds
        assert verdict.limit_is_equilibrium

    def test_unconverged_trajectory_rejected(self, fig41_state):
        traj = simulate(fig41_state, max_steps=3, limit_tol=0.0)
        with pytest.raises(ValueError):
            check_limit_equilibrium(traj)


class TestConstantTopologyTheorem:
    def build_equilibrium(self, rng, n):
        """Random agreement-vector equilibrium with min delta > 0."""
        k = int(rng.integers(1, max(2, n // 2) + 1))
        centers = np.cumsum(rng.uniform(2.0, 3.0, k))
        y = centers[rng.integers(0, k, n)]
        r = rng.uniform(0.1, 0.6, n)
        kind = Model.SBC if rng.random() < 0.5 else Model.SBI
        return OpinionState(y, r, kind)

    def test_invariant_neighborhood_traps_trajectories(self):
        rng = np.random.default_rng(113)
        checked = 0
        while checked < 50:
            n = int(rng.integers(2, 10))
            z_state = self.build_equilibrium(rng, n)
            if not is_equilibrium(z_state, tol=0.0):
                continue
            eps = equi_topology_distance(z_state)
            delta = invariant_equi_topology_distance(z_state, eps)
            if delta.min() <= 0.0:
                continue
            checked += 1
            x0 = sample_in_neighborhood(rng, z_state.opinions, delta, scale=0.9)
            assert in_neighborhood(x0, z_state, delta)
            x0_state = z_state.with_opinions(x0)
            f0 = fvct(x0_state)
            traj = simulate(x0_state, max_steps=200, limit_tol=0.0)
            gz_edges = build_digraph(z_state).out_neighbors
            for x in traj.states:
                assert in_neighborhood(x, z_state, eps)
                s_now = z_state.with_opinions(x)
                assert build_digraph(s_now).out_neighbors == gz_edges
                c = classify(build_digraph(s_now))
                assert not any(cl is SccClass.MODERATE for cl in c.classes)
            assert np.max(np.abs(traj.states[-1] - f0)) < 1e-10


class TestStabilityReport:
    def test_equilibrium_report(self):
        state = OpinionState([0.0, 0.5, 1.0], [0.25, 1.0, 0.25], Model.SBC)
        report = stability_report(state)
        assert report.is_equilibrium
        assert not report.is_agreement
        assert report.in_et_of_fvct
        assert report.in_iet_of_fvct
        data = report.to_json()
        assert data["epsilon"] == [0.125, 0.125, 0.125]

    def test_special_case_state(self, fig41_state):
        report = stability_report(fig41_state)
        assert not report.is_equilibrium
        assert report.in_iet_of_fvct

    def test_single_agent_inf_serializes(self):
        report = stability_report(OpinionState([0.2], [0.1]))
        assert report.to_json()["epsilon"] == ["inf"]
