import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collabsearch.obsgraph import (BeliefField, as_source, build_graph,
                                   compute_scores, export_rasters, isolation,
                                   mark_explored, observability, search_reward)
from collabsearch.sources import Nature, Policy, evaluate
from collabsearch.worldmap import grid_from_rows
from oracles import direct_scores, obs_sets_from_oracle, random_grid

LN2 = math.log(2.0)


def chain_map(n):
    return grid_from_rows(["." * n])


class TestBuildGraph:
    def test_open_1x3_full_visibility(self):
        g = chain_map(3)
        graph = build_graph(g, sense_radius=5.0)
        for p in range(3):
            assert sorted(graph.obs(p).tolist()) == [0, 1, 2]

    def test_walled_off_cell_sees_itself(self):
        g = grid_from_rows(["#.#",
                            "###"])  # single free cell surrounded by walls
        graph = build_graph(g, 10.0)
        assert graph.obs(0).tolist() == [0]

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(7)
        g = random_grid(rng, max_side=20, density=0.25)
        radius = 6.0
        graph = build_graph(g, radius)
        want = obs_sets_from_oracle(g, radius)
        for p in range(g.n_free):
            assert graph.obs(p).tolist() == want[p]

    def test_contains_self_and_symmetric(self):
        rng = np.random.default_rng(3)
        g = random_grid(rng, max_side=12, density=0.3)
        graph = build_graph(g, 100.0)
        sets = [set(graph.obs(p).tolist()) for p in range(g.n_free)]
        for p in range(g.n_free):
            assert p in sets[p]
            for q in sets[p]:
                assert p in sets[q]

    def test_radius_must_be_positive(self):
        with pytest.raises(ValueError):
            build_graph(chain_map(3), 0.0)


class TestObservability:
    def test_uniform_open_chain(self):
        graph = build_graph(chain_map(3), 5.0)
        O = observability(graph, BeliefField.uniform(graph.grid))
        assert O.tolist() == [3.0, 3.0, 3.0]

    def test_fully_explored_zero(self):
        graph = build_graph(chain_map(3), 5.0)
        b = BeliefField(np.zeros(3))
        assert observability(graph, b).tolist() == [0.0, 0.0, 0.0]

    def test_partial_belief_direct_sum(self):
        # 4-cell chain, radius restricts obs(p0) to {p0, p1}
        graph = build_graph(chain_map(4), 1.0)
        assert sorted(graph.obs(0).tolist()) == [0, 1]
        b = BeliefField(np.array([1.0, 1.0, 0.0, 1.0]))
        O = observability(graph, b)
        assert O[0] == 2.0


class TestIsolation:
    def test_isolated_cell(self):
        g = grid_from_rows(["#.#", "###"])
        graph = build_graph(g, 10.0)
        O = observability(graph, BeliefField(np.array([1.0])))
        I = isolation(graph, O)
        assert I[0] == 1.0

    def test_uniform_chain(self):
        graph = build_graph(chain_map(3), 5.0)
        O = observability(graph, BeliefField.uniform(graph.grid))
        I = isolation(graph, O)
        assert np.allclose(I, 1.0)  # (3/9)*3 per cell

    def test_explored_degenerate_zero(self):
        graph = build_graph(chain_map(3), 5.0)
        O = observability(graph, BeliefField(np.zeros(3)))
        assert isolation(graph, O).tolist() == [0.0, 0.0, 0.0]


class TestSearchReward:
    def test_uniform_chain_hits_ln2(self):
        graph = build_graph(chain_map(3), 5.0)
        sc = compute_scores(graph, BeliefField.uniform(graph.grid),
                            w_obs=0.8, w_iso=0.2)
        assert np.allclose(sc.S, 1.0)
        assert np.allclose(sc.R, LN2)

    def test_zero_belief_zero_reward(self):
        graph = build_graph(chain_map(3), 5.0)
        sc = compute_scores(graph, BeliefField(np.zeros(3)))
        assert np.all(sc.R == 0.0)

    def test_chain_matches_hand_evaluation(self):
        # 4-cell chain, radius 1.5 cells: obs(p) = neighbors within 1 step
        graph = build_graph(chain_map(4), 1.5)
        B = np.array([1.0, 1.0, 1.0, 0.0])
        sc = compute_scores(graph, BeliefField(B), 0.8, 0.2)
        obs_sets = [graph.obs(p).tolist() for p in range(4)]
        assert obs_sets == [[0, 1], [0, 1, 2], [1, 2, 3], [2, 3]]
        O, I, S, R = direct_scores(obs_sets, B, 0.8, 0.2)
        np.testing.assert_allclose(sc.O, O, atol=1e-12)
        np.testing.assert_allclose(sc.I, I, atol=1e-12)
        np.testing.assert_allclose(sc.S, S, atol=1e-12)
        np.testing.assert_allclose(sc.R, R, atol=1e-12)

    def test_invalid_weights(self):
        with pytest.raises(ValueError):
            search_reward(np.ones(2), np.ones(2), 0.0, 0.0)


class TestPipelineOracle:
    @pytest.mark.parametrize("seed", range(10))
    def test_matches_direct_formula_evaluation(self, seed):
        rng = np.random.default_rng(seed)
        g = random_grid(rng, max_side=10, density=0.25)
        radius = float(rng.uniform(1.5, 6.0))
        graph = build_graph(g, radius)
        B = np.ones(g.n_free)
        explored = rng.random(g.n_free) < rng.uniform(0.0, 0.9)
        B[explored] = 0.0
        sc = compute_scores(graph, BeliefField(B), 0.8, 0.2)
        obs_sets = [graph.obs(p).tolist() for p in range(g.n_free)]
        O, I, S, R = direct_scores(obs_sets, B, 0.8, 0.2)
        np.testing.assert_allclose(sc.O, O, atol=1e-9)
        np.testing.assert_allclose(sc.I, I, atol=1e-9)
        np.testing.assert_allclose(sc.S, S, atol=1e-9)
        np.testing.assert_allclose(sc.R, R, atol=1e-9)
        if sc.S.max() > 0:
            assert sc.R.max() == pytest.approx(LN2, abs=1e-12)


class TestMarkExplored:
    def test_mark_all(self):
        b = BeliefField(np.ones(5))
        assert mark_explored(b, range(5)).values.sum() == 0.0

    def test_mark_none_identity(self):
        b = BeliefField(np.ones(5))
        out = mark_explored(b, [])
        assert out.values.tolist() == b.values.tolist()

    def test_mass_accounting(self):
        b = BeliefField(np.ones(10))
        out = mark_explored(b, [1, 4, 7])
        assert out.values.sum() == 7.0

    def test_idempotent(self):
        b = BeliefField(np.ones(6))
        once = mark_explored(b, {2, 3})
        twice = mark_explored(once, {2, 3})
        assert np.array_equal(once.values, twice.values)

    @given(st.integers(0, 1000))
    @settings(max_examples=25, deadline=None)
    def test_marking_never_increases_observability(self, seed):
        rng = np.random.default_rng(seed)
        g = random_grid(rng, max_side=8, density=0.2)
        graph = build_graph(g, 4.0)
        b = BeliefField.uniform(g)
        O0 = observability(graph, b)
        cells = rng.choice(g.n_free, size=rng.integers(0, g.n_free + 1),
                           replace=False)
        O1 = observability(graph, mark_explored(b, cells))
        assert np.all(O1 <= O0 + 1e-12)


class TestScaleInvariance:
    @pytest.mark.parametrize("scale", [0.1, 3.0, 250.0])
    def test_argmax_unchanged_by_belief_scaling(self, scale):
        rng = np.random.default_rng(11)
        g = random_grid(rng, max_side=10, density=0.2)
        graph = build_graph(g, 4.0)
        B = np.ones(g.n_free)
        B[rng.random(g.n_free) < 0.4] = 0.0
        r1 = compute_scores(graph, BeliefField(B)).R
        r2 = compute_scores(graph, BeliefField(B * scale)).R
        assert np.array_equal(np.nonzero(r1 == r1.max())[0],
                              np.nonzero(r2 == r2.max())[0])


class TestAsSource:
    def test_contract_fields(self):
        graph = build_graph(chain_map(3), 5.0)
        sc = compute_scores(graph, BeliefField.uniform(graph.grid))
        src = as_source(sc, graph)
        assert src.nature is Nature.FINAL
        assert src.policies == frozenset({Policy.SELECTION})

    def test_zero_field_evaluates_zero(self):
        graph = build_graph(chain_map(3), 5.0)
        sc = compute_scores(graph, BeliefField(np.zeros(3)))
        src = as_source(sc, graph)
        for cid in range(3):
            assert evaluate(src, graph.grid.cell_center(cid)) == 0.0

    def test_unique_max_cell_is_evaluate_argmax(self):
        rng = np.random.default_rng(5)
        g = random_grid(rng, max_side=9, density=0.2)
        graph = build_graph(g, 3.0)
        B = np.ones(g.n_free)
        B[rng.random(g.n_free) < 0.5] = 0.0
        sc = compute_scores(graph, BeliefField(B))
        src = as_source(sc, graph)
        vals = [evaluate(src, g.cell_center(c)) for c in range(g.n_free)]
        assert math.isclose(max(vals), sc.R.max())
        assert src.shape.center.xy == g.cell_center(int(np.argmax(sc.R)))


class TestExport:
    def test_raster_shape_and_mask(self):
        g = grid_from_rows(["..#", "..."])
        graph = build_graph(g, 5.0)
        sc = compute_scores(graph, BeliefField.uniform(g))
        out = export_rasters(graph, sc)
        assert out["width"] == 3 and out["height"] == 2
        assert out["reward"][0][2] is None  # blocked cell
        assert isinstance(out["observability"][0][0], float)
