import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from trajrisk.bounds import (
    LOWER,
    UPPER,
    bounds_from_probabilities,
    compute_report,
    dawson_sankoff,
    first_order_bounds,
    max_spanning_tree,
    second_order_scalar_bounds,
    tree_bounds,
)
from trajrisk.collision import all_collision_probs
from trajrisk.distribution import propagate
from trajrisk.fixtures import demo_scenario, random_scenario
from trajrisk.lqg import synthesize


class DiscreteSpace:
    """Finite probability space: ``probs[k]`` is the mass of outcome k and
    ``member[k, i]`` says whether outcome k belongs to event i."""

    def __init__(self, probs, member):
        self.probs = np.asarray(probs, float)
        self.member = np.asarray(member, bool)

    @property
    def p(self):
        return self.probs @ self.member

    @property
    def pairs(self):
        m = self.member.astype(float)
        return (m * self.probs[:, None]).T @ m

    @property
    def union(self):
        return float(self.probs[self.member.any(axis=1)].sum())


def _atoms(n, masses):
    """Space whose outcomes are the subsets of n events with the given masses."""
    subsets = list(itertools.product([False, True], repeat=n))
    return DiscreteSpace([masses.get(s, 0.0) for s in subsets], subsets)


def check_invariants(r, tol):
    assert r.hunter_opt <= r.hunter_chain + tol
    assert r.hunter_chain <= r.boole + tol
    assert r.hunter_opt <= r.kounias + tol
    assert r.kounias <= r.boole + tol
    assert r.hunter_opt <= r.kwerel + tol
    assert r.dawson >= r.bonferroni2 - tol
    for v in list(r.upper().values()) + list(r.lower().values()):
        assert 0.0 <= v <= 1.0


def test_single_event():
    assert first_order_bounds([0.3]) == (0.3, 0.3)


def test_clamping():
    assert first_order_bounds([0.6, 0.6]) == (1.0, 0.6)


def test_independent_pair():
    space = DiscreteSpace([0.72, 0.18, 0.08, 0.02], [[0, 0], [0, 1], [1, 0], [1, 1]])
    boole, frechet = first_order_bounds(space.p)
    assert space.union == pytest.approx(0.28)
    assert frechet == pytest.approx(0.2) and boole == pytest.approx(0.3)
    assert frechet <= space.union <= boole


def test_empty_vector_rejected():
    with pytest.raises(ValueError):
        first_order_bounds([])


def test_disjoint_events_scalar_bounds():
    assert second_order_scalar_bounds(0.4, 0.0, 4) == pytest.approx((0.4, 0.4, 0.4))


def test_three_event_scalar_bounds():
    kw, bonf, daw = second_order_scalar_bounds(0.6, 0.15, 3)
    assert kw == pytest.approx(0.5, abs=1e-15)
    assert bonf == pytest.approx(0.45, abs=1e-15)
    assert daw == pytest.approx(0.45, abs=1e-15)
    # explicit 8-outcome space with these p_t, p_st (triple intersection 0.02)
    triple = (True, True, True)
    masses = {triple: 0.02, (False,) * 3: 0.53}
    for i in range(3):
        only = tuple(j == i for j in range(3))
        masses[only] = 0.12
        pair = tuple(j != i for j in range(3))
        masses[pair] = 0.03
    space = _atoms(3, masses)
    np.testing.assert_allclose(space.p, 0.2)
    np.testing.assert_allclose(space.pairs[np.triu_indices(3, 1)], 0.05)
    assert space.probs.sum() == pytest.approx(1.0)
    assert max(bonf, daw) <= space.union <= kw


def test_zero_mass_scalar_bounds():
    assert second_order_scalar_bounds(0.0, 0.0, 5) == (0.0, 0.0, 0.0)
    assert dawson_sankoff(0.0, 0.0) == 0.0


def test_dawson_integer_k():
    # 2 S2 / S1 = 1.5 -> k = 2: 2/3 S1 - 1/3 S2
    assert dawson_sankoff(0.4, 0.3) == pytest.approx(2 / 3 * 0.4 - 1 / 3 * 0.3)


def test_tree_bounds_without_pairs():
    p = np.array([0.2, 0.3, 0.1])
    kou, hun, chain, tree = tree_bounds(p, np.zeros((3, 3)))
    assert kou == hun == chain == pytest.approx(0.6)
    assert len(tree) == 2


def test_chain_is_optimal_tree():
    p = np.full(4, 0.1)
    W = np.zeros((4, 4))
    for s, t in ((0, 1), (1, 2), (2, 3)):
        W[s, t] = W[t, s] = 0.04
    kou, hun, chain, tree = tree_bounds(p, W)
    assert hun == pytest.approx(0.28, abs=1e-15)
    assert chain == pytest.approx(0.28, abs=1e-15)
    assert kou == pytest.approx(0.32, abs=1e-15)
    assert sorted(tree) == [(0, 1), (1, 2), (2, 3)]


def test_chain_event_space_union():
    # realizes the 4-event example; the union equals the Hunter bound here
    masses = {
        (True, True, False, False): 0.04, (False, True, True, False): 0.04,
        (False, False, True, True): 0.04, (True, False, False, False): 0.06,
        (False, True, False, False): 0.02, (False, False, True, False): 0.02,
        (False, False, False, True): 0.06,
    }
    masses[(False,) * 4] = 1.0 - sum(masses.values())
    space = _atoms(4, masses)
    r = bounds_from_probabilities(space.p, space.pairs)
    assert r.hunter_opt == pytest.approx(0.28)
    assert space.union == pytest.approx(r.hunter_opt)


def test_star_beats_chain():
    p = np.full(3, 0.1)
    W = np.array([[0, 0.05, 0.08], [0.05, 0, 0.05], [0.08, 0.05, 0]])
    kou, hun, chain, tree = tree_bounds(p, W)
    assert hun == pytest.approx(0.17, abs=1e-15)
    assert chain == pytest.approx(0.20, abs=1e-15)
    assert kou == pytest.approx(0.17, abs=1e-15)
    # weight tie between (0,1) and (1,2) resolved lexicographically
    assert tree == [(0, 2), (0, 1)]


def test_spanning_tree_brute_force():
    rng = np.random.default_rng(4)
    import networkx as nx

    for _ in range(30):
        n = int(rng.integers(2, 7))
        W = rng.uniform(0, 1, (n, n))
        W = np.triu(W, 1)
        W = W + W.T
        edges, weight = max_spanning_tree(W)
        G = nx.Graph()
        for s in range(n):
            for t in range(s + 1, n):
                G.add_edge(s, t, weight=W[s, t])
        ref = nx.maximum_spanning_tree(G).size(weight="weight")
        assert weight == pytest.approx(ref, rel=1e-12)
        assert len(edges) == n - 1


def test_report_from_hand_built_probabilities():
    p = np.full(4, 0.1)
    W = np.zeros((4, 4))
    for s, t in ((0, 1), (1, 2), (2, 3)):
        W[s, t] = W[t, s] = 0.04
    r = bounds_from_probabilities(p, W)
    assert r.S1 == pytest.approx(0.4) and r.S2 == pytest.approx(0.12)
    assert r.hunter_opt == pytest.approx(0.28)
    assert r.hunter_chain == pytest.approx(0.28)
    assert r.kounias == pytest.approx(0.32)
    assert r.kwerel == pytest.approx(0.4 - 2 / 4 * 0.12)
    assert r.frechet == pytest.approx(0.1)
    check_invariants(r, 0.0)
    assert set(r.as_dict()["bounds"]) == set(UPPER) | set(LOWER)
    assert set(UPPER) | set(LOWER) <= set(r.timings)
    # the report agrees with the standalone helpers
    kou, hun, chain, tree = tree_bounds(p, W)
    assert (r.kounias, r.hunter_opt, r.hunter_chain, r.tree) == (kou, hun, chain, tree)
    assert (r.kwerel, r.bonferroni2, r.dawson) == second_order_scalar_bounds(r.S1, r.S2, 4)


def test_obstacle_free_report():
    scn = random_scenario(np.random.default_rng(2), n_obstacles=0, horizon=8)
    dist = propagate(synthesize(scn.system), scn.plan.positions)
    r = compute_report(all_collision_probs(dist, []))
    assert all(v == 0.0 for v in r.upper().values())
    assert all(v == 0.0 for v in r.lower().values())


def test_fixture_report_invariants():
    scn = demo_scenario(steps_per_segment=5)
    dist = propagate(synthesize(scn.system), scn.plan.positions)
    cp = all_collision_probs(dist, scn.obstacles, tolerance=1e-5)
    r = compute_report(cp)
    check_invariants(r, 0.0)
    assert r.frechet <= r.boole
    assert all(e >= 0 for e in r.errors.values())
    assert r.errors["kounias"] >= r.errors["hunter_chain"]


@st.composite
def discrete_spaces(draw):
    n_events = draw(st.integers(1, 6))
    n_outcomes = draw(st.integers(1, 12))
    weights = draw(st.lists(st.floats(0.0, 1.0), min_size=n_outcomes, max_size=n_outcomes))
    if sum(weights) == 0.0:
        weights[0] = 1.0
    member = draw(st.lists(
        st.lists(st.booleans(), min_size=n_events, max_size=n_events),
        min_size=n_outcomes, max_size=n_outcomes,
    ))
    probs = np.array(weights) / sum(weights)
    return DiscreteSpace(probs, member)


@settings(max_examples=300, deadline=None)
@given(discrete_spaces())
def test_bounds_contain_exact_union(space):
    r = bounds_from_probabilities(space.p, space.pairs)
    tol = 1e-12
    check_invariants(r, tol)
    assert max(r.lower().values()) <= space.union + tol
    assert min(r.upper().values()) >= space.union - tol
