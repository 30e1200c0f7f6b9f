from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from helpers import all_graphs, g_signaling_dimension, random_game
from lcgames import classical_engine, games
from lcgames.game_model import (ConnectivityGraph, GameError, LatencyFunction, MultiStepGame, Scenario,
                                SimpleLCGame, aggregate_clique, algebraic_value, check_behavior,
                                connectivity_graph, discretize_times, forwarding_transform,
                                game_from_dict, game_to_dict, induced_simple_game, is_g_signaling,
                                light_cone_sizes, parse_game, past_light_cone, reported_value,
                                serialize_game, signaling_dimension_bound, siso_game, transport_behavior,
                                winning_probability, with_horizon)

seeds = st.integers(0, 2 ** 32 - 1)


def test_scenario_rejects_mismatched_lengths():
    with pytest.raises(GameError):
        Scenario((2, 2), (2,))


def test_graph_rejects_self_loop():
    with pytest.raises(GameError):
        ConnectivityGraph(2, [(0, 0)])


def test_graph_neighbourhoods():
    graph = ConnectivityGraph(3, [(0, 2), (1, 2), (2, 0)])
    assert graph.closed_in(2) == (2, 0, 1)
    assert graph.out_neighbors(2) == (0,)
    assert ConnectivityGraph.complete(3).edges == ConnectivityGraph.bidirected(3, [(0, 1), (0, 2), (1, 2)]).edges


@pytest.mark.parametrize("matrix", [[[0, 1], [1, 1]], [[1, 0], [1, 1]], [[1, 1, 1], [1, 1]]])
def test_latency_rejects_bad_matrices(matrix):
    with pytest.raises(GameError):
        LatencyFunction(matrix, 1)


def test_latency_self_rule_message():
    with pytest.raises(GameError, match=r"latency\[0\]\[0\] must be 1"):
        LatencyFunction([[0, 1], [1, 1]], 1)


def test_prior_must_sum_to_one():
    with pytest.raises(GameError, match="prior"):
        SimpleLCGame(Scenario((2, 2), (2, 2)), np.ones((2, 2, 2, 2)), [0.3, 0.3, 0.2, 0.1])


def test_predicate_range():
    with pytest.raises(GameError, match="predicate"):
        SimpleLCGame(Scenario((1, 1), (2, 2)), 2 * np.ones((1, 1, 2, 2)))


def test_check_behavior_normalisation():
    scenario = Scenario((1, 1), (2, 2))
    with pytest.raises(GameError):
        check_behavior(np.full((1, 1, 2, 2), 0.3), scenario)
    check_behavior(np.full((1, 1, 2, 2), 0.25), scenario)


def test_winning_probability_of_uniform_noise_on_chsh():
    game = games.distributed_chsh()
    behavior = np.full(game.predicate.shape, 1 / 8)
    # the first two outputs agree half the time, and then the CHSH condition holds half the time
    assert winning_probability(game, behavior) == pytest.approx(0.25)


def test_score_maps_value():
    game = games.random_xor()
    scale, offset = game.score
    assert reported_value(game, 0.5) == pytest.approx(scale * 0.5 + offset)
    assert reported_value(game, None) is None


def test_connectivity_graph_from_latency():
    lat = LatencyFunction([[1, 1, 2], [1, 1, 3], [2, 3, 1]], 2)
    assert connectivity_graph(lat).edges == {(0, 1), (1, 0), (0, 2), (2, 0)}
    assert connectivity_graph(lat.with_tau(0)).edges == frozenset()


def test_past_light_cone_on_latency():
    lat = LatencyFunction([[1, 1, 2], [1, 1, 3], [2, 3, 1]], 2)
    assert past_light_cone(lat, 2, 2) == [(2, 0), (2, 1), (2, 2), (0, 0)]
    assert past_light_cone(lat, 0, 1) == [(0, 0), (0, 1), (1, 0)]
    graph = ConnectivityGraph(2, [(1, 0)])
    assert past_light_cone(graph, 0) == [(0, 0), (1, 0)]


def test_light_cone_sizes_for_extended_xor():
    assert light_cone_sizes(games.extended_xor_game(11)) == [3, 3, 3]


def test_siso_helpers():
    game = games.perturbed_xor()
    assert game.is_siso()
    earlier = with_horizon(game, 1)
    assert earlier.tau == 1 and induced_simple_game(earlier).graph.edges == {(0, 1), (1, 0)}
    multi = MultiStepGame([[2, 2], [1, 1]], [[2, 2], [2, 1]], np.ones((4, 1, 4, 2)), None,
                          LatencyFunction([[1, 1], [1, 1]], 1))
    assert not multi.is_siso()
    with pytest.raises(GameError):
        induced_simple_game(multi)


def test_algebraic_value_of_chsh_variants():
    assert algebraic_value(games.distributed_chsh()) == 1.0


def test_discretize_times():
    t0, units = discretize_times(["3/4", 1, Fraction(1, 6)])
    assert t0 == Fraction(1, 12)
    assert units == [9, 12, 2]
    with pytest.raises(TypeError):
        discretize_times([0.5])
    with pytest.raises(GameError):
        discretize_times([0])


def test_json_round_trip_catalog():
    for name in ("distributed-chsh", "random-xor", "perturbed-xor", "extended-xor:11"):
        game = games.get_game(name)
        assert parse_game(serialize_game(game)) == game


def test_json_errors_name_fields():
    doc = game_to_dict(games.distributed_chsh())
    doc["prior"] = [0.1] * 16
    with pytest.raises(GameError, match="prior"):
        game_from_dict(doc)
    doc = game_to_dict(games.distributed_chsh())
    doc["parties"] = "three"
    with pytest.raises(GameError, match="parties"):
        game_from_dict(doc)
    with pytest.raises(GameError, match="invalid JSON"):
        parse_game("{")


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_json_round_trip_random(seed):
    game = random_game(np.random.default_rng(seed), binary_predicate=False)
    assert parse_game(serialize_game(game)) == game


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_forwarding_transform_keeps_classical_value(seed):
    game = random_game(np.random.default_rng(seed), n=3)
    direct = classical_engine.classical_value(game).value
    transformed = classical_engine.classical_value(forwarding_transform(game)).value
    assert transformed == pytest.approx(direct, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_transport_behavior_keeps_winning_probability(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng)
    cones = forwarding_transform(game)
    n = game.n
    raw = rng.random(cones.scenario.shape)
    behavior = raw / raw.sum(axis=tuple(range(n, 2 * n)), keepdims=True)
    moved = transport_behavior(game, behavior)
    assert winning_probability(game, moved) == pytest.approx(winning_probability(cones, behavior), abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_aggregating_a_bidirected_pair_keeps_classical_value(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng, n=3, graph=ConnectivityGraph.bidirected(3, [(0, 1)]))
    merged = aggregate_clique(game, [0, 1])
    assert merged.n == 2 and not merged.graph.edges
    assert classical_engine.classical_value(merged).value == pytest.approx(
        classical_engine.classical_value(game).value, abs=1e-12)


def test_aggregation_rejects_non_isolated_group():
    game = games.random_xor(ConnectivityGraph.bidirected(3, [(0, 1), (1, 2)]))
    with pytest.raises(GameError, match="not isolated"):
        aggregate_clique(game, [0, 1])


def test_quantum_aggregation_needs_round_trip_hub():
    game = with_horizon(games.perturbed_xor(), 1)
    with pytest.raises(GameError, match="no vertex"):
        aggregate_clique(game, [0, 2], mode="quantum")
    assert aggregate_clique(with_horizon(games.perturbed_xor(), 2), [0, 1], mode="quantum").n == 2


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_deterministic_behaviors_are_g_signaling(seed):
    rng = np.random.default_rng(seed)
    game = random_game(rng)
    strategy = next(classical_engine.enumerate_strategies(game))
    assert is_g_signaling(classical_engine.behavior_of(strategy, game), game.graph)[0]


def test_signalling_behavior_detected():
    # party 1 copies party 0's input on the empty graph
    behavior = np.zeros((2, 1, 2, 2))
    for s in range(2):
        behavior[s, 0, 0, s] = 1.0
    assert not is_g_signaling(behavior, ConnectivityGraph.empty(2))[0]
    assert is_g_signaling(behavior, ConnectivityGraph(2, [(0, 1)]))[0]


@pytest.mark.parametrize("n", [2, 3])
def test_signaling_dimension_matches_rank_oracle(n):
    scenario = Scenario((2,) * n, (2,) * n)
    for graph in all_graphs(n):
        assert signaling_dimension_bound(scenario, graph) == g_signaling_dimension(scenario, graph)


def test_siso_game_shapes():
    lat = LatencyFunction([[1, 2], [2, 1]], 2)
    game = siso_game(np.ones((2, 2, 2, 2)), None, lat, (2, 2), (2, 2))
    assert game.input_steps == ((2, 1, 1), (2, 1, 1))
    assert game.output_steps == ((1, 1, 2), (1, 1, 2))
