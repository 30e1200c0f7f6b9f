import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from lcgames import games
from lcgames.estimators import (AggregatedUpperBound, ClassicalValue, ForwardingUpperBound, LatencySweep,
                                NPAUpperBound, SeesawLowerBound, check_game)
from lcgames.game_model import GameError, with_horizon


def test_params_round_trip():
    est = SeesawLowerBound(restarts=4, seed=9)
    assert est.get_params()["restarts"] == 4
    copy = clone(est).set_params(seed=1)
    assert copy.seed == 1 and est.seed == 9


def test_unfitted_estimator():
    with pytest.raises(NotFittedError):
        ClassicalValue().reported_value()
    with pytest.raises(NotFittedError):
        LatencySweep().to_csv()


def test_classical_estimator():
    est = ClassicalValue().fit(games.distributed_chsh())
    assert est.value_ == 0.75 and est.reported_value() == 0.75
    assert est.n_strategies_ > 0


def test_reported_value_uses_score():
    est = NPAUpperBound(level=2).fit(games.random_xor())
    assert est.reported_value() == pytest.approx(0.37157, abs=1e-4)
    assert est.value_ != pytest.approx(est.reported_value())


def test_bounds_sandwich_seesaw():
    game = games.distributed_chsh()
    lower = SeesawLowerBound(restarts=3, seed=2).fit(game)
    upper = AggregatedUpperBound(level=1).fit(game)
    assert 0.75 - 1e-6 <= lower.value_ <= upper.value_ + 1e-5
    assert len(lower.history_) >= 1
    assert np.trace(lower.rho_).real == pytest.approx(1.0)


def test_forwarding_estimator():
    assert ForwardingUpperBound().fit(games.extended_chsh()).value_ == pytest.approx(0.75, abs=1e-4)


def test_npa_rejects_communication():
    with pytest.raises(GameError):
        NPAUpperBound().fit(games.distributed_chsh())


def test_check_game():
    with pytest.raises(GameError):
        check_game(np.zeros(3))
    simple = check_game(with_horizon(games.perturbed_xor(), 0), simple=True)
    assert not simple.graph.edges


def test_latency_sweep_estimator():
    est = LatencySweep(taus=[3]).fit(games.perturbed_xor())
    assert est.results_[0].regime == "full"
    assert est.to_csv().startswith("tau,")
    with pytest.raises(GameError):
        LatencySweep().fit(games.distributed_chsh())
