"""Estimator-style wrappers: configure in ``__init__``, ``fit(game)``, read ``value_``.

They follow scikit-learn's parameter conventions so ``get_params`` /
``set_params`` / ``clone`` work, but ``fit`` takes a game rather than
``(X, y)`` arrays.
"""

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import bounds, classical_engine, seesaw
from .game_model import GameError, MultiStepGame, SimpleLCGame, induced_simple_game, reported_value


def check_game(game, simple=False):
    """Return ``game`` (or its induced one-round game when ``simple``), rejecting anything else."""
    if not isinstance(game, (SimpleLCGame, MultiStepGame)):
        raise GameError(f"expected an LC game, got {type(game).__name__}")
    if simple and isinstance(game, MultiStepGame):
        return induced_simple_game(game)
    return game


class _ValueEstimator(BaseEstimator):
    def reported_value(self):
        check_is_fitted(self, "value_")
        return reported_value(self.game_, self.value_)

    def __sklearn_is_fitted__(self):
        return hasattr(self, "value_")


class ClassicalValue(_ValueEstimator):
    def __init__(self, jobs=1):
        self.jobs = jobs

    def fit(self, game):
        self.game_ = check_game(game)
        result = classical_engine.classical_value(self.game_, jobs=self.jobs)
        self.value_ = result.value
        self.strategy_ = result.strategy
        self.n_strategies_ = result.strategies_examined
        return self


class SeesawLowerBound(_ValueEstimator):
    """See-saw over quantum combs; ``local_dims=None`` means a qubit per party."""

    def __init__(self, restarts=1, seed=0, tol=seesaw.DEFAULT_TOL, local_dims=None, channel_dims=None,
                 max_sweeps=200, jobs=1):
        self.restarts = restarts
        self.seed = seed
        self.tol = tol
        self.local_dims = local_dims
        self.channel_dims = channel_dims
        self.max_sweeps = max_sweeps
        self.jobs = jobs

    def fit(self, game, trace=None):
        self.game_ = check_game(game, simple=True)
        config = seesaw.SeesawConfig(local_dims=self.local_dims, channel_dims=self.channel_dims,
                                     restarts=self.restarts, tol=self.tol, seed=self.seed,
                                     max_sweeps=self.max_sweeps, jobs=self.jobs)
        result = seesaw.seesaw_optimize(self.game_, config, trace=trace)
        self.value_ = result.value
        self.rho_ = result.rho
        self.combs_ = result.combs
        self.history_ = result.sweeps
        return self


class NPAUpperBound(_ValueEstimator):
    def __init__(self, level=2, form="auto"):
        self.level = level
        self.form = form

    def fit(self, game):
        self.game_ = check_game(game, simple=True)
        if self.game_.graph.edges:
            raise GameError("NPA bound needs a game without communication")
        self.value_ = bounds.npa_upper_bound(self.game_, self.level, form=self.form)
        return self


class ForwardingUpperBound(_ValueEstimator):
    def __init__(self, level=2):
        self.level = level

    def fit(self, game):
        self.game_ = check_game(game, simple=True)
        self.value_ = bounds.forwarding_upper_bound(self.game_, self.level)
        return self


class AggregatedUpperBound(_ValueEstimator):
    def __init__(self, clique=None, level=2, method="auto"):
        self.clique = clique
        self.level = level
        self.method = method

    def fit(self, game):
        self.game_ = check_game(game)
        self.value_ = bounds.aggregated_upper_bound(self.game_, self.clique, self.level, self.method)
        return self


class LatencySweep(BaseEstimator):
    def __init__(self, taus=None, level=2, restarts=1, seed=0, jobs=1):
        self.taus = taus
        self.level = level
        self.restarts = restarts
        self.seed = seed
        self.jobs = jobs

    def fit(self, game):
        if not isinstance(game, MultiStepGame):
            raise GameError("latency sweep needs a SISO multi-step game")
        taus = range(game.tau + 1) if self.taus is None else self.taus
        config = seesaw.SeesawConfig(restarts=self.restarts, seed=self.seed, jobs=self.jobs)
        self.results_ = bounds.latency_sweep(game, taus, self.level, config, self.jobs)
        return self

    def to_csv(self):
        check_is_fitted(self, "results_")
        return bounds.sweep_to_csv(self.results_)
