"""Scenarios, games, graphs, latency functions and the structural transforms on them.

Dense tables (predicates, priors, behaviors) use one fixed index order: the
joint input multi-index first, then the joint output multi-index, party 0
slowest in both.  A predicate for three parties with binary inputs and
outputs therefore has shape ``(2, 2, 2, 2, 2, 2)`` and is indexed
``V[s0, s1, s2, a0, a1, a2]``.
"""

from __future__ import annotations

import itertools
import json
import math
import numbers
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

PRIOR_TOL = 1e-12
BEHAVIOR_TOL = 1e-9


class GameError(ValueError):
    """Raised when a game, behavior or transform precondition is violated."""


def _freeze(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class Scenario:
    input_sizes: tuple
    output_sizes: tuple

    def __post_init__(self):
        ins = tuple(int(k) for k in self.input_sizes)
        outs = tuple(int(k) for k in self.output_sizes)
        if len(ins) != len(outs):
            raise GameError("input_sizes and output_sizes differ in length")
        if len(ins) < 2:
            raise GameError("a scenario needs at least two parties")
        if min(ins + outs) < 1:
            raise GameError("input and output set sizes must be >= 1")
        object.__setattr__(self, "input_sizes", ins)
        object.__setattr__(self, "output_sizes", outs)

    @property
    def n(self):
        return len(self.input_sizes)

    @property
    def shape(self):
        return self.input_sizes + self.output_sizes

    def inputs(self):
        return itertools.product(*(range(k) for k in self.input_sizes))

    def outputs(self):
        return itertools.product(*(range(k) for k in self.output_sizes))


@dataclass(frozen=True)
class ConnectivityGraph:
    n: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        edges = frozenset((int(i), int(j)) for i, j in self.edges)
        for i, j in edges:
            if i == j:
                raise GameError(f"self-loop ({i},{j}) is not allowed")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GameError(f"edge ({i},{j}) has an endpoint outside [0,{self.n})")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def empty(cls, n):
        return cls(n, frozenset())

    @classmethod
    def complete(cls, n):
        return cls(n, frozenset((i, j) for i in range(n) for j in range(n) if i != j))

    @classmethod
    def bidirected(cls, n, pairs):
        """Graph with both directions of every listed pair."""
        edges = set()
        for i, j in pairs:
            edges.add((i, j))
            edges.add((j, i))
        return cls(n, frozenset(edges))

    def in_neighbors(self, i):
        return tuple(sorted(j for j, k in self.edges if k == i))

    def out_neighbors(self, i):
        return tuple(sorted(k for j, k in self.edges if j == i))

    def closed_in(self, i):
        return (i,) + self.in_neighbors(i)

    def closed_out(self, i):
        return (i,) + self.out_neighbors(i)

    def sorted_edges(self):
        return sorted(self.edges)


@dataclass(frozen=True)
class LatencyFunction:
    matrix: tuple
    tau: int

    def __post_init__(self):
        matrix = tuple(tuple(int(v) for v in row) for row in self.matrix)
        n = len(matrix)
        if any(len(row) != n for row in matrix):
            raise GameError("latency matrix must be square")
        for i in range(n):
            if matrix[i][i] != 1:
                raise GameError(f"latency[{i}][{i}] must be 1 (a party reaches itself in one step)")
            for j in range(n):
                if matrix[i][j] < 1:
                    raise GameError(f"latency[{i}][{j}] must be a positive integer")
        if int(self.tau) < 0:
            raise GameError("tau must be >= 0")
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "tau", int(self.tau))

    @property
    def n(self):
        return len(self.matrix)

    def __call__(self, i, j):
        return self.matrix[i][j]

    def with_tau(self, tau):
        return LatencyFunction(self.matrix, tau)


class SimpleLCGame:
    """One-round latency-constrained game: predicate, prior and connectivity graph."""

    def __init__(self, scenario, predicate, prior=None, graph=None, name=None, score=None):
        self.scenario = scenario
        predicate = np.asarray(predicate, dtype=float)
        if predicate.shape != scenario.shape:
            if predicate.size != math.prod(scenario.shape):
                raise GameError(f"predicate has {predicate.size} entries, expected shape {scenario.shape}")
            predicate = predicate.reshape(scenario.shape)
        if np.any(predicate < 0) or np.any(predicate > 1):
            raise GameError("predicate entries must lie in [0, 1]")
        self.predicate = _freeze(predicate)
        self.prior = _freeze(_check_prior(prior, scenario.input_sizes))
        self.graph = graph if graph is not None else ConnectivityGraph.empty(scenario.n)
        if self.graph.n != scenario.n:
            raise GameError("graph vertex count differs from the party count")
        self.name = name
        self.score = _check_score(score)

    def __eq__(self, other):
        if not isinstance(other, SimpleLCGame):
            return NotImplemented
        return (self.scenario == other.scenario and self.graph == other.graph
                and np.array_equal(self.predicate, other.predicate)
                and np.array_equal(self.prior, other.prior) and self.score == other.score)

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return (f"SimpleLCGame{label}(inputs={self.scenario.input_sizes}, "
                f"outputs={self.scenario.output_sizes}, edges={self.graph.sorted_edges()})")

    @property
    def n(self):
        return self.scenario.n

    def with_graph(self, graph):
        return SimpleLCGame(self.scenario, self.predicate, self.prior, graph, self.name, self.score)


class MultiStepGame:
    """tau-step game with per-step input and output sets.

    ``input_steps[i][t]`` is |S_i^(t)| and ``output_steps[i][t]`` is |A_i^(t)|.
    A party's full input is the tuple over steps, flattened with step 0
    slowest; predicate and prior are indexed by these flattened values.
    """

    def __init__(self, input_steps, output_steps, predicate, prior, latency, name=None, score=None):
        horizon = latency.tau + 1
        self.input_steps = tuple(tuple(int(k) for k in row) for row in input_steps)
        self.output_steps = tuple(tuple(int(k) for k in row) for row in output_steps)
        if len(self.input_steps) != latency.n or len(self.output_steps) != latency.n:
            raise GameError("per-step shapes must list every party")
        for rows in (self.input_steps, self.output_steps):
            for row in rows:
                if len(row) != horizon:
                    raise GameError(f"each party needs {horizon} per-step sizes (tau={latency.tau})")
                if min(row) < 1:
                    raise GameError("per-step set sizes must be >= 1")
        self.latency = latency
        self.scenario = Scenario(tuple(math.prod(r) for r in self.input_steps),
                                 tuple(math.prod(r) for r in self.output_steps))
        predicate = np.asarray(predicate, dtype=float).reshape(self.scenario.shape)
        if np.any(predicate < 0) or np.any(predicate > 1):
            raise GameError("predicate entries must lie in [0, 1]")
        self.predicate = _freeze(predicate)
        self.prior = _freeze(_check_prior(prior, self.scenario.input_sizes))
        self.name = name
        self.score = _check_score(score)

    @property
    def n(self):
        return self.scenario.n

    @property
    def tau(self):
        return self.latency.tau

    def is_siso(self):
        return all(all(k == 1 for k in row[1:]) for row in self.input_steps) and \
            all(all(k == 1 for k in row[:-1]) for row in self.output_steps)

    def __eq__(self, other):
        if not isinstance(other, MultiStepGame):
            return NotImplemented
        return (self.input_steps == other.input_steps and self.output_steps == other.output_steps
                and self.latency == other.latency
                and np.array_equal(self.predicate, other.predicate)
                and np.array_equal(self.prior, other.prior) and self.score == other.score)


def _check_score(score):
    if score is None:
        return (1.0, 0.0)
    scale, offset = (float(v) for v in score)
    if not scale > 0:
        raise GameError("score scale must be positive")
    return (scale, offset)


def reported_value(game, value):
    """Winning probability mapped through the game's affine score (identity by default)."""
    if value is None:
        return None
    scale, offset = game.score
    return scale * value + offset


def siso_game(predicate, prior, latency, input_sizes, output_sizes, name=None, score=None):
    """SISO game: inputs only at step 0, outputs only at step tau."""
    horizon = latency.tau + 1
    ins = [[k] + [1] * (horizon - 1) for k in input_sizes]
    outs = [[1] * (horizon - 1) + [k] for k in output_sizes]
    return MultiStepGame(ins, outs, predicate, prior, latency, name=name, score=score)


def with_horizon(game, tau):
    """Same SISO game with a different horizon tau."""
    if not game.is_siso():
        raise GameError("only SISO games can be re-timed")
    return siso_game(game.predicate, game.prior, game.latency.with_tau(tau),
                     game.scenario.input_sizes, game.scenario.output_sizes, game.name, game.score)


def induced_simple_game(game):
    """Simple LC game carried by a SISO game: same tables, connectivity graph at tau."""
    if not game.is_siso():
        raise GameError("induced simple game requires a SISO game")
    return SimpleLCGame(game.scenario, game.predicate, game.prior,
                        connectivity_graph(game.latency), game.name, game.score)


def _check_prior(prior, input_sizes):
    if prior is None or (isinstance(prior, str) and prior == "uniform"):
        return np.full(input_sizes, 1.0 / math.prod(input_sizes))
    prior = np.asarray(prior, dtype=float)
    if prior.size != math.prod(input_sizes):
        raise GameError(f"prior has {prior.size} entries, expected {math.prod(input_sizes)}")
    prior = prior.reshape(input_sizes)
    if np.any(prior < 0):
        raise GameError("prior entries must be >= 0")
    if abs(prior.sum() - 1.0) > PRIOR_TOL:
        raise GameError(f"prior sums to {prior.sum():.15g}, not 1")
    return prior


def check_behavior(behavior, scenario, tol=BEHAVIOR_TOL):
    """Validate a conditional probability table and return it as an array."""
    behavior = np.asarray(behavior, dtype=float)
    if behavior.shape != scenario.shape:
        raise GameError(f"behavior shape {behavior.shape} does not match {scenario.shape}")
    if np.any(behavior < -tol):
        raise GameError("behavior has negative entries")
    n = scenario.n
    sums = behavior.sum(axis=tuple(range(n, 2 * n)))
    if np.max(np.abs(sums - 1.0)) > tol:
        raise GameError("behavior is not normalized for every input")
    return behavior


def winning_probability(game, behavior):
    behavior = np.asarray(behavior, dtype=float)
    if behavior.shape != game.predicate.shape:
        raise GameError(f"behavior shape {behavior.shape} does not match {game.predicate.shape}")
    n = game.n
    weights = game.prior.reshape(game.prior.shape + (1,) * n)
    return float(np.sum(weights * game.predicate * behavior))


def algebraic_value(game):
    n = game.n
    best = game.predicate.reshape(game.prior.shape + (-1,)).max(axis=-1)
    return float(np.sum(game.prior * best))


def connectivity_graph(latency):
    n = latency.n
    return ConnectivityGraph(n, frozenset((i, j) for i in range(n) for j in range(n)
                                          if i != j and latency(i, j) <= latency.tau))


def past_light_cone(source, i, t=None):
    """Input slots visible to party ``i`` (at step ``t`` for a latency function).

    Own slots come first, then in-neighbours in ascending party order, steps
    ascending.  For a graph the step is always 0.
    """
    if not 0 <= i < source.n:
        raise GameError(f"party {i} out of range")
    if isinstance(source, ConnectivityGraph):
        return [(j, 0) for j in source.closed_in(i)]
    t = source.tau if t is None else t
    if not 0 <= t <= source.tau:
        raise GameError(f"step {t} outside [0, {source.tau}]")
    slots = [(i, k) for k in range(t + 1)]
    for j in range(source.n):
        if j != i and source(j, i) <= t:
            slots.extend((j, k) for k in range(t - source(j, i) + 1))
    return slots


def light_cone_sizes(game):
    """|H_i| for each party of a simple LC game."""
    sizes = game.scenario.input_sizes
    return [math.prod(sizes[j] for j in game.graph.closed_in(i)) for i in range(game.n)]


def forwarding_transform(game):
    """Nonlocal game whose inputs are the parties' past light cones."""
    graph = game.graph
    n = game.n
    sizes = game.scenario.input_sizes
    cones = [graph.closed_in(i) for i in range(n)]
    new_sizes = tuple(math.prod(sizes[j] for j in cone) for cone in cones)
    scenario = Scenario(new_sizes, game.scenario.output_sizes)
    prior = np.zeros(new_sizes)
    own_index = np.zeros(new_sizes + (n,), dtype=int)
    for h in itertools.product(*(range(k) for k in new_sizes)):
        seen = [dict(zip(cone, np.unravel_index(hi, [sizes[j] for j in cone])))
                for cone, hi in zip(cones, h)]
        own = tuple(int(seen[i][i]) for i in range(n))
        own_index[h] = own
        if all(seen[j][i] == seen[i][i] for i, j in graph.edges):
            prior[h] = game.prior[own]
    predicate = game.predicate[tuple(own_index[..., i] for i in range(n))]
    return SimpleLCGame(scenario, predicate, prior, ConnectivityGraph.empty(n), game.name, game.score)


def transport_behavior(game, behavior_on_cones):
    """Behavior on the original inputs of a forwarding behavior given on light cones."""
    graph = game.graph
    n = game.n
    sizes = game.scenario.input_sizes
    cones = [graph.closed_in(i) for i in range(n)]
    out = np.zeros(game.scenario.shape)
    for s in game.scenario.inputs():
        h = tuple(int(np.ravel_multi_index([s[j] for j in cone], [sizes[j] for j in cone]))
                  for cone in cones)
        out[s] = behavior_on_cones[h]
    return out


def aggregate_clique(game, parties, mode="classical"):
    """Merge a group of parties into one party with product inputs and outputs.

    The merged party takes the smallest index of the group.  SISO games are
    first reduced to their induced simple game after the quantum-mode
    latency check.
    """
    if mode not in ("classical", "quantum"):
        raise GameError(f"unknown aggregation mode {mode!r}")
    group = sorted(set(int(p) for p in parties))
    if not group:
        raise GameError("cannot aggregate an empty party set")
    latency_checked = isinstance(game, MultiStepGame)
    if latency_checked:
        if mode == "quantum":
            lat = game.latency
            hubs = [v for v in range(game.n)
                    if all(lat(i, v) + lat(v, i) <= lat.tau or i == v for i in group)]
            if not hubs:
                raise GameError(f"no vertex v0 with l(i,v0)+l(v0,i) <= tau={lat.tau} for all i in {group}")
        game = induced_simple_game(game)
    n = game.n
    if any(not 0 <= p < n for p in group):
        raise GameError(f"party set {group} out of range")
    graph = game.graph
    members = set(group)
    for i, j in graph.sorted_edges():
        if (i in members) != (j in members):
            raise GameError(f"group {group} is not isolated: edge ({i},{j}) crosses it")
    if not (latency_checked and mode == "quantum"):
        for i in group:
            for j in group:
                if i != j and (i, j) not in graph.edges:
                    raise GameError(f"group {group} is not a bidirected clique: edge ({i},{j}) missing")
    if len(group) == 1:
        return game
    head = group[0]
    order = []
    for p in range(n):
        if p == head:
            order.extend(group)
        elif p not in members:
            order.append(p)
    axes = order + [n + p for p in order]
    ins, outs = game.scenario.input_sizes, game.scenario.output_sizes
    new_in, new_out, new_index = [], [], {}
    for p in range(n):
        if p == head:
            new_index.update({q: len(new_in) for q in group})
            new_in.append(math.prod(ins[q] for q in group))
            new_out.append(math.prod(outs[q] for q in group))
        elif p not in members:
            new_index[p] = len(new_in)
            new_in.append(ins[p])
            new_out.append(outs[p])
    scenario = Scenario(tuple(new_in), tuple(new_out))
    predicate = np.transpose(game.predicate, axes).reshape(scenario.shape)
    prior = np.transpose(game.prior, order).reshape(scenario.input_sizes)
    edges = frozenset((new_index[i], new_index[j]) for i, j in graph.edges
                      if i not in members and j not in members)
    return SimpleLCGame(scenario, predicate, prior,
                        ConnectivityGraph(scenario.n, edges), game.name, game.score)


def _as_fraction(value):
    if isinstance(value, bool):
        raise TypeError(f"{value!r} is not a rational time")
    if isinstance(value, numbers.Rational):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError:
            raise TypeError(f"{value!r} is not a rational time") from None
    raise TypeError(f"{value!r} is not a rational time; pass int, Fraction or 'p/q'")


def discretize_times(time_values):
    """Common time unit t0 = 1/lcm(denominators) and each value in units of t0."""
    values = [_as_fraction(v) for v in time_values]
    if not values:
        raise GameError("no time values given")
    if any(v <= 0 for v in values):
        raise GameError("time values must be positive")
    denominator = math.lcm(*(v.denominator for v in values))
    t0 = Fraction(1, denominator)
    return t0, [int(v / t0) for v in values]


def is_g_signaling(behavior, graph, tol=1e-10):
    """Check the G-signaling condition; return (holds, worst deviation)."""
    behavior = np.asarray(behavior, dtype=float)
    n = graph.n
    worst = 0.0
    for i in range(n):
        traced = tuple(n + j for j in graph.closed_out(i))
        marginal = behavior.sum(axis=traced)
        spread = marginal.max(axis=i) - marginal.min(axis=i)
        worst = max(worst, float(spread.max()) if spread.size else 0.0)
    return worst <= tol, worst


def signaling_dimension_bound(scenario, graph):
    total = 0
    ins, outs = scenario.input_sizes, scenario.output_sizes
    for r in range(1, scenario.n + 1):
        for subset in itertools.combinations(range(scenario.n), r):
            cone = set()
            for i in subset:
                cone.update(graph.closed_in(i))
            total += math.prod(ins[w] for w in cone) * math.prod(outs[t] - 1 for t in subset)
    return total


GAME_SCHEMA = {
    "type": "object",
    "required": ["parties", "inputs", "outputs", "predicate"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "score": {"type": "object", "required": ["scale", "offset"], "additionalProperties": False,
                  "properties": {"scale": {"type": "number", "exclusiveMinimum": 0},
                                 "offset": {"type": "number"}}},
        "parties": {"type": "integer", "minimum": 2},
        "inputs": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "outputs": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "prior": {"oneOf": [{"const": "uniform"},
                            {"type": "array", "items": {"type": "number", "minimum": 0}}]},
        "predicate": {"type": "array", "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "graph": {"oneOf": [{"type": "null"}, {
            "type": "object", "required": ["edges"], "additionalProperties": False,
            "properties": {"edges": {"type": "array", "items": {
                "type": "array", "items": {"type": "integer", "minimum": 0},
                "minItems": 2, "maxItems": 2}}}}]},
        "latency": {"oneOf": [{"type": "null"}, {
            "type": "object", "required": ["matrix", "tau"], "additionalProperties": False,
            "properties": {"matrix": {"type": "array", "items": {
                "type": "array", "items": {"type": "integer"}}},
                "tau": {"type": "integer", "minimum": 0}}}]},
        "steps": {"type": "object", "required": ["inputs", "outputs"], "additionalProperties": False,
                  "properties": {
                      "inputs": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 1}}},
                      "outputs": {"type": "array", "items": {"type": "array", "items": {"type": "integer", "minimum": 1}}}}},
    },
}


def _schema_errors(doc):
    import jsonschema

    validator = jsonschema.Draft7Validator(GAME_SCHEMA)
    errors = []
    for err in sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path)):
        path = "/".join(str(p) for p in err.absolute_path) or "<root>"
        errors.append(f"{path}: {err.message}")
    return errors


def game_from_dict(doc):
    errors = _schema_errors(doc)
    if errors:
        raise GameError("; ".join(errors))
    n = doc["parties"]
    if len(doc["inputs"]) != n or len(doc["outputs"]) != n:
        raise GameError("inputs/outputs: expected one size per party")
    graph, latency = doc.get("graph"), doc.get("latency")
    if graph is not None and latency is not None:
        raise GameError("graph/latency: give exactly one of them")
    prior = doc.get("prior", "uniform")
    name = doc.get("name")
    score = (doc["score"]["scale"], doc["score"]["offset"]) if "score" in doc else None
    try:
        if latency is not None:
            lat = LatencyFunction(latency["matrix"], latency["tau"])
            if lat.n != n:
                raise GameError("latency/matrix: size differs from party count")
            steps = doc.get("steps")
            if steps is None:
                return siso_game(doc["predicate"], prior, lat, doc["inputs"], doc["outputs"], name, score)
            game = MultiStepGame(steps["inputs"], steps["outputs"], doc["predicate"], prior, lat, name,
                                 score)
            if game.scenario != Scenario(doc["inputs"], doc["outputs"]):
                raise GameError("steps: per-step products disagree with inputs/outputs")
            return game
        edges = [] if graph is None else graph["edges"]
        scenario = Scenario(doc["inputs"], doc["outputs"])
        return SimpleLCGame(scenario, doc["predicate"], prior,
                            ConnectivityGraph(n, frozenset(map(tuple, edges))), name, score)
    except GameError as exc:
        field = "prior" if "prior" in str(exc) else "predicate" if "predicate" in str(exc) else "game"
        raise GameError(f"{field}: {exc}") from None


def game_to_dict(game):
    doc = {}
    if game.name:
        doc["name"] = game.name
    doc["parties"] = game.n
    doc["inputs"] = list(game.scenario.input_sizes)
    doc["outputs"] = list(game.scenario.output_sizes)
    prior = game.prior.ravel()
    doc["prior"] = "uniform" if np.all(prior == prior[0]) and prior[0] == 1.0 / prior.size \
        else prior.tolist()
    doc["predicate"] = game.predicate.ravel().tolist()
    if game.score != (1.0, 0.0):
        doc["score"] = {"scale": game.score[0], "offset": game.score[1]}
    if isinstance(game, MultiStepGame):
        doc["graph"] = None
        doc["latency"] = {"matrix": [list(r) for r in game.latency.matrix], "tau": game.tau}
        if not game.is_siso():
            doc["steps"] = {"inputs": [list(r) for r in game.input_steps],
                            "outputs": [list(r) for r in game.output_steps]}
    else:
        doc["graph"] = {"edges": [list(e) for e in game.graph.sorted_edges()]}
        doc["latency"] = None
    return doc


def parse_game(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GameError(f"<root>: invalid JSON ({exc})") from None
    return game_from_dict(doc)


def serialize_game(game):
    return json.dumps(game_to_dict(game))
