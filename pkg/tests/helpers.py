"""Random games and strategies shared by the test modules."""

import itertools
import math

import numpy as np

from lcgames.game_model import ConnectivityGraph, Scenario, SimpleLCGame
from lcgames.quantum_sim import LCQuantumStrategy


def random_graph(n, rng, density=0.5):
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    return ConnectivityGraph(n, frozenset(p for p in pairs if rng.random() < density))


def random_game(rng, n=None, max_in=2, max_out=2, graph=None, binary_predicate=True):
    n = n or int(rng.integers(2, 4))
    ins = tuple(int(v) for v in rng.integers(1, max_in + 1, size=n))
    outs = tuple(int(v) for v in rng.integers(2, max_out + 1, size=n))
    shape = ins + outs
    if binary_predicate:
        predicate = (rng.random(shape) < 0.5).astype(float)
    else:
        predicate = rng.random(shape)
    prior = rng.random(ins) + 0.1
    prior /= prior.sum()
    graph = random_graph(n, rng) if graph is None else graph
    return SimpleLCGame(Scenario(ins, outs), predicate, prior, graph)


def random_unitary(dim, rng):
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_isometry(rows, cols, rng):
    return random_unitary(rows, rng)[:, :cols]


def random_projective(dim, n_outputs, rng):
    """Projective measurement with n_outputs outcomes (some may be zero) on C^dim."""
    u = random_unitary(dim, rng)
    labels = rng.integers(0, n_outputs, size=dim)
    effects = []
    for a in range(n_outputs):
        cols = u[:, labels == a]
        effects.append(cols @ cols.conj().T)
    return effects


def random_state(dims, rng):
    total = math.prod(dims)
    vec = rng.standard_normal(total) + 1j * rng.standard_normal(total)
    return vec / np.linalg.norm(vec)


def random_strategy(game, rng, max_dim=2):
    """Random LC strategy for ``game``: qudit per party, channels on graph edges."""
    n = game.n
    dims = tuple(int(v) for v in rng.integers(1, max_dim + 1, size=n))
    channels = {}
    for i in range(n):
        channels[(i, i)] = dims[i] * int(rng.integers(1, 3))
    for edge in game.graph.sorted_edges():
        channels[edge] = int(rng.integers(1, max_dim + 1))
    isometries, measurements = [], []
    for i in range(n):
        rows = math.prod(d for (k, _), d in channels.items() if k == i)
        cols = math.prod(d for (_, k), d in channels.items() if k == i)
        isometries.append([random_isometry(rows, dims[i], rng) for _ in range(game.scenario.input_sizes[i])])
        measurements.append(random_projective(cols, game.scenario.output_sizes[i], rng))
    return LCQuantumStrategy(random_state(dims, rng), dims, isometries, measurements, channels)


def all_graphs(n):
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    for mask in range(2 ** len(pairs)):
        yield ConnectivityGraph(n, frozenset(p for k, p in enumerate(pairs) if mask >> k & 1))


def g_signaling_dimension(scenario, graph):
    """Affine dimension of the G-signaling behaviors, by rank of the linear constraints."""
    n = scenario.n
    ins, outs = scenario.input_sizes, scenario.output_sizes
    shape = tuple(ins) + tuple(outs)
    size = math.prod(shape)
    inputs = list(itertools.product(*(range(k) for k in ins)))
    rows = []

    def marginal(s, subset, a_sub):
        vec = np.zeros(shape)
        index = [slice(None)] * (2 * n)
        index[:n] = s
        for i, a in zip(subset, a_sub):
            index[n + i] = a
        vec[tuple(index)] = 1.0
        return vec.ravel()

    for r in range(n + 1):
        for subset in itertools.combinations(range(n), r):
            cone = {w for i in subset for w in graph.closed_in(i)}
            for a_sub in itertools.product(*(range(outs[i]) for i in subset)):
                if r == 0:
                    rows.extend(marginal(s, (), ()) for s in inputs)
                    continue
                for s, t in itertools.combinations(inputs, 2):
                    if all(s[w] == t[w] for w in cone):
                        rows.append(marginal(s, subset, a_sub) - marginal(t, subset, a_sub))
    return size - int(np.linalg.matrix_rank(np.array(rows)))
