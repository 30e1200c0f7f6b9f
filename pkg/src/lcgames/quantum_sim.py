"""State-vector simulation of quantum strategies for LC games.

Wiring conventions
------------------
A channel ``(i, j)`` carries the system B_{i->j}; ``(i, i)`` is party i's
memory.  The isometry W_i(s_i) maps B_i onto the tensor product of its
outgoing channels ordered by receiver ascending, and party i measures the
product of its incoming channels ordered by sender ascending.  Channels not
listed have dimension 1.
"""

from __future__ import annotations

import itertools
import json
import math
import re
from dataclasses import dataclass, field

import numpy as np

from . import games
from .game_model import GameError, ConnectivityGraph, LatencyFunction, winning_probability

SIM_TOL = 1e-10
NORM_TOL = 1e-12


class WiringError(GameError):
    """Leg dimensions or channels inconsistent with the graph or latency function."""


def _freeze(array, dtype=complex):
    array = np.array(array, dtype=dtype)
    array.setflags(write=False)
    return array


def check_state(state, dims):
    state = np.asarray(state, dtype=complex).ravel()
    if state.size != math.prod(dims):
        raise WiringError(f"state has {state.size} amplitudes, factors {tuple(dims)} need {math.prod(dims)}")
    norm = np.linalg.norm(state)
    if abs(norm - 1.0) > NORM_TOL:
        raise GameError(f"state norm is {norm:.15g}, not 1")
    return state


def check_isometry(matrix, tol=SIM_TOL, label="map"):
    matrix = np.asarray(matrix)
    gram = matrix.conj().T @ matrix
    err = np.max(np.abs(gram - np.eye(gram.shape[0]))) if gram.size else 0.0
    if err > tol:
        raise GameError(f"{label} is not an isometry (deviation {err:.3g})")


def check_projective(effects, tol=SIM_TOL, label="measurement"):
    effects = [np.asarray(e) for e in effects]
    dim = effects[0].shape[0]
    total = np.zeros((dim, dim), dtype=complex)
    for a, e in enumerate(effects):
        if e.shape != (dim, dim):
            raise GameError(f"{label}: effect {a} has shape {e.shape}, expected {(dim, dim)}")
        if np.max(np.abs(e - e.conj().T)) > tol:
            raise GameError(f"{label}: effect {a} is not Hermitian")
        if np.max(np.abs(e @ e - e)) > tol:
            raise GameError(f"{label}: effect {a} is not idempotent")
        total = total + e
    if np.max(np.abs(total - np.eye(dim))) > tol:
        raise GameError(f"{label}: effects do not sum to the identity")


@dataclass(frozen=True)
class LCQuantumStrategy:
    """Shared state, per-input isometries and final measurements of a simple LC game strategy.

    ``isometries[i][s]`` has shape (prod of outgoing channel dims, dims[i]);
    ``measurements[i][a]`` acts on the product of incoming channels.
    """

    state: np.ndarray
    dims: tuple
    isometries: tuple
    measurements: tuple
    channels: dict = field(default_factory=dict)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        n = len(dims)
        channels = {(int(i), int(j)): int(d) for (i, j), d in self.channels.items()}
        for (i, j), d in channels.items():
            if not (0 <= i < n and 0 <= j < n) or d < 1:
                raise WiringError(f"channel ({i},{j}) of dimension {d} is invalid")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "channels", channels)
        object.__setattr__(self, "state", _freeze(check_state(self.state, dims)))
        if len(self.isometries) != n or len(self.measurements) != n:
            raise WiringError("isometries and measurements must list every party")
        isos, meas = [], []
        for i in range(n):
            rows = self.out_dim(i)
            family = []
            for s, w in enumerate(self.isometries[i]):
                w = np.asarray(w, dtype=complex)
                if w.shape != (rows, dims[i]):
                    raise WiringError(f"W_{i}({s}) has shape {w.shape}, expected {(rows, dims[i])}")
                check_isometry(w, label=f"W_{i}({s})")
                family.append(_freeze(w))
            isos.append(tuple(family))
            effects = [_freeze(e) for e in self.measurements[i]]
            size = self.in_dim(i)
            if effects and effects[0].shape != (size, size):
                raise WiringError(f"party {i} measures dimension {effects[0].shape[0]}, incoming channels give {size}")
            check_projective(effects, label=f"party {i} measurement")
            meas.append(tuple(effects))
        object.__setattr__(self, "isometries", tuple(isos))
        object.__setattr__(self, "measurements", tuple(meas))

    @property
    def n(self):
        return len(self.dims)

    def channel(self, i, j):
        return self.channels.get((i, j), 1)

    def out_legs(self, i):
        return sorted({j for (k, j) in self.channels if k == i} | {i})

    def in_legs(self, i):
        return sorted({k for (k, j) in self.channels if j == i} | {i})

    def out_dim(self, i):
        return math.prod(self.channel(i, j) for j in self.out_legs(i))

    def in_dim(self, i):
        return math.prod(self.channel(k, i) for k in self.in_legs(i))


def _check_wiring(strategy, graph):
    if graph.n != strategy.n:
        raise WiringError(f"graph has {graph.n} vertices, strategy has {strategy.n} parties")
    for (i, j), d in strategy.channels.items():
        if i != j and d > 1 and (i, j) not in graph.edges:
            raise WiringError(f"channel ({i},{j}) has dimension {d} but the graph has no edge ({i},{j})")


def _eigenbasis(stack):
    """Unitary U and one-hot labels with Pi_a = U diag(labels[:, a]) U^dagger for a projective stack."""
    stack = np.asarray(stack)
    weighted = np.tensordot(np.arange(stack.shape[0]), stack, axes=1)
    values, basis = np.linalg.eigh(weighted)
    labels = np.rint(values).astype(int)
    return basis, np.eye(stack.shape[0])[labels]


def _outcome_table(vector, bases):
    """p[a] = ||(x)_k Pi_k[a_k] v||^2 for a vector with one axis per measured factor."""
    for k, (basis, _) in enumerate(bases):
        vector = np.moveaxis(np.tensordot(basis.conj().T, vector, axes=([1], [k])), 0, k)
    table = np.abs(vector) ** 2
    for _, onehot in bases:
        table = np.tensordot(table, onehot, axes=([0], [0]))
    return table


def lc_behavior(strategy, graph):
    """Behavior p(a|s) realized by a quantum strategy on a simple LC game graph."""
    _check_wiring(strategy, graph)
    n = strategy.n
    bases = [_eigenbasis(np.stack(strategy.measurements[k])) for k in range(n)]
    leg_dims, leg_order = [], []
    for i in range(n):
        for j in strategy.out_legs(i):
            leg_order.append((i, j))
            leg_dims.append(strategy.channel(i, j))
    target = [(k, i) for i in range(n) for k in strategy.in_legs(i)]
    perm = [leg_order.index(leg) for leg in target]
    in_dims = [strategy.in_dim(i) for i in range(n)]
    inputs = [len(f) for f in strategy.isometries]
    outputs = [len(m) for m in strategy.measurements]
    behavior = np.zeros(tuple(inputs) + tuple(outputs))
    base = strategy.state.reshape(strategy.dims)
    for s in itertools.product(*(range(k) for k in inputs)):
        psi = base
        for i in range(n):
            psi = np.tensordot(psi, strategy.isometries[i][s[i]], axes=([0], [1]))
        psi = psi.reshape(leg_dims).transpose(perm).reshape(in_dims)
        behavior[s] = _outcome_table(psi, bases)
    return behavior


@dataclass(frozen=True)
class ForwardingStrategy:
    """Shared state and light-cone-indexed projective measurements ``measurements[i][h][a]``."""

    state: np.ndarray
    dims: tuple
    measurements: tuple

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "state", _freeze(check_state(self.state, dims)))
        if len(self.measurements) != len(dims):
            raise WiringError("measurements must list every party")
        meas = []
        for i, family in enumerate(self.measurements):
            fam = []
            for h, effects in enumerate(family):
                effects = [_freeze(e) for e in effects]
                if effects[0].shape != (dims[i], dims[i]):
                    raise WiringError(f"party {i} light-cone value {h}: effects act on the wrong dimension")
                check_projective(effects, label=f"party {i} at light-cone value {h}")
                fam.append(tuple(effects))
            meas.append(tuple(fam))
        object.__setattr__(self, "measurements", tuple(meas))


def nonlocal_behavior(state, dims, measurements):
    """Behavior of a shared state measured locally: ``measurements[i][x][a]`` on factor i."""
    n = len(dims)
    state = check_state(state, dims).reshape(dims)
    stacks = [np.stack([np.stack(effects) for effects in family]) for family in measurements]
    shape = tuple(st.shape[0] for st in stacks) + tuple(st.shape[1] for st in stacks)
    table = np.zeros(shape)
    for x in itertools.product(*(range(st.shape[0]) for st in stacks)):
        table[x] = _outcome_table(state, [_eigenbasis(st[xi]) for st, xi in zip(stacks, x)])
    return table


def forwarding_behavior(strategy, graph, input_sizes):
    """Behavior of a forwarding strategy; party i's measurement is chosen by its light-cone value."""
    n = len(strategy.dims)
    if graph.n != n:
        raise WiringError(f"graph has {graph.n} vertices, strategy has {n} parties")
    cones = [graph.closed_in(i) for i in range(n)]
    for i, cone in enumerate(cones):
        expected = math.prod(input_sizes[j] for j in cone)
        if len(strategy.measurements[i]) != expected:
            raise WiringError(f"party {i} has {len(strategy.measurements[i])} measurements, "
                              f"its light cone has {expected} values")
    table = nonlocal_behavior(strategy.state, strategy.dims, strategy.measurements)
    outputs = table.shape[n:]
    behavior = np.zeros(tuple(input_sizes) + outputs)
    for s in itertools.product(*(range(k) for k in input_sizes)):
        h = tuple(int(np.ravel_multi_index([s[j] for j in cone], [input_sizes[j] for j in cone]))
                  for cone in cones)
        behavior[s] = table[h]
    return behavior


def _basis(dim, k):
    vec = np.zeros(dim)
    vec[k] = 1.0
    return vec


def label_by_input(meas_family):
    """Family whose outcome (a, s') has projector delta(s, s') Pi_a(s); outcome index a*|S| + s'."""
    n_in = len(meas_family)
    labelled = []
    for s, effects in enumerate(meas_family):
        zero = np.zeros_like(np.asarray(effects[0], dtype=complex))
        labelled.append([np.asarray(effects[a], dtype=complex) if t == s else zero
                         for a in range(len(effects)) for t in range(n_in)])
    return labelled


def measure_and_broadcast(meas_family, source, targets=()):
    """Isometries that measure, keep the record in memory and send a copy to every target.

    W(s)|phi> = sum_a (Pi_a(s)|phi> (x) |a>)_memory (x) |a>_target ...  The memory
    channel is B_source (x) record, quantum factor first.  Returns the isometry
    family and the channel dimensions it uses.
    """
    targets = sorted(set(int(t) for t in targets) - {source})
    family = []
    dim = np.asarray(meas_family[0][0]).shape[0]
    n_out = len(meas_family[0])
    for s, effects in enumerate(meas_family):
        if len(effects) != n_out:
            raise GameError("every input must have the same number of outcomes")
        try:
            check_projective(effects, label=f"measurement for input {s}")
        except GameError as exc:
            raise GameError(f"measure_and_broadcast needs a projective family: {exc}") from None
        legs = sorted(targets + [source])
        pieces = []
        for a, proj in enumerate(effects):
            record = _basis(n_out, a)
            factors = []
            for leg in legs:
                factors.append(np.kron(np.asarray(proj, dtype=complex), record[:, None])
                               if leg == source else record[:, None])
            block = factors[0]
            for f in factors[1:]:
                block = np.kron(block, f)
            pieces.append(block)
        family.append(sum(pieces))
    channels = {(source, source): dim * n_out}
    channels.update({(source, t): n_out for t in targets})
    return family, channels


def forward_input(n_inputs, dim, source, targets=()):
    """Isometries that keep B_source untouched and send the input value to every target."""
    identity = [[np.eye(dim)] for _ in range(n_inputs)]
    return measure_and_broadcast(label_by_input(identity), source, targets)


def record_readout(factor_dims, record_axes, rule, n_outputs, quantum_axis=None):
    """Projective measurement on a product of factors that reads classical records.

    ``rule(records)`` returns the output for a tuple of record values, or,
    when ``quantum_axis`` is given, a list of ``n_outputs`` projectors on that
    factor.  Factors that are neither records nor the quantum factor are left
    untouched.
    """
    total = math.prod(factor_dims)
    effects = np.zeros((n_outputs, total, total), dtype=complex)
    for values in itertools.product(*(range(factor_dims[k]) for k in record_axes)):
        result = rule(values)
        for a in range(n_outputs):
            if quantum_axis is None:
                if result != a:
                    continue
                local = None
            else:
                local = np.asarray(result[a], dtype=complex)
            op = np.ones((1, 1), dtype=complex)
            for k, d in enumerate(factor_dims):
                if k in record_axes:
                    v = values[record_axes.index(k)]
                    piece = np.diag(_basis(d, v))
                elif k == quantum_axis:
                    piece = local
                else:
                    piece = np.eye(d)
                op = np.kron(op, piece)
            effects[a] += op
    return list(effects)


def binary_observable(observable):
    """Projectors [P(+1), P(-1)] of a +-1 observable; outcome 0 is eigenvalue +1."""
    observable = np.asarray(observable, dtype=complex)
    ident = np.eye(observable.shape[0])
    return [(ident + observable) / 2, (ident - observable) / 2]


def basis_measurement(vectors):
    return [np.outer(v, np.conj(v)) for v in (np.asarray(v, dtype=complex) for v in vectors)]


@dataclass(frozen=True)
class InteractionTensor:
    """Map of one party at one step: ``maps[s]`` has shape (|A| * prod(out_dims), prod(in_dims)).

    Leg ``j`` of ``in_dims`` receives from party j and leg ``j`` of
    ``out_dims`` sends to party j; the classical output is the slowest
    row index.
    """

    maps: tuple
    in_dims: tuple
    out_dims: tuple
    n_outputs: int

    def __post_init__(self):
        in_dims = tuple(int(d) for d in self.in_dims)
        out_dims = tuple(int(d) for d in self.out_dims)
        object.__setattr__(self, "in_dims", in_dims)
        object.__setattr__(self, "out_dims", out_dims)
        shape = (self.n_outputs * math.prod(out_dims), math.prod(in_dims))
        maps = []
        for s, w in enumerate(self.maps):
            w = np.asarray(w, dtype=complex)
            if w.shape != shape:
                raise WiringError(f"interaction map for input {s} has shape {w.shape}, expected {shape}")
            check_isometry(w, label=f"interaction map for input {s}")
            maps.append(_freeze(w))
        object.__setattr__(self, "maps", tuple(maps))

    @property
    def n_inputs(self):
        return len(self.maps)


def _check_grid(state_dims, tensors, latency):
    n, tau = latency.n, latency.tau
    if len(tensors) != n or any(len(row) != tau + 1 for row in tensors):
        raise WiringError(f"need an {n} x {tau + 1} grid of interaction tensors")
    for i in range(n):
        for t in range(tau + 1):
            w = tensors[i][t]
            if len(w.in_dims) != n or len(w.out_dims) != n:
                raise WiringError(f"tensor ({i},{t}) must have {n} quantum legs each way")
            for j in range(n):
                src = t - latency(j, i)
                if t == 0 and j == i:
                    if w.in_dims[i] != state_dims[i]:
                        raise WiringError(f"tensor ({i},0) self leg has dimension {w.in_dims[i]}, "
                                          f"state factor {i} has {state_dims[i]}")
                elif src < 0:
                    if w.in_dims[j] != 1:
                        raise WiringError(f"tensor ({i},{t}) leg from {j} has no source but dimension {w.in_dims[j]}")
                elif tensors[j][src].out_dims[i] != w.in_dims[j]:
                    raise WiringError(f"leg ({j},{src}) -> ({i},{t}) dimensions disagree")
                arrive = t + latency(i, j)
                if arrive > tau and w.out_dims[j] != 1 and not (j == i and t == tau):
                    raise WiringError(f"tensor ({i},{t}) sends to {j} after the horizon with dimension {w.out_dims[j]}")


def multistep_behavior(state, state_dims, tensors, latency):
    """Behavior of a multi-step strategy: ||prod_t (x)_i <a_i^t| W_i^t |s_i^t> |psi>||^2.

    State factor i enters party i's step-0 self leg.  The self leg leaving
    step tau may stay non-trivial: it is the residual register and is
    traced out.  Inputs and outputs of a party are flattened over steps,
    step 0 slowest.
    """
    _check_grid(state_dims, tensors, latency)
    n, tau = latency.n, latency.tau
    state = check_state(state, state_dims).reshape(state_dims)
    in_steps = [[tensors[i][t].n_inputs for t in range(tau + 1)] for i in range(n)]
    out_steps = [[tensors[i][t].n_outputs for t in range(tau + 1)] for i in range(n)]
    behavior = np.zeros(tuple(math.prod(r) for r in in_steps) + tuple(math.prod(r) for r in out_steps))
    for flat in itertools.product(*(range(math.prod(r)) for r in in_steps)):
        steps = [np.unravel_index(flat[i], in_steps[i]) for i in range(n)]
        psi = state
        labels = [("q", i, i, 0) for i in range(n)]
        for t in range(tau + 1):
            for i in range(n):
                w = tensors[i][t]
                wins = []
                for j in range(n):
                    label = ("q", j, i, t)
                    if label in labels:
                        wins.append(labels.index(label))
                    else:
                        psi = psi[..., None]
                        labels.append(label)
                        wins.append(len(labels) - 1)
                mat = w.maps[int(steps[i][t])].reshape((w.n_outputs,) + w.out_dims + w.in_dims)
                psi = np.tensordot(mat, psi, axes=(list(range(n + 1, 2 * n + 1)), wins))
                kept = [lab for k, lab in enumerate(labels) if k not in wins]
                sends = [("q", i, j, t + latency(i, j)) for j in range(n)]
                labels = [("a", i, t)] + sends + kept
                trivial = [k for k, lab in enumerate(labels)
                           if lab[0] == "q" and lab[3] > tau and psi.shape[k] == 1]
                psi = psi.reshape([d for k, d in enumerate(psi.shape) if k not in trivial])
                labels = [lab for k, lab in enumerate(labels) if k not in trivial]
        out_labels = [("a", i, t) for i in range(n) for t in range(tau + 1)]
        rest = [k for k, lab in enumerate(labels) if lab[0] == "q"]
        probs = np.sum(np.abs(psi) ** 2, axis=tuple(rest)) if rest else np.abs(psi) ** 2
        remaining = [lab for lab in labels if lab[0] == "a"]
        probs = probs.transpose([remaining.index(lab) for lab in out_labels])
        behavior[flat] = probs.reshape(behavior.shape[n:])
    return behavior


def lc_as_multistep(strategy, graph):
    """Interaction-tensor grid (tau = 1) equivalent to an LC strategy on ``graph``.

    Step 0 applies W_i(s_i) with the channels as outgoing legs; step 1
    measures and keeps the post-measurement state as residual register.
    """
    _check_wiring(strategy, graph)
    n = strategy.n
    matrix = [[1 if i == j or (i, j) in graph.edges else 2 for j in range(n)] for i in range(n)]
    latency = LatencyFunction(matrix, 1)
    grid = []
    for i in range(n):
        out0 = [strategy.channel(i, j) if latency(i, j) <= 1 else 1 for j in range(n)]
        in0 = [strategy.dims[i] if j == i else 1 for j in range(n)]
        step0 = InteractionTensor(strategy.isometries[i], in0, out0, 1)
        in1 = [strategy.channel(j, i) if latency(j, i) <= 1 else 1 for j in range(n)]
        out1 = [strategy.in_dim(i) if j == i else 1 for j in range(n)]
        effects = strategy.measurements[i]
        read = np.concatenate([np.asarray(e) for e in effects], axis=0)
        step1 = InteractionTensor((read,), in1, out1, len(effects))
        grid.append([step0, step1])
    return latency, grid


def direct_sum(first, second, weight):
    """Strategy realizing weight * behavior(first) + (1 - weight) * behavior(second).

    Every system becomes the direct sum of the two strategies' systems; the
    shared state lives in the all-first and all-second blocks, so cross terms
    vanish.
    """
    if first.n != second.n:
        raise GameError("strategies have different party counts")
    n = first.n
    if not 0.0 <= weight <= 1.0:
        raise GameError("weight must lie in [0, 1]")
    dims = tuple(a + b for a, b in zip(first.dims, second.dims))
    pairs = set(first.channels) | set(second.channels) | {(i, i) for i in range(n)}
    channels = {p: first.channel(*p) + second.channel(*p) for p in pairs}

    def embeds(strategy, offset_from_first):
        out = {}
        for p, total in channels.items():
            d = strategy.channel(*p)
            e = np.zeros((total, d))
            start = first.channel(*p) if offset_from_first else 0
            e[start:start + d, :d] = np.eye(d)
            out[p] = e
        return out

    def local(strategy, is_second):
        out = []
        for i in range(n):
            d = strategy.dims[i]
            e = np.zeros((dims[i], d))
            start = first.dims[i] if is_second else 0
            e[start:start + d] = np.eye(d)
            out.append(e)
        return out

    parts = []
    for k, strat in enumerate((first, second)):
        emb = embeds(strat, k == 1)
        loc = local(strat, k == 1)
        parts.append((strat, emb, loc))

    def tensor(mats):
        out = np.ones((1, 1))
        for m in mats:
            out = np.kron(out, m)
        return out

    state = 0
    for (strat, _, loc), amp in zip(parts, (math.sqrt(weight), math.sqrt(1 - weight))):
        state = state + amp * (tensor(loc) @ strat.state.reshape(-1, 1)).ravel()
    n_inputs = [max(len(first.isometries[i]), len(second.isometries[i])) for i in range(n)]
    isometries, measurements = [], []
    for i in range(n):
        out_legs = sorted({j for (k, j) in pairs if k == i})
        in_legs = sorted({k for (k, j) in pairs if j == i})
        fam = []
        for s in range(n_inputs[i]):
            total = 0
            for strat, emb, loc in parts:
                w = strat.isometries[i][s]
                total = total + tensor([emb[(i, j)] for j in out_legs]) @ w @ loc[i].T
            fam.append(total)
        isometries.append(fam)
        n_out = max(len(first.measurements[i]), len(second.measurements[i]))
        size = math.prod(channels[(k, i)] for k in in_legs)
        covered = np.zeros((size, size), dtype=complex)
        effects = [np.zeros((size, size), dtype=complex) for _ in range(n_out)]
        for strat, emb, _ in parts:
            e = tensor([emb[(k, i)] for k in in_legs])
            covered += e @ e.T
            for a, proj in enumerate(strat.measurements[i]):
                effects[a] += e @ proj @ e.T
        effects[0] += np.eye(size) - covered
        measurements.append(effects)
    return LCQuantumStrategy(state, dims, isometries, measurements, channels)


def with_trivial_legs(strategy, graph):
    """Same strategy with an explicit dimension-1 channel on every graph edge it does not use."""
    channels = dict(strategy.channels)
    for edge in graph.edges:
        channels.setdefault(edge, 1)
    return LCQuantumStrategy(strategy.state, strategy.dims, strategy.isometries,
                             strategy.measurements, channels)


def correlator_form(behavior, n):
    """Correlators <K_T>(s) = sum_a (-1)^(sum_{i in T} a_i) p(a|s) for every party subset T.

    Returns a dict from sorted party tuples (the empty tuple included) to
    arrays indexed by the full input.
    """
    behavior = np.asarray(behavior, dtype=float)
    if behavior.shape[n:] != (2,) * n:
        raise GameError("correlator form needs binary outputs for every party")
    signs = np.array([1.0, -1.0])
    table = {}
    for r in range(n + 1):
        for subset in itertools.combinations(range(n), r):
            weight = np.ones((2,) * n)
            for i in subset:
                shape = [1] * n
                shape[i] = 2
                weight = weight * signs.reshape(shape)
            table[subset] = np.tensordot(behavior, weight, axes=(list(range(n, 2 * n)), list(range(n))))
    return table


def behavior_from_correlators(table, n):
    """Inverse of correlator_form: p(a|s) = 2^-n sum_T (-1)^(a_T) <K_T>(s)."""
    input_shape = table[()].shape
    behavior = np.zeros(input_shape + (2,) * n)
    for a in itertools.product(range(2), repeat=n):
        total = np.zeros(input_shape)
        for subset, values in table.items():
            total = total + (-1) ** sum(a[i] for i in subset) * values
        behavior[(Ellipsis,) + a] = total / 2 ** n
    return behavior


def strategy_to_json(strategy):
    """Debug dump: complex matrices as nested [re, im] pairs."""

    def encode(matrix):
        matrix = np.asarray(matrix)
        return np.stack([matrix.real, matrix.imag], axis=-1).tolist()

    doc = {
        "dims": list(strategy.dims),
        "channels": [[i, j, d] for (i, j), d in sorted(strategy.channels.items())],
        "state": encode(strategy.state),
        "isometries": [[encode(w) for w in fam] for fam in strategy.isometries],
        "measurements": [[encode(e) for e in effects] for effects in strategy.measurements],
    }
    return json.dumps(doc)


# ----------------------------------------------------------------------------
# Catalog of explicit strategies

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]])
PAULI_Z = np.diag([1.0, -1.0]).astype(complex)
HALF = 1 / math.sqrt(2)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    game: object
    strategy: LCQuantumStrategy
    expected: float


def _kron(*ops):
    out = np.ones((1, 1))
    for op in ops:
        out = np.kron(out, op)
    return out


def _bit(sign):
    return 0 if sign > 0 else 1


def _distributed_chsh():
    ket = {0: np.array([1.0, 0.0]), 1: np.array([0.0, 1.0])}
    zero_l = (np.kron(ket[0], ket[1]) + np.kron(ket[1], ket[0])) * HALF
    one_l = (np.kron(ket[0], ket[0]) - np.kron(ket[1], ket[1])) * HALF
    state = (np.kron(zero_l, ket[0]) + np.kron(one_l, ket[1])) * HALF
    pair = [binary_observable(PAULI_X), binary_observable(PAULI_Z)]
    third = [binary_observable((PAULI_Z + PAULI_X) * HALF), binary_observable((PAULI_Z - PAULI_X) * HALF)]
    iso0, ch0 = measure_and_broadcast(label_by_input(pair), 0, [1])
    iso1, ch1 = measure_and_broadcast(label_by_input(pair), 1, [0])
    iso2, ch2 = measure_and_broadcast(third, 2)

    def agree(r_first, r_second):
        m0, s0 = divmod(r_first, 2)
        m1, s1 = divmod(r_second, 2)
        return (s0 * s1 + m0 + m1) % 2

    meas0 = record_readout([2, 4, 4], [1, 2], lambda r: agree(r[0], r[1]), 2)
    meas1 = record_readout([4, 2, 4], [0, 2], lambda r: agree(r[0], r[1]), 2)
    meas2 = record_readout([2, 2], [1], lambda r: r[0], 2)
    return LCQuantumStrategy(state, (2, 2, 2), [iso0, iso1, iso2], [meas0, meas1, meas2],
                             {**ch0, **ch1, **ch2})


def _logical_basis(size):
    """|0_L>, |1_L> of the code fixed by Y_k Y_(k+1), with Z...Z as logical Z and X Z...Z as logical X."""
    dim = 2 ** size
    proj = np.eye(dim, dtype=complex)
    for k in range(size - 1):
        ops = [np.eye(2)] * size
        ops[k] = ops[k + 1] = PAULI_Y
        proj = proj @ (np.eye(dim) + _kron(*ops)) / 2
    proj = proj @ (np.eye(dim) + _kron(*[PAULI_Z] * size)) / 2
    vals, vecs = np.linalg.eigh(proj)
    zero = vecs[:, -1]
    zero = zero * np.exp(-1j * np.angle(zero[np.argmax(np.abs(zero))]))
    logical_x = _kron(PAULI_X, *[PAULI_Z] * (size - 1))
    return zero, logical_x @ zero


def _group_signs(size, zero, one):
    """Sign sigma(s) with sigma(s) * P(s) = Z_L (even parity) or X_L (odd) on the code space."""
    signs = {}
    for s in itertools.product(range(2), repeat=size):
        pauli = _kron(*[PAULI_X if b else PAULI_Z for b in s])
        target = one if sum(s) % 2 else zero
        value = np.vdot(target, pauli @ zero)
        if abs(abs(value) - 1) > 1e-9 or abs(value.imag) > 1e-9:
            raise GameError("measurement pattern does not act as a logical Pauli")
        signs[s] = int(round(value.real))
    return signs


def _distributed_chsh_nm(n, m):
    sizes = (n, m)
    zeros, ones, signs = [], [], []
    for size in sizes:
        zero, one = _logical_basis(size)
        zeros.append(zero)
        ones.append(one)
        signs.append(_group_signs(size, zero, one))
    c, s = math.cos(math.pi / 8), math.sin(math.pi / 8)
    second_plus = c * zeros[1] + s * ones[1]
    second_minus = s * zeros[1] - c * ones[1]
    state = (np.kron(zeros[0], second_plus) + np.kron(ones[0], second_minus)) * HALF
    total = n + m
    groups = [list(range(n)), list(range(n, total))]
    family = label_by_input([binary_observable(PAULI_Z), binary_observable(PAULI_X)])
    isometries, measurements, channels = [], [], {}
    for g, members in enumerate(groups):
        for party in members:
            iso, ch = measure_and_broadcast(family, party, members)
            isometries.append(iso)
            channels.update(ch)
    for g, members in enumerate(groups):
        for party in members:
            factor_dims, record_axes = [], []
            for src in members:
                if src == party:
                    factor_dims.append(2)
                record_axes.append(len(factor_dims))
                factor_dims.append(4)

            def rule(records, table=signs[g]):
                outcome = [divmod(r, 2) for r in records]
                inputs = tuple(x for _, x in outcome)
                return (_bit(table[inputs]) + sum(mm for mm, _ in outcome)) % 2

            measurements.append(record_readout(factor_dims, record_axes, rule, 2))
    return LCQuantumStrategy(state, (2,) * total, isometries, measurements, channels)


def _magic_square():
    ket0, ket1 = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    plus, minus = (ket0 + ket1) * HALF, (ket0 - ket1) * HALF
    k = np.kron
    bases = [
        [k(plus, plus), k(plus, minus), k(minus, plus), k(minus, minus)],
        [k(ket0, ket0), k(ket1, ket0), k(ket0, ket1), k(ket1, ket1)],
        [(k(ket0, plus) + k(ket1, minus)) * HALF, (k(ket0, minus) + k(ket1, plus)) * HALF,
         (k(ket0, plus) - k(ket1, minus)) * HALF, (k(ket0, minus) - k(ket1, plus)) * HALF],
        [k(plus, ket0), k(plus, ket1), k(minus, ket0), k(minus, ket1)],
        [k(ket0, plus), k(ket1, plus), k(ket0, minus), k(ket1, minus)],
        [(k(ket0, ket0) + k(ket1, ket1)) * HALF, (k(ket0, ket1) + k(ket1, ket0)) * HALF,
         (k(ket0, ket0) - k(ket1, ket1)) * HALF, (k(ket0, ket1) - k(ket1, ket0)) * HALF],
    ]
    families = [basis_measurement(b) for b in bases]
    # Two Bell pairs: qubits (first, first') of party 0 with (third, third') of party 2.
    state = np.zeros((4, 1, 4))
    for x, y in itertools.product(range(2), repeat=2):
        state[2 * x + y, 0, 2 * x + y] = 0.5
    iso0, ch0 = measure_and_broadcast(families[:3], 0, [1])
    iso1, ch1 = forward_input(3, 1, 1, [0])
    iso2, ch2 = measure_and_broadcast(label_by_input(families), 2)

    def cell(s2, outcome):
        m, m2 = (1 - 2 * b for b in divmod(outcome, 2))
        return _bit((m, m2, m * m2)[s2])

    meas0 = record_readout([4, 4, 3], [1, 2], lambda r: cell(r[1], r[0]), 2)
    meas1 = record_readout([4, 1, 3], [0, 2], lambda r: cell(r[1], r[0]), 2)

    def fill(record):
        outcome, line = divmod(record[0], 6)
        m, m2 = (1 - 2 * b for b in divmod(outcome, 2))
        parity = games.ROW_PARITY[line] if line < 3 else games.COLUMN_PARITY[line - 3]
        bits = [_bit(m), _bit(m2), _bit(parity * m * m2)]
        return 4 * bits[0] + 2 * bits[1] + bits[2]

    meas2 = record_readout([4, 24], [1], fill, 8)
    return LCQuantumStrategy(state.ravel(), (4, 1, 4), [iso0, iso1, iso2], [meas0, meas1, meas2],
                             {**ch0, **ch1, **ch2})


def _extended_chsh():
    state = np.array([1.0, 0, 0, 1.0]) * HALF
    full = np.kron(state, [1.0]).reshape(2, 1, 2).ravel()
    first = [binary_observable(PAULI_Z), binary_observable(PAULI_X)]
    third = [binary_observable((PAULI_Z + PAULI_X) * HALF), binary_observable((PAULI_Z - PAULI_X) * HALF)]
    iso0, ch0 = measure_and_broadcast(first, 0, [1])
    iso1 = [np.eye(1)]
    iso2, ch2 = measure_and_broadcast(third, 2)
    meas0 = record_readout([2, 2], [1], lambda r: r[0], 2)
    meas1 = record_readout([2], [0], lambda r: r[0], 2)
    meas2 = record_readout([2, 2], [1], lambda r: r[0], 2)
    return LCQuantumStrategy(full, (2, 1, 2), [iso0, iso1, iso2], [meas0, meas1, meas2], {**ch0, **ch2})


def _aggregated_xor(observables_for, correction, third_observables):
    """Party 0 answers 0 and forwards s0; party 1 measures observables_for(s0, s1) and flips by correction."""
    state = np.array([1.0, 0, 0, 1.0]) * HALF
    full = state.reshape(1, 2, 2).ravel()
    iso0, ch0 = forward_input(2, 1, 0, [1])
    iso1, ch1 = forward_input(2, 2, 1)
    iso2, ch2 = measure_and_broadcast([binary_observable(o) for o in third_observables], 2)
    meas0 = record_readout([1, 2], [1], lambda r: 0, 2)

    def rule(records):
        s0, s1 = records
        projs = binary_observable(observables_for(s0, s1))
        if correction(s0, s1):
            projs = projs[::-1]
        return projs

    meas1 = record_readout([2, 2, 2], [0, 2], rule, 2, quantum_axis=1)
    meas2 = record_readout([2, 2], [1], lambda r: r[0], 2)
    return LCQuantumStrategy(full, (1, 2, 2), [iso0, iso1, iso2], [meas0, meas1, meas2],
                             {**ch0, **ch1, **ch2})


def _chsh_pair():
    return [(PAULI_Z + PAULI_X) * HALF, (PAULI_Z - PAULI_X) * HALF]


def _xor_agg(index):
    if index == 1:
        root = math.sqrt(10)
        third = [(3 * PAULI_Z + PAULI_X) / root, (3 * PAULI_Z - PAULI_X) / root]
        return _aggregated_xor(lambda a, b: PAULI_X if a * b else PAULI_Z, lambda a, b: 0, third)
    if index == 2:
        ident = np.eye(2)
        return _aggregated_xor(lambda a, b: ident, lambda a, b: a * b, [ident, ident])
    if index == 3:
        return _aggregated_xor(lambda a, b: PAULI_X if a else PAULI_Z, lambda a, b: 0, _chsh_pair())
    if index == 4:
        return _aggregated_xor(lambda a, b: PAULI_X if a else PAULI_Z, lambda a, b: a * b, _chsh_pair())
    raise GameError(f"no aggregated XOR strategy {index}")


COS2_PI8 = math.cos(math.pi / 8) ** 2
XOR_AGG_VALUES = {1: (4 + math.sqrt(10)) / 8, 2: 1.0, 3: COS2_PI8, 4: COS2_PI8}
CATALOG_NAMES = ("distributed-chsh", "distributed-chsh-nm(n,m)", "distributed-magic-square",
                 "extended-chsh", "xor-agg-1", "xor-agg-2", "xor-agg-3", "xor-agg-4")


def catalog(name):
    """Explicit strategy for a catalog game together with its expected winning probability."""
    if name == "distributed-chsh":
        return CatalogEntry(name, games.distributed_chsh(), _distributed_chsh(), COS2_PI8)
    if name == "distributed-magic-square":
        return CatalogEntry(name, games.distributed_magic_square(), _magic_square(), 1.0)
    if name == "extended-chsh":
        return CatalogEntry(name, games.extended_chsh(), _extended_chsh(), COS2_PI8)
    match = re.fullmatch(r"distributed-chsh-nm\((\d+),(\d+)\)", name)
    if match:
        n, m = int(match.group(1)), int(match.group(2))
        return CatalogEntry(name, games.distributed_chsh_nm(n, m), _distributed_chsh_nm(n, m), COS2_PI8)
    match = re.fullmatch(r"xor-agg-([1-4])", name)
    if match:
        index = int(match.group(1))
        game = games.boolean_xor(f"xor{index}", ConnectivityGraph.bidirected(3, [(0, 1)]))
        return CatalogEntry(name, game, _xor_agg(index), XOR_AGG_VALUES[index])
    raise GameError(f"unknown catalog strategy {name!r}")


def simulate(entry):
    """Winning probability of a catalog entry's strategy on its game."""
    behavior = lc_behavior(entry.strategy, entry.game.graph)
    return winning_probability(entry.game, behavior)
