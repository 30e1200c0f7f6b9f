"""Classical values by exhaustive enumeration of deterministic strategies.

A deterministic strategy is a lookup table per party (per party and step for
multi-step games) from the party's past light cone to its output set.
Strategies are numbered as mixed-radix integers: tables concatenated in
party order (then step order), each table listed in light-cone order, first
digit most significant.  The enumeration streams over all tables of every
party except the last, and optimises the last party's table exactly for
each light-cone value, picking the smallest output on ties.  This visits
the same strategies in the same order as a flat scan and returns the
lexicographically smallest optimal strategy.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .conic_solver import ConicProblem, solve
from .game_model import (GameError, MultiStepGame, SimpleLCGame, algebraic_value,
                         past_light_cone, with_horizon, winning_probability)

DEFAULT_BUDGET = 2 ** 30
BATCH = 1 << 13
TIE_TOL = 1e-12


class BudgetExceeded(GameError):
    pass


def enumeration_budget():
    value = os.environ.get("LCG_BUDGET")
    return int(value) if value else DEFAULT_BUDGET


@dataclass(frozen=True)
class DeterministicStrategy:
    """``tables[i]`` maps light-cone index to output (``tables[i][t]`` for multi-step games)."""

    tables: tuple


@dataclass
class ClassicalResult:
    value: float
    strategy: DeterministicStrategy
    strategies_examined: int


class _Layout:
    """Flattened view of a game as weighted table plus virtual parties.

    Virtual parties are (party) for simple games and (party, step) for
    multi-step games.  ``cones[v]`` gives the light-cone index of every
    flattened joint input; ``strides[v]`` is the weight of the virtual
    party's output digit in the flattened joint output.
    """

    def __init__(self, weights, cones, cone_sizes, out_sizes, strides, keys):
        self.weights = weights
        self.cones = cones
        self.cone_sizes = cone_sizes
        self.out_sizes = out_sizes
        self.strides = strides
        self.keys = keys

    @property
    def count(self):
        return math.prod(k ** h for k, h in zip(self.out_sizes, self.cone_sizes))


def _simple_layout(game):
    sizes = game.scenario.input_sizes
    outs = game.scenario.output_sizes
    n = game.n
    grid = np.indices(sizes).reshape(n, -1)
    cones, cone_sizes = [], []
    for i in range(n):
        members = game.graph.closed_in(i)
        cones.append(np.ravel_multi_index(tuple(grid[j] for j in members), [sizes[j] for j in members]))
        cone_sizes.append(math.prod(sizes[j] for j in members))
    strides = [math.prod(outs[i + 1:]) for i in range(n)]
    weights = (game.prior.reshape(game.prior.shape + (1,) * n) * game.predicate).reshape(
        math.prod(sizes), math.prod(outs))
    return _Layout(weights, cones, cone_sizes, list(outs), strides, [(i,) for i in range(n)])


def _multistep_layout(game):
    n = game.n
    ins = game.input_steps
    outs = game.output_steps
    horizon = game.tau + 1
    grid = np.indices(game.scenario.input_sizes).reshape(n, -1)
    # digit of step t inside each party's flattened input (step 0 slowest)
    slot_values = {}
    for j in range(n):
        steps = np.unravel_index(grid[j], ins[j])
        for t in range(horizon):
            slot_values[(j, t)] = steps[t]
    party_strides = [math.prod(game.scenario.output_sizes[i + 1:]) for i in range(n)]
    cones, cone_sizes, out_sizes, strides, keys = [], [], [], [], []
    for i in range(n):
        for t in range(horizon):
            slots = past_light_cone(game.latency, i, t)
            dims = [ins[j][k] for j, k in slots]
            cones.append(np.ravel_multi_index(tuple(slot_values[s] for s in slots), dims)
                         if slots else np.zeros(grid.shape[1], dtype=int))
            cone_sizes.append(math.prod(dims))
            out_sizes.append(outs[i][t])
            strides.append(party_strides[i] * math.prod(outs[i][t + 1:]))
            keys.append((i, t))
    weights = (game.prior.reshape(game.prior.shape + (1,) * n) * game.predicate).reshape(
        grid.shape[1], -1)
    return _Layout(weights, cones, cone_sizes, out_sizes, strides, keys)


def _layout(game):
    return _multistep_layout(game) if isinstance(game, MultiStepGame) else _simple_layout(game)


def deterministic_count(game):
    return _layout(game).count


def _decode(codes, layout, parties):
    """Output tables (batch, H_v) for the given virtual parties from strategy codes."""
    tables = {}
    rest = codes.copy()
    for v in reversed(parties):
        k, h = layout.out_sizes[v], layout.cone_sizes[v]
        digits = np.empty((codes.size, h), dtype=np.int64)
        for col in range(h - 1, -1, -1):
            rest, digits[:, col] = np.divmod(rest, k)
        tables[v] = digits
    return tables


def _scan(layout, start, stop):
    """Best (value, outer code) over outer codes in [start, stop)."""
    outer = list(range(len(layout.cones) - 1))
    inner = len(layout.cones) - 1
    n_s = layout.weights.shape[0]
    k_in = layout.out_sizes[inner]
    onehot = np.zeros((n_s, layout.cone_sizes[inner]))
    onehot[np.arange(n_s), layout.cones[inner]] = 1.0
    offsets = layout.strides[inner] * np.arange(k_in)
    rows = np.arange(n_s)[None, :, None]
    best_val, best_code = -np.inf, -1
    for lo in range(start, stop, BATCH):
        codes = np.arange(lo, min(stop, lo + BATCH), dtype=np.int64)
        tables = _decode(codes, layout, outer)
        base = np.zeros((codes.size, n_s), dtype=np.int64)
        for v in outer:
            base += layout.strides[v] * tables[v][:, layout.cones[v]]
        gathered = layout.weights[rows, base[:, :, None] + offsets[None, None, :]]
        per_cone = np.einsum("bso,sh->bho", gathered, onehot)
        values = per_cone.max(axis=2).sum(axis=1)
        top = int(np.argmax(values))
        if values[top] > best_val + TIE_TOL:
            best_val, best_code = float(values[top]), int(codes[top])
    return best_val, best_code


def _optimise(game, jobs=1):
    layout = _layout(game)
    count = layout.count
    budget = enumeration_budget()
    if count > budget:
        raise BudgetExceeded(f"{count} deterministic strategies exceed the budget of {budget}")
    inner = len(layout.cones) - 1
    n_outer = count // layout.out_sizes[inner] ** layout.cone_sizes[inner]
    if jobs > 1 and n_outer > BATCH:
        bounds = np.linspace(0, n_outer, jobs + 1).astype(np.int64)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(_scan, [layout] * jobs, bounds[:-1].tolist(), bounds[1:].tolist()))
        best_val, best_code = -np.inf, -1
        for val, code in parts:
            if val > best_val + TIE_TOL:
                best_val, best_code = val, code
    else:
        best_val, best_code = _scan(layout, 0, n_outer)
    tables = _decode(np.array([best_code], dtype=np.int64), layout, list(range(inner)))
    per_party = [tuple(int(o) for o in tables[v][0]) for v in range(inner)]
    # exact argmax for the inner party
    base = np.zeros(layout.weights.shape[0], dtype=np.int64)
    for v in range(inner):
        base += layout.strides[v] * tables[v][0][layout.cones[v]]
    k_in = layout.out_sizes[inner]
    gathered = layout.weights[np.arange(base.size)[:, None],
                              base[:, None] + layout.strides[inner] * np.arange(k_in)[None, :]]
    per_cone = np.zeros((layout.cone_sizes[inner], k_in))
    np.add.at(per_cone, layout.cones[inner], gathered)
    inner_table = []
    for row in per_cone:
        top = row.max()
        inner_table.append(int(np.flatnonzero(row >= top - TIE_TOL)[0]))
    per_party.append(tuple(inner_table))
    return layout, per_party, count


def _group_tables(layout, per_party):
    if all(len(k) == 1 for k in layout.keys):
        return tuple(per_party)
    grouped = {}
    for key, table in zip(layout.keys, per_party):
        grouped.setdefault(key[0], []).append(table)
    return tuple(tuple(grouped[i]) for i in sorted(grouped))


def classical_value(game, mode="exhaustive", jobs=1):
    if mode != "exhaustive":
        raise ValueError(f"unsupported mode {mode!r}")
    if isinstance(game, MultiStepGame):
        return classical_value_multistep(game, jobs=jobs)
    layout, per_party, count = _optimise(game, jobs)
    strategy = DeterministicStrategy(_group_tables(layout, per_party))
    value = winning_probability(game, behavior_of(strategy, game))
    return ClassicalResult(value, strategy, count)


def classical_value_multistep(game, jobs=1):
    layout, per_party, count = _optimise(game, jobs)
    strategy = DeterministicStrategy(_group_tables(layout, per_party))
    value = winning_probability(game, behavior_of(strategy, game))
    return ClassicalResult(value, strategy, count)


def behavior_of(strategy, game):
    layout = _layout(game)
    flat = []
    for table in strategy.tables:
        if table and isinstance(table[0], tuple):
            flat.extend(table)
        else:
            flat.append(table)
    if len(flat) != len(layout.cones):
        raise GameError("strategy does not match the game's parties/steps")
    n_s = layout.weights.shape[0]
    index = np.zeros(n_s, dtype=np.int64)
    for v, table in enumerate(flat):
        table = np.asarray(table, dtype=np.int64)
        if table.size != layout.cone_sizes[v]:
            raise GameError(f"table {layout.keys[v]} has length {table.size}, expected {layout.cone_sizes[v]}")
        if table.size and (table.min() < 0 or table.max() >= layout.out_sizes[v]):
            raise GameError(f"table {layout.keys[v]} has outputs out of range")
        index += layout.strides[v] * table[layout.cones[v]]
    behavior = np.zeros(layout.weights.shape)
    behavior[np.arange(n_s), index] = 1.0
    return behavior.reshape(game.predicate.shape)


def enumerate_strategies(game):
    """Yield every deterministic strategy in code order (small games only)."""
    layout = _layout(game)
    parties = list(range(len(layout.cones)))
    for code in range(layout.count):
        tables = _decode(np.array([code], dtype=np.int64), layout, parties)
        yield DeterministicStrategy(_group_tables(layout, [tuple(int(o) for o in tables[v][0])
                                                          for v in parties]))


def deterministic_behaviors(game, limit=2_000_000):
    """Matrix whose columns are all deterministic behaviors (flattened), in code order."""
    layout = _layout(game)
    count = layout.count
    budget = enumeration_budget()
    if count > budget:
        raise BudgetExceeded(f"{count} deterministic strategies exceed the budget of {budget}")
    n_s, n_a = layout.weights.shape
    if count * n_s > limit * 8:
        raise BudgetExceeded(f"{count} deterministic behaviors are too many to materialise")
    parties = list(range(len(layout.cones)))
    columns = np.empty((count, n_s), dtype=np.int64)
    for lo in range(0, count, BATCH):
        codes = np.arange(lo, min(count, lo + BATCH), dtype=np.int64)
        tables = _decode(codes, layout, parties)
        idx = np.zeros((codes.size, n_s), dtype=np.int64)
        for v in parties:
            idx += layout.strides[v] * tables[v][:, layout.cones[v]]
        columns[lo:lo + codes.size] = idx + n_a * np.arange(n_s)[None, :]
    return columns, n_s * n_a


def classical_membership(behavior, game, tol=1e-9):
    """LP test of membership in the convex hull of deterministic behaviors.

    Solves min t s.t. |sum_k w_k D_k - p| <= t entrywise, w in the simplex.
    Returns (is_member, certificate); the certificate holds the weights for
    members, and a separating functional F with offset for non-members
    (F.D_k + offset <= 0 for every deterministic D_k, F.p + offset = t > 0).
    """
    p = np.asarray(behavior, dtype=float).ravel()
    columns, n_entries = deterministic_behaviors(game)
    count = columns.shape[0]
    if p.size != n_entries:
        raise GameError("behavior shape does not match the game")
    lp_size = count + 1 + 2 * n_entries
    t_col = count
    u1, u2 = count + 1, count + 1 + n_entries
    prob = ConicProblem([], lp_size=lp_size, sense="min")
    rows, cols, vals = [], [], []
    entries = np.arange(n_entries)
    for sign, slack_start, row0 in ((1.0, u1, 0), (-1.0, u2, n_entries)):
        # D w + sign * t - sign * u = p
        rows += [row0 + columns.ravel(), row0 + entries, row0 + entries]
        cols += [np.repeat(np.arange(count), columns.shape[1]), np.full(n_entries, t_col),
                 slack_start + entries]
        vals += [np.ones(columns.size), np.full(n_entries, sign), np.full(n_entries, -sign)]
    rows.append(np.array([2 * n_entries] * count))
    cols.append(np.arange(count))
    vals.append(np.ones(count))
    a = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                      shape=(2 * n_entries + 1, lp_size))
    prob.add_lp_constraints(a, np.concatenate([p, p, [1.0]]))
    cost = np.zeros(lp_size)
    cost[t_col] = 1.0
    prob.set_objective({"lp": cost})
    sol = solve(prob, gap_tol=1e-10, feas_tol=1e-10)
    t = float(sol.lp[t_col])
    if t <= tol:
        return True, {"weights": sol.lp[:count].copy(), "violation": t}
    y = sol.dual
    functional = (y[:n_entries] + y[n_entries:2 * n_entries]).reshape(np.shape(behavior))
    return False, {"functional": functional, "offset": float(y[-1]), "violation": t}


def threshold_time(family, alpha, kind="classical"):
    """Least tau whose classical value reaches alpha.

    ``family`` is a SISO game (re-timed with each tau) or a callable tau -> game.
    """
    if kind != "classical":
        raise ValueError("only classical threshold times are computed exactly")
    make = family if callable(family) else (lambda tau: with_horizon(family, tau))
    probe = make(0)
    lat = probe.latency
    top = max(max(row) for row in lat.matrix)
    if alpha > algebraic_value(probe) + 1e-12:
        raise GameError(f"alpha={alpha} exceeds the algebraic value {algebraic_value(probe):.6g}")
    for tau in range(top + 1):
        if classical_value_multistep(make(tau)).value >= alpha - 1e-12:
            return tau
    return top
