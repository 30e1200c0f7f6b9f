"""Upper bounds and exact values: XOR correlation SDP, NPA moment matrices, sweeps.

The NPA relaxation uses one projector symbol per (party, input, output)
for every output but the last, which is eliminated by completeness.  Words
are reduced with the projector algebra (idempotence, orthogonality within
an input, commutation between parties) and identified with their
reversals, so the moment matrix is real symmetric.  Two conic forms are
available: the matrix as the variable with equality chains per moment, or
the matrix as the dual slack with one equality per moment.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import classical_engine, conic_solver, games, seesaw
from .game_model import (GameError, MultiStepGame, SimpleLCGame, aggregate_clique, algebraic_value,
                         connectivity_graph, forwarding_transform, induced_simple_game, reported_value,
                         with_horizon)

NPA_MAX_MONOMIALS = 400
NPA_MAX_MOMENTS = 40000
# the correlation SDP is small, so it is solved well past the default tolerances
XOR_GAP_TOL = 1e-12
XOR_FEAS_TOL = 1e-11

# Sweeps meet the same aggregated game at several horizons.
_NPA_CACHE = {}


class MomentBudgetExceeded(classical_engine.BudgetExceeded):
    """Moment matrix larger than the configured limits."""


# ----------------------------------------------------------------------------
# XOR games


def xor_quantum_value(coefficients, base=0.5):
    """Exact value base + max sum c[s, t] <u_s, v_t> over unit vectors.

    ``coefficients`` already carries the input weights; for a standard XOR
    game they are prior(s, t) * bias(s, t) / 2.  Returns ``(value,
    correlators)`` where ``correlators[s, t]`` is the optimal <u_s, v_t>.
    """
    coefficients = np.atleast_2d(np.asarray(coefficients, dtype=float))
    rows, cols = coefficients.shape
    size = rows + cols
    if not np.any(coefficients):
        return float(base), np.zeros_like(coefficients)
    problem = conic_solver.ConicProblem([size], sense="max")
    objective = np.zeros((size, size))
    objective[:rows, rows:] = coefficients / 2
    objective[rows:, :rows] = coefficients.T / 2
    problem.set_objective({0: objective})
    problem.add_entry_constraints(np.arange(size), np.zeros(size), np.arange(size), np.arange(size),
                                  np.ones(size), np.ones(size))
    solution = conic_solver.solve(problem, gap_tol=XOR_GAP_TOL, feas_tol=XOR_FEAS_TOL)
    _check_solution(solution, "XOR correlation SDP")
    gram = solution.blocks[0]
    return float(base + solution.primal_value), gram[:rows, rows:]


def _parity(index):
    return bin(int(index)).count("1") % 2


def xor_structure(game):
    """Correlation coefficients and base of a two-party game whose predicate depends on output parity.

    Output indices of each party are read as bit strings (sizes must be
    powers of two); the game is XOR-structured when the predicate depends
    only on the parity of all output bits.  Raises GameError otherwise.
    """
    if game.n != 2:
        raise GameError("XOR structure needs exactly two parties")
    outs = game.scenario.output_sizes
    if any(k & (k - 1) for k in outs):
        raise GameError("XOR structure needs power-of-two output alphabets")
    ins = game.scenario.input_sizes
    even = np.zeros(ins)
    odd = np.zeros(ins)
    for s in itertools.product(*(range(k) for k in ins)):
        values = {0: set(), 1: set()}
        for a in itertools.product(*(range(k) for k in outs)):
            values[(_parity(a[0]) + _parity(a[1])) % 2].add(round(float(game.predicate[s + a]), 12))
        if len(values[0]) > 1 or len(values[1]) > 1:
            raise GameError("predicate is not a function of the output parity")
        even[s], odd[s] = values[0].pop(), values[1].pop()
    weights = game.prior
    coefficients = weights * (even - odd) / 2
    base = float(np.sum(weights * (even + odd) / 2))
    return coefficients, base


def is_xor_game(game):
    try:
        xor_structure(game)
    except GameError:
        return False
    return True


def xor_game_value(game):
    """Exact quantum value of a two-party XOR-structured nonlocal game."""
    coefficients, base = xor_structure(game)
    value, _ = xor_quantum_value(coefficients, base)
    return value


def generalized_chsh_value(alpha):
    """Quantum bias 2 sqrt(1 + alpha^2) of the operator A0(alpha B0 + B1) + A1(alpha B0 - B1)."""
    return 2.0 * math.sqrt(1.0 + float(alpha) ** 2)


# ----------------------------------------------------------------------------
# NPA


def _reduce_party(word):
    """Reduce one party's word of (input, output) letters; None means the zero operator."""
    out = []
    for letter in word:
        if out and out[-1][0] == letter[0]:
            if out[-1][1] != letter[1]:
                return None
            continue
        out.append(letter)
    return tuple(out)


def _canonical(word):
    """Moment key shared by a word and its reversal."""
    rev = tuple(tuple(reversed(part)) for part in word)
    return min(word, rev)


@dataclass
class MomentProblem:
    monomials: list
    classes: dict
    positions: dict
    objective: dict
    constant: float

    @property
    def size(self):
        return len(self.monomials)


def _party_words(n_inputs, n_outputs, length):
    letters = [(x, a) for x in range(n_inputs) for a in range(n_outputs - 1)]
    words = {()}
    frontier = {()}
    for _ in range(length):
        nxt = set()
        for w in frontier:
            for letter in letters:
                reduced = _reduce_party(w + (letter,))
                if reduced is not None and len(reduced) == len(w) + 1:
                    nxt.add(reduced)
        words |= nxt
        frontier = nxt
    return words


def moment_problem(game, level):
    """Moment matrix index data for the NPA relaxation at ``level``."""
    if level < 1:
        raise GameError("NPA level must be at least 1")
    n = game.n
    if 2 * level < n:
        raise GameError(f"level {level} cannot express {n}-party correlators; use level >= {math.ceil(n / 2)}")
    ins, outs = game.scenario.input_sizes, game.scenario.output_sizes
    per_party = [sorted(_party_words(ins[p], outs[p], level), key=lambda w: (len(w), w)) for p in range(n)]
    monomials = []
    for combo in itertools.product(*per_party):
        if sum(len(w) for w in combo) <= level:
            monomials.append(tuple(combo))
    monomials.sort(key=lambda w: (sum(len(p) for p in w), w))
    if len(monomials) > NPA_MAX_MONOMIALS:
        raise MomentBudgetExceeded(f"moment matrix would have {len(monomials)} rows "
                                   f"(limit {NPA_MAX_MONOMIALS})")
    classes, positions = {}, {}
    for i, u in enumerate(monomials):
        for j in range(i, len(monomials)):
            v = monomials[j]
            word = []
            for p in range(n):
                reduced = _reduce_party(tuple(reversed(u[p])) + v[p])
                if reduced is None:
                    break
                word.append(reduced)
            else:
                key = _canonical(tuple(word))
                idx = classes.setdefault(key, len(classes))
                positions.setdefault(idx, []).append((i, j))
                continue
    if len(classes) > NPA_MAX_MOMENTS:
        raise MomentBudgetExceeded(f"{len(classes)} distinct moments (limit {NPA_MAX_MOMENTS})")
    objective, constant = _objective(game, classes)
    return MomentProblem(monomials, classes, positions, objective, constant)


def _output_operator(x, a, n_outputs):
    if a < n_outputs - 1:
        return {((x, a),): 1.0}
    terms = {(): 1.0}
    for b in range(n_outputs - 1):
        terms[((x, b),)] = -1.0
    return terms


def _objective(game, classes):
    n = game.n
    ins, outs = game.scenario.input_sizes, game.scenario.output_sizes
    weights = game.prior.reshape(game.prior.shape + (1,) * n) * game.predicate
    objective, constant = {}, 0.0
    cache = {}
    for s in itertools.product(*(range(k) for k in ins)):
        for a in itertools.product(*(range(k) for k in outs)):
            w = weights[s + a]
            if w == 0:
                continue
            expansion = {(): 1.0}
            for p in range(n):
                key = (p, s[p], a[p])
                if key not in cache:
                    cache[key] = _output_operator(s[p], a[p], outs[p])
                expansion = {prev + (word,): cp * cw for prev, cp in expansion.items()
                             for word, cw in cache[key].items()}
            for word, coef in expansion.items():
                if all(len(part) == 0 for part in word):
                    constant += w * coef
                    continue
                idx = classes.get(_canonical(word))
                if idx is None:
                    raise GameError("objective moment missing from the moment matrix; raise the level")
                objective[idx] = objective.get(idx, 0.0) + w * coef
    return objective, constant


def _primal_program(problem):
    """Moment matrix as the variable: equality chains per class, vanishing words pinned to zero."""
    size = problem.size
    conic = conic_solver.ConicProblem([size], sense="max")
    rows, i_idx, j_idx, values, rhs = [], [], [], [], []

    def entry(row, i, j, value):
        rows.append(row)
        i_idx.append(i)
        j_idx.append(j)
        values.append(value)

    cost = np.zeros((size, size))
    covered = np.zeros((size, size), dtype=bool)
    row = 0
    for idx, spots in problem.positions.items():
        first = spots[0]
        weight = problem.objective.get(idx, 0.0)
        cost[first] += weight if first[0] == first[1] else weight / 2
        cost[first[::-1]] = cost[first]
        for i, j in spots:
            covered[i, j] = True
        if first == (0, 0):
            entry(row, 0, 0, 1.0)
            rhs.append(1.0)
            row += 1
        for other in spots[1:]:
            entry(row, *first, 1.0)
            entry(row, *other, -1.0)
            rhs.append(0.0)
            row += 1
    for i, j in zip(*np.triu_indices(size)):
        if not covered[i, j]:
            entry(row, i, j, 1.0)
            rhs.append(0.0)
            row += 1
    conic.set_objective({0: cost})
    conic.add_entry_constraints(rows, np.zeros(len(rows), dtype=int), i_idx, j_idx, values, rhs)
    return conic


def _dual_program(problem, n_parties):
    """Moment matrix as a slack: one equality per non-trivial moment, bound read from the dual value."""
    identity = problem.classes[_canonical(((),) * n_parties)]
    size = problem.size
    conic = conic_solver.ConicProblem([size], sense="min")
    cost = np.zeros((size, size))
    cost[0, 0] = 1.0
    conic.set_objective({0: cost})
    rows, i_idx, j_idx, rhs = [], [], [], []
    row = 0
    for idx in range(len(problem.classes)):
        if idx == identity:
            continue
        for i, j in problem.positions[idx]:
            rows.append(row)
            i_idx.append(i)
            j_idx.append(j)
        rhs.append(problem.objective.get(idx, 0.0))
        row += 1
    values = np.where(np.array(i_idx) == np.array(j_idx), -1.0, -2.0)
    conic.add_entry_constraints(rows, np.zeros(len(rows), dtype=int), i_idx, j_idx, values, rhs)
    return conic


def _primal_rows(problem):
    return problem.size * (problem.size + 1) // 2 - len(problem.classes) + 1


def npa_upper_bound(game, level=2, form="auto", return_moments=False):
    """Upper bound on the quantum winning probability of a nonlocal game (empty graph).

    ``form`` picks the conic formulation: "primal" (moment matrix as the
    variable), "dual" (moment matrix as a slack) or "auto", which takes
    the one with fewer equality constraints.
    """
    if isinstance(game, MultiStepGame):
        raise GameError("NPA applies to nonlocal games; transform or aggregate first")
    if game.graph.edges:
        raise GameError("NPA applies to games on the empty graph")
    if form not in ("auto", "primal", "dual"):
        raise GameError(f"unknown NPA form {form!r}")
    key = (game.scenario.shape, game.predicate.tobytes(), game.prior.tobytes(), level, form)
    if not return_moments and key in _NPA_CACHE:
        return _NPA_CACHE[key]
    problem = moment_problem(game, level)
    if form == "auto":
        form = "primal" if _primal_rows(problem) < len(problem.classes) - 1 else "dual"
    if form == "primal":
        solution = conic_solver.solve(_primal_program(problem))
        value = solution.primal_value
    else:
        solution = conic_solver.solve(_dual_program(problem, game.n))
        value = solution.dual_value
    _check_solution(solution, f"NPA level {level}")
    bound = float(problem.constant + value)
    _NPA_CACHE[key] = bound
    if return_moments:
        return bound, problem, solution
    return bound


def _check_solution(solution, label):
    if solution.status == "optimal":
        return
    if solution.status == "max_iter" and solution.gap < 1e-7 and solution.primal_residual < 1e-7:
        return
    raise conic_solver.SolverError(f"{label}: solver status {solution.status} (gap {solution.gap:.2e})")


# ----------------------------------------------------------------------------
# LC-game bounds


def forwarding_upper_bound(game, level=2):
    """NPA bound on the forwarding value via the light-cone transform."""
    if isinstance(game, MultiStepGame):
        game = induced_simple_game(game)
    return npa_upper_bound(forwarding_transform(game), level)


def _components(graph):
    """Bidirected connected components with more than one vertex."""
    seen, groups = set(), []
    for start in range(graph.n):
        if start in seen:
            continue
        stack, comp = [start], set()
        while stack:
            v = stack.pop()
            if v in comp:
                continue
            comp.add(v)
            stack.extend(j for i, j in graph.edges if i == v)
            stack.extend(i for i, j in graph.edges if j == v)
        seen |= comp
        if len(comp) > 1:
            groups.append(sorted(comp))
    return groups


def nonlocal_reduction(game, clique=None):
    """Nonlocal game obtained by aggregating ``clique`` (default: every communicating group)."""
    if isinstance(game, MultiStepGame):
        if clique is None:
            clique_list = _components(connectivity_graph(game.latency))
        else:
            clique_list = [sorted(clique)]
        reduced = game
        for group in clique_list:
            reduced = aggregate_clique(reduced, group, mode="quantum")
            if isinstance(reduced, SimpleLCGame):
                break
        if isinstance(reduced, MultiStepGame):
            reduced = induced_simple_game(reduced)
        game = reduced
        remaining = _components(game.graph)
    else:
        remaining = _components(game.graph) if clique is None else [sorted(clique)]
    for group in remaining:
        game = aggregate_clique(game, group, mode="quantum")
    if game.graph.edges:
        raise GameError("aggregation left communication edges; choose an isolated clique")
    return game


def aggregated_upper_bound(game, clique=None, level=2, method="auto"):
    """Quantum upper bound from the nonlocal game with ``clique`` merged into one party.

    ``method`` is "npa", "xor" (exact two-party XOR value) or "auto", which
    uses the exact XOR value whenever the aggregated game is a two-party
    XOR game.
    """
    reduced = nonlocal_reduction(game, clique)
    if method not in ("auto", "npa", "xor"):
        raise GameError(f"unknown bound method {method!r}")
    if method == "xor" or (method == "auto" and is_xor_game(reduced)):
        return xor_game_value(reduced)
    return npa_upper_bound(reduced, level)


# ----------------------------------------------------------------------------
# Latency sweep


@dataclass
class SweepResult:
    tau: int
    omega_c: float
    omega_q_lower: float
    omega_q_upper: float
    omega_f_upper: float
    regime: str


SWEEP_COLUMNS = ["tau", "omega_c", "omega_q_lower", "omega_q_upper", "omega_f_upper", "regime"]


def regime_of(game):
    """Classify a SISO game by what its latency allows before the output step."""
    graph = connectivity_graph(game.latency)
    n = game.n
    if not graph.edges:
        return "nonlocal"
    if len(graph.edges) == n * (n - 1):
        return "full"
    lat = game.latency
    if any(lat(i, j) + lat(j, i) <= lat.tau for i, j in graph.edges):
        return "aggregated"
    return "one-round"


def _sweep_row(game, level, config, jobs):
    regime = regime_of(game)
    omega_c = classical_engine.classical_value_multistep(game, jobs=jobs).value
    forward = None
    if regime == "full":
        lower = upper = algebraic_value(game)
    elif regime == "nonlocal":
        simple = induced_simple_game(game)
        upper = npa_upper_bound(simple, level)
        forward = upper
        lower = seesaw.seesaw_optimize(simple, _config_for(config, upper)).value
    elif regime == "one-round":
        simple = induced_simple_game(game)
        upper = aggregated_upper_bound(simple, level=level)
        forward = forwarding_upper_bound(simple, level)
        lower = seesaw.seesaw_optimize(simple, _config_for(config, upper)).value
    else:
        reduced = nonlocal_reduction(game)
        upper = aggregated_upper_bound(game, level=level)
        lower = seesaw.seesaw_optimize(reduced, _config_for(config, upper, aggregated=True)).value
    return regime, omega_c, max(lower, omega_c), upper, forward


def _config_for(config, upper, aggregated=False):
    """Stop restarts at the upper bound; aggregated games keep no channel dimensions."""
    if aggregated:
        return replace(config, local_dims=None, channel_dims=None, target=upper)
    return replace(config, target=upper)


def latency_sweep(game, taus, level=2, config=None, jobs=1):
    """Per-horizon values of a SISO game; columns are made monotone in tau.

    Values are reported through the game's score.  A strategy for horizon
    tau also works for every later horizon, so lower bounds are carried
    forward with a running maximum and upper bounds backward with a running
    minimum.
    """
    if not isinstance(game, MultiStepGame) or not game.is_siso():
        raise GameError("latency sweep needs a SISO game")
    config = config or seesaw.SeesawConfig()
    taus = sorted(set(int(t) for t in taus))
    rows = []
    for tau in taus:
        regime, omega_c, lower, upper, forward = _sweep_row(with_horizon(game, tau), level, config, jobs)
        rows.append([tau, omega_c, lower, upper, forward, regime])
    for k in range(1, len(rows)):
        rows[k][2] = max(rows[k][2], rows[k - 1][2])
    for k in range(len(rows) - 2, -1, -1):
        rows[k][3] = min(rows[k][3], rows[k + 1][3])
    results = []
    for tau, omega_c, lower, upper, forward, regime in rows:
        results.append(SweepResult(tau, reported_value(game, omega_c), reported_value(game, lower),
                                   reported_value(game, upper), reported_value(game, forward), regime))
    return results


def _fmt(value):
    return "N/A" if value is None else f"{value:.10f}"


def sweep_to_csv(results):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in results:
        writer.writerow([r.tau, _fmt(r.omega_c), _fmt(r.omega_q_lower), _fmt(r.omega_q_upper),
                         _fmt(r.omega_f_upper), r.regime])
    return buffer.getvalue()


def sweep_to_json(results):
    return json.dumps([asdict(r) for r in results], indent=2, sort_keys=True) + "\n"


def sweep_from_csv(text):
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        rows.append(SweepResult(int(rec["tau"]),
                                *(None if rec[c] == "N/A" else float(rec[c]) for c in SWEEP_COLUMNS[1:5]),
                                rec["regime"]))
    return rows


# ----------------------------------------------------------------------------
# Builders


def xor_game_builder(beta_hat=None, boolean_id=None, n=3, m=3, eta=None, lam=0.0, graph=None):
    """Build an XOR-family game from coefficients, a Boolean-function ID or a perturbation.

    Exactly one of ``beta_hat`` and ``boolean_id`` must be given; ``eta`` and
    ``lam`` mix a perturbation into a coefficient game.
    """
    if (beta_hat is None) == (boolean_id is None):
        raise GameError("give exactly one of beta_hat and boolean_id")
    if boolean_id is not None:
        if eta is not None or lam:
            raise GameError("perturbations apply to coefficient games only")
        return games.extended_xor_game(boolean_id, n, m, graph)
    beta = np.asarray(beta_hat, dtype=float).ravel()
    if eta is None and lam == 0.0 and np.all(np.isin(beta, (-1.0, 1.0))):
        return games.xor_game(beta, graph)
    return games.signed_xor_game(beta, eta, lam, graph)
