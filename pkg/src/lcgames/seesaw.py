"""See-saw lower bounds for simple LC games in the Choi (comb) picture.

Every party's strategy is a family of positive operators K[s, a] on
B_i (x) B_out (x) B_in, where B_out and B_in are the tensor products of the
channels to and from the party's graph neighbours in ascending order (the
memory channel is absorbed).  A family is a valid local strategy when
K(s) = sum_a K[s, a] satisfies

    tr K(s) = d_B d_in
    tr_in K(s) (x) I_in = d_in K(s)
    tr_{in,out} K(s) = d_in I_B

and every K[s, a] is positive semidefinite.  Behaviors are computed by
linking the combs with the shared state over all shared factors.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from opt_einsum import contract

from . import conic_solver
from .game_model import GameError, SimpleLCGame
from .quantum_sim import check_isometry

FEAS_TOL = 1e-8
DEFAULT_TOL = 1e-6
# Degenerate optima can stall the interior-point method just short of its
# tolerances; such points are accepted and then repaired to exact feasibility.
ACCEPT_GAP = 1e-7
STALL_FEAS_TOL = 1e-5


# ----------------------------------------------------------------------------
# Link product


def _symbols():
    return iter(range(10 ** 6))


def link_product(x, dims_x, y, dims_y, shared):
    """Link product of two operators on labelled tensor factors.

    ``dims_x`` and ``dims_y`` list ``(label, dim)`` pairs in the operators'
    factor order.  Factors named in ``shared`` are contracted with a partial
    transpose; the result lives on X's remaining factors followed by Y's.
    Returns ``(matrix, factors)``.
    """
    dims_x, dims_y = [tuple(p) for p in dims_x], [tuple(p) for p in dims_y]
    labels_x, labels_y = [p[0] for p in dims_x], [p[0] for p in dims_y]
    shared = list(shared)
    for label in shared:
        if label not in labels_x or label not in labels_y:
            raise GameError(f"shared factor {label!r} is missing from an operand")
        if dict(dims_x)[label] != dict(dims_y)[label]:
            raise GameError(f"shared factor {label!r} has dimensions {dict(dims_x)[label]} and {dict(dims_y)[label]}")
    clash = (set(labels_x) & set(labels_y)) - set(shared)
    if clash:
        raise GameError(f"factors {sorted(map(str, clash))} appear on both sides but are not shared")
    x = np.asarray(x)
    y = np.asarray(y)
    for mat, dims in ((x, dims_x), (y, dims_y)):
        size = math.prod(d for _, d in dims)
        if mat.shape != (size, size):
            raise GameError(f"operator of shape {mat.shape} does not match factor dimensions {dims}")
    symbols = _symbols()
    rows = {label: next(symbols) for label in labels_x + labels_y}
    cols = {label: next(symbols) for label in rows}
    x_idx = [rows[l] for l in labels_x] + [cols[l] for l in labels_x]
    y_idx = [rows[l] for l in labels_y] + [cols[l] for l in labels_y]
    free = [p for p in dims_x if p[0] not in shared] + [p for p in dims_y if p[0] not in shared]
    out_idx = [rows[l] for l, _ in free] + [cols[l] for l, _ in free]
    xt = x.reshape([d for _, d in dims_x] * 2)
    yt = y.reshape([d for _, d in dims_y] * 2)
    result = contract(xt, x_idx, yt, y_idx, out_idx)
    size = math.prod(d for _, d in free)
    return np.asarray(result).reshape(size, size), free


def choi_of_isometry(isometry):
    """Unnormalised Choi operator sum_jk |j><k| (x) W|j><k|W^dagger (input factor first)."""
    isometry = np.asarray(isometry, dtype=complex)
    check_isometry(isometry, label="Choi input")
    vec = isometry.T.reshape(-1)
    return np.outer(vec, vec.conj())


# ----------------------------------------------------------------------------
# Comb operators


def _partial_trace_last(matrix, keep, drop):
    return np.trace(matrix.reshape(keep, drop, keep, drop), axis1=1, axis2=3)


@dataclass(frozen=True)
class CombOperator:
    """Local strategy of one party: ``ops[s, a]`` on B_i (x) B_out (x) B_in.

    ``out_dims`` and ``in_dims`` follow the ascending order of the party's
    out- and in-neighbours in the connectivity graph.
    """

    party: int
    local_dim: int
    out_dims: tuple
    in_dims: tuple
    ops: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "out_dims", tuple(int(d) for d in self.out_dims))
        object.__setattr__(self, "in_dims", tuple(int(d) for d in self.in_dims))
        ops = np.asarray(self.ops, dtype=complex)
        if ops.ndim != 4 or ops.shape[2:] != (self.size, self.size):
            raise GameError(f"comb operators need shape (S, A, {self.size}, {self.size}), got {ops.shape}")
        object.__setattr__(self, "ops", ops)

    @property
    def d_out(self):
        return math.prod(self.out_dims)

    @property
    def d_in(self):
        return math.prod(self.in_dims)

    @property
    def size(self):
        return self.local_dim * self.d_out * self.d_in

    @property
    def n_inputs(self):
        return self.ops.shape[0]

    @property
    def n_outputs(self):
        return self.ops.shape[1]

    def residuals(self):
        return comb_residuals(self)


def comb_residuals(comb):
    """Largest violation of each comb constraint over all inputs."""
    d_b, d_out, d_in = comb.local_dim, comb.d_out, comb.d_in
    worst = {"trace": 0.0, "no_signalling": 0.0, "normalisation": 0.0, "positivity": 0.0, "hermitian": 0.0}
    for s in range(comb.n_inputs):
        total = comb.ops[s].sum(axis=0)
        worst["trace"] = max(worst["trace"], abs(np.trace(total) - d_b * d_in))
        reduced = _partial_trace_last(total, d_b * d_out, d_in)
        product = np.kron(reduced, np.eye(d_in))
        worst["no_signalling"] = max(worst["no_signalling"], np.abs(product - d_in * total).max())
        marginal = _partial_trace_last(reduced, d_b, d_out)
        worst["normalisation"] = max(worst["normalisation"], np.abs(marginal - d_in * np.eye(d_b)).max())
        for op in comb.ops[s]:
            worst["hermitian"] = max(worst["hermitian"], np.abs(op - op.conj().T).max())
            low = np.linalg.eigvalsh((op + op.conj().T) / 2)[0]
            worst["positivity"] = max(worst["positivity"], -low)
    return {k: float(v) for k, v in worst.items()}


def max_residual(comb):
    return max(comb_residuals(comb).values())


def _haar_density(dim, rng):
    return conic_solver.random_density(dim, rng)


@lru_cache(maxsize=64)
def _projection_data(d_b, d_out, d_in, n_out):
    """Complex matrix of the affine constraints on vec(K~) and its pseudo-inverse.

    K~ lives on B (x) out (x) in (x) anc.  The constraints act on tr_anc K~:
    the product form over the input channels and the identity marginal on B.
    """
    size = d_b * d_out * d_in
    full = size * n_out
    rows = []
    basis = np.eye(full * full).reshape(full * full, full, full)
    for e in basis:
        summed = _partial_trace_last(e, size, n_out)
        reduced = _partial_trace_last(summed, d_b * d_out, d_in)
        product = np.kron(reduced, np.eye(d_in)) - d_in * summed
        marginal = _partial_trace_last(reduced, d_b, d_out)
        rows.append(np.concatenate([product.ravel(), marginal.ravel()]))
    matrix = np.array(rows).T
    return matrix, np.linalg.pinv(matrix)


def _project(ktilde, d_b, d_out, d_in, n_out):
    matrix, pinv = _projection_data(d_b, d_out, d_in, n_out)
    target = np.concatenate([np.zeros((d_b * d_out * d_in) ** 2),
                             (d_in * np.eye(d_b)).ravel()])
    vec = ktilde.ravel()
    vec = vec - pinv @ (matrix @ vec - target)
    out = vec.reshape(ktilde.shape)
    return (out + out.conj().T) / 2


def random_local_strategy(dims, n_outputs, n_inputs, seed=None, party=0):
    """Random feasible comb for one party.

    ``dims`` is ``(local_dim, out_dims, in_dims)``.  Each input gets a
    Haar-derived operator on the party's systems and an |A|-dimensional
    ancilla; it is scaled, projected onto the linear comb constraints, mixed
    with the normalised identity just enough to become positive, and the
    ancilla is read out in the computational basis.
    """
    local_dim, out_dims, in_dims = dims
    out_dims, in_dims = tuple(out_dims), tuple(in_dims)
    d_out, d_in = math.prod(out_dims), math.prod(in_dims)
    size = local_dim * d_out * d_in
    full = size * n_outputs
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ops = np.zeros((n_inputs, n_outputs, size, size), dtype=complex)
    floor = 1.0 / (d_out * n_outputs)
    for s in range(n_inputs):
        kbar = _haar_density(full, rng) * (local_dim * d_in)
        ktilde = _project(kbar, local_dim, d_out, d_in, n_outputs)
        blocks = _mix_to_positive(ktilde, floor).reshape(size, n_outputs, size, n_outputs)
        for a in range(n_outputs):
            ops[s, a] = blocks[:, a, :, a]
    return CombOperator(party, local_dim, out_dims, in_dims, ops)


def _mix_to_positive(ktilde, floor):
    """Smallest mixture with floor * I that is positive semidefinite."""
    low = np.linalg.eigvalsh(ktilde)[0]
    if low >= 0:
        return ktilde
    weight = -low / (floor - low)
    return (1 - weight) * ktilde + weight * floor * np.eye(ktilde.shape[0])


def _repair(blocks, d_b, d_out, d_in):
    """Feasible comb operators closest in spirit to a slightly infeasible solver output."""
    n_out, size = len(blocks), blocks[0].shape[0]
    ktilde = np.zeros((size, n_out, size, n_out), dtype=complex)
    for a, block in enumerate(blocks):
        ktilde[:, a, :, a] = block
    ktilde = _project(ktilde.reshape(size * n_out, size * n_out), d_b, d_out, d_in, n_out)
    fixed = _mix_to_positive(ktilde, 1.0 / (d_out * n_out)).reshape(size, n_out, size, n_out)
    return [fixed[:, a, :, a] for a in range(n_out)]


def comb_from_strategy(strategy, graph):
    """Combs K[s, a] = Choi(W(s)) linked with Pi_a^T (the effect's Choi operator) over the memory channel."""
    combs = []
    for i in range(strategy.n):
        outs = sorted(graph.out_neighbors(i))
        ins = sorted(graph.in_neighbors(i))
        leg_out = strategy.out_legs(i)
        leg_in = strategy.in_legs(i)
        extra = (set(leg_out) - set(outs) - {i}) | (set(leg_in) - set(ins) - {i})
        if any(strategy.channel(i, j) > 1 for j in set(leg_out) - set(outs) - {i}) or \
                any(strategy.channel(k, i) > 1 for k in set(leg_in) - set(ins) - {i}):
            raise GameError(f"party {i} uses channels {sorted(extra)} outside the graph")
        w_dims = [(("B", i), strategy.dims[i])] + [(("C", i, j), strategy.channel(i, j)) for j in leg_out]
        p_dims = [(("C", k, i), strategy.channel(k, i)) for k in leg_in]
        order = [("B", i)] + [("C", i, j) for j in outs] + [("C", k, i) for k in ins]
        out_dims = tuple(strategy.channel(i, j) for j in outs)
        in_dims = tuple(strategy.channel(k, i) for k in ins)
        size = strategy.dims[i] * math.prod(out_dims) * math.prod(in_dims)
        ops = np.zeros((len(strategy.isometries[i]), len(strategy.measurements[i]), size, size), dtype=complex)
        for s, w in enumerate(strategy.isometries[i]):
            choi = choi_of_isometry(w)
            for a, proj in enumerate(strategy.measurements[i]):
                linked, factors = link_product(choi, w_dims, proj.T, p_dims, [("C", i, i)])
                ops[s, a] = _reorder(linked, factors, order)
        combs.append(CombOperator(i, strategy.dims[i], out_dims, in_dims, ops))
    return combs


def _reorder(matrix, factors, order):
    """Permute tensor factors into ``order``; factors missing from ``factors`` must be trivial."""
    labels = [l for l, _ in factors]
    dims = [d for _, d in factors]
    perm = [labels.index(l) for l in order if l in labels]
    if len(perm) != len(labels):
        raise GameError("factor reordering lost a non-trivial factor")
    k = len(labels)
    tensor = matrix.reshape(dims * 2).transpose(perm + [p + k for p in perm])
    size = math.prod(dims)
    return tensor.reshape(size, size)


# ----------------------------------------------------------------------------
# Network contraction


def _check_combs(combs, graph, local_dims=None):
    if len(combs) != graph.n:
        raise GameError(f"need one comb per party, got {len(combs)} for {graph.n} parties")
    for i, comb in enumerate(combs):
        if comb.party != i:
            raise GameError(f"comb {i} belongs to party {comb.party}")
        if len(comb.out_dims) != len(graph.out_neighbors(i)) or len(comb.in_dims) != len(graph.in_neighbors(i)):
            raise GameError(f"comb {i} does not match the graph neighbourhoods")
        for pos, j in enumerate(sorted(graph.out_neighbors(i))):
            other = combs[j]
            if other.in_dims[sorted(graph.in_neighbors(j)).index(i)] != comb.out_dims[pos]:
                raise GameError(f"channel ({i},{j}) has mismatched dimensions")
        if local_dims is not None and local_dims[i] != comb.local_dim:
            raise GameError(f"party {i} comb acts on dimension {comb.local_dim}, state factor is {local_dims[i]}")


class _Network:
    """Index bookkeeping for contracting a shared state with all parties' combs."""

    def __init__(self, combs, graph):
        self.n = graph.n
        self.combs = combs
        symbols = _symbols()
        self.row, self.col = {}, {}
        self.factors = []
        for i, comb in enumerate(combs):
            labels = [("B", i)] + [("C", i, j) for j in sorted(graph.out_neighbors(i))] \
                     + [("C", k, i) for k in sorted(graph.in_neighbors(i))]
            dims = [comb.local_dim] + list(comb.out_dims) + list(comb.in_dims)
            for label in labels:
                if label not in self.row:
                    self.row[label], self.col[label] = next(symbols), next(symbols)
            self.factors.append((labels, dims))
        self.inputs = [next(symbols) for _ in range(self.n)]
        self.outputs = [next(symbols) for _ in range(self.n)]

    def comb_operand(self, i):
        labels, dims = self.factors[i]
        comb = self.combs[i]
        tensor = comb.ops.reshape((comb.n_inputs, comb.n_outputs) + tuple(dims) * 2)
        idx = [self.inputs[i], self.outputs[i]] + [self.row[l] for l in labels] + [self.col[l] for l in labels]
        return tensor, idx

    def rho_operand(self, rho):
        dims = [c.local_dim for c in self.combs]
        labels = [("B", i) for i in range(self.n)]
        idx = [self.row[l] for l in labels] + [self.col[l] for l in labels]
        return np.asarray(rho).reshape(dims * 2), idx

    def open_indices(self, i):
        labels, _ = self.factors[i]
        return [self.inputs[i], self.outputs[i]] + [self.row[l] for l in labels] + [self.col[l] for l in labels]


def _contract(operands, out):
    args = []
    for tensor, idx in operands:
        args += [tensor, idx]
    return np.asarray(contract(*args, out))


def behavior_from_combs(rho, combs, graph):
    """p(a|s) obtained by linking every party's comb with the shared state."""
    _check_combs(combs, graph)
    net = _Network(combs, graph)
    size = math.prod(c.local_dim for c in combs)
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (size, size):
        raise GameError(f"state has shape {rho.shape}, local dimensions need {(size, size)}")
    operands = [net.rho_operand(rho)] + [net.comb_operand(i) for i in range(net.n)]
    table = _contract(operands, net.inputs + net.outputs)
    return table.real


def _weights(game):
    prior = game.prior.reshape(game.prior.shape + (1,) * game.scenario.n)
    return prior * game.predicate


def objective_value(game, rho, combs):
    behavior = behavior_from_combs(rho, combs, game.graph)
    return float(np.sum(_weights(game) * behavior))


def _party_environment(game, rho, combs, net, i):
    """G[s_i, a_i] with objective = sum tr(K[s_i, a_i] G^T)."""
    weights = (_weights(game), net.inputs + net.outputs)
    operands = [weights, net.rho_operand(rho)] + [net.comb_operand(j) for j in range(net.n) if j != i]
    env = _contract(operands, net.open_indices(i))
    comb = combs[i]
    return env.reshape(comb.n_inputs, comb.n_outputs, comb.size, comb.size)


def _state_environment(game, combs, net):
    weights = (_weights(game), net.inputs + net.outputs)
    operands = [weights] + [net.comb_operand(j) for j in range(net.n)]
    labels = [("B", i) for i in range(net.n)]
    env = _contract(operands, [net.row[l] for l in labels] + [net.col[l] for l in labels])
    size = math.prod(c.local_dim for c in combs)
    return env.reshape(size, size)


# ----------------------------------------------------------------------------
# Sub-steps


def _hermitian_basis(dim, traceless=False):
    basis = []
    for j in range(dim):
        for k in range(j + 1, dim):
            sym = np.zeros((dim, dim), dtype=complex)
            sym[j, k] = sym[k, j] = 1.0
            anti = np.zeros((dim, dim), dtype=complex)
            anti[j, k], anti[k, j] = -1j, 1j
            basis += [sym, anti]
    for j in range(dim):
        if traceless and j == 0:
            continue
        diag = np.zeros((dim, dim), dtype=complex)
        diag[j, j] = 1.0
        if traceless:
            diag[0, 0] = -1.0
        basis.append(diag)
    return basis


@lru_cache(maxsize=64)
def _party_problem(d_b, d_out, d_in, n_out):
    """SDP template over K[a], a < n_out, sharing one comb constraint set."""
    size = d_b * d_out * d_in
    problem = conic_solver.ConicProblem([size] * n_out, hermitian=[True] * n_out, sense="max")
    blocks = range(n_out)
    for outer in _hermitian_basis(d_b * d_out):
        for inner in _hermitian_basis(d_in, traceless=True):
            coef = np.kron(outer, inner)
            problem.add_constraint({a: coef for a in blocks}, 0.0)
    for local in _hermitian_basis(d_b):
        coef = np.kron(local, np.eye(d_out * d_in))
        problem.add_constraint({a: coef for a in blocks}, d_in * np.trace(local).real)
    return problem


def _solve_party(comb, env, gap_tol):
    problem = _party_problem(comb.local_dim, comb.d_out, comb.d_in, comb.n_outputs)
    ops = np.array(comb.ops)
    for s in range(comb.n_inputs):
        coefs = {}
        for a in range(comb.n_outputs):
            g = env[s, a].T
            coefs[a] = (g + g.conj().T) / 2
        problem.set_objective(coefs)
        solution = conic_solver.solve(problem, gap_tol=gap_tol)
        stalled = solution.status == "max_iter" and solution.gap < ACCEPT_GAP \
            and solution.primal_residual < STALL_FEAS_TOL
        if solution.status != "optimal" and not stalled:
            raise conic_solver.SolverError(f"party {comb.party} input {s}: solver status {solution.status}")
        blocks = [(block + block.conj().T) / 2 for block in solution.blocks]
        for a, block in enumerate(_repair(blocks, comb.local_dim, comb.d_out, comb.d_in)):
            ops[s, a] = block
    return CombOperator(comb.party, comb.local_dim, comb.out_dims, comb.in_dims, ops)


def _solve_state(env):
    """Best density matrix for tr(rho G^T): the top eigenvector, i.e. the exact SDP optimum."""
    g = env.T
    g = (g + g.conj().T) / 2
    _, vecs = np.linalg.eigh(g)
    top = vecs[:, -1]
    return np.outer(top, top.conj())


# ----------------------------------------------------------------------------
# Driver


@dataclass(frozen=True)
class SeesawConfig:
    """Dimensions and stopping rule; ``None`` dimensions mean qubits."""

    local_dims: tuple = None
    channel_dims: dict = None
    restarts: int = 1
    tol: float = DEFAULT_TOL
    seed: int = 0
    max_sweeps: int = 200
    jobs: int = 1
    gap_tol: float = 1e-9
    # Known upper bound: remaining restarts are skipped once it is reached within target_tol.
    target: float = None
    target_tol: float = 1e-6

    def __post_init__(self):
        if self.restarts < 1:
            raise GameError("restarts must be at least 1")
        if self.local_dims is not None and any(int(d) < 1 for d in self.local_dims):
            raise GameError("local dimensions must be at least 1")
        if self.channel_dims is not None and any(int(d) < 1 for d in self.channel_dims.values()):
            raise GameError("channel dimensions must be at least 1")
        if self.max_sweeps < 1:
            raise GameError("max_sweeps must be at least 1")

    def dims_for(self, graph):
        local = tuple(self.local_dims) if self.local_dims is not None else (2,) * graph.n
        if len(local) != graph.n:
            raise GameError(f"{len(local)} local dimensions for {graph.n} parties")
        channels = dict(self.channel_dims or {})
        for edge in channels:
            if tuple(edge) not in graph.edges:
                raise GameError(f"channel dimension given for non-edge {edge}")
        full = {edge: int(channels.get(edge, 2)) for edge in graph.edges}
        return local, full


class SeesawResult(NamedTuple):
    value: float
    rho: np.ndarray
    combs: list
    sweeps: list
    best_restart: int


def initial_point(game, config, seed):
    graph = game.graph
    local, channels = config.dims_for(graph)
    rng = np.random.default_rng(seed)
    size = math.prod(local)
    rho = conic_solver.random_density(size, rng)
    combs = []
    for i in range(graph.n):
        out_dims = [channels[(i, j)] for j in sorted(graph.out_neighbors(i))]
        in_dims = [channels[(k, i)] for k in sorted(graph.in_neighbors(i))]
        comb = random_local_strategy((local[i], out_dims, in_dims), game.scenario.output_sizes[i],
                                     game.scenario.input_sizes[i], rng, party=i)
        combs.append(comb)
    return rho, combs


def _run_restart(game, config, restart):
    """One see-saw ascent; returns (value, rho, combs, per-sweep records)."""
    seed = config.seed + restart
    rho, combs = initial_point(game, config, seed)
    net = _Network(combs, game.graph)
    value = objective_value(game, rho, combs)
    records = []
    for sweep in range(1, config.max_sweeps + 1):
        start = value
        rho = _solve_state(_state_environment(game, combs, net))
        value = objective_value(game, rho, combs)
        worst = 0.0
        for i in range(game.graph.n):
            env = _party_environment(game, rho, combs, net, i)
            candidate = _solve_party(combs[i], env, config.gap_tol)
            trial = combs[:i] + [candidate] + combs[i + 1:]
            trial_value = objective_value(game, rho, trial)
            worst = max(worst, max_residual(candidate))
            if trial_value >= value:
                combs, value = trial, trial_value
                net = _Network(combs, game.graph)
        records.append({"restart": restart, "sweep": sweep, "value": value, "max_residual": worst})
        if value - start < config.tol:
            break
    return value, rho, combs, records


def seesaw_optimize(game, config=None, trace=None):
    """Best see-saw winning probability over ``config.restarts`` seeded restarts.

    ``trace`` may be a writable text stream; one JSON object per sweep is
    written to it.
    """
    if not isinstance(game, SimpleLCGame):
        raise GameError("see-saw works on simple LC games")
    config = config or SeesawConfig()
    restarts = range(config.restarts)
    if config.jobs > 1 and config.restarts > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            futures = [pool.submit(_run_restart, game, config, r) for r in restarts]
            runs = []
            for r, fut in zip(restarts, futures):
                runs.append(_wrap(r, fut.result))
    else:
        runs = []
        for r in restarts:
            runs.append(_wrap(r, lambda r=r: _run_restart(game, config, r)))
            if config.target is not None and runs[-1][0] >= config.target - config.target_tol:
                break
    best = max(range(len(runs)), key=lambda r: (runs[r][0], -r))
    sweeps = [rec for run in runs for rec in run[3]]
    if trace is not None:
        for rec in sweeps:
            trace.write(json.dumps(rec) + "\n")
    value, rho, combs, _ = runs[best]
    return SeesawResult(value, rho, combs, sweeps, best)


def _wrap(restart, call):
    try:
        return call()
    except conic_solver.SolverError as exc:
        raise conic_solver.SolverError(f"restart {restart}: {exc}") from exc
