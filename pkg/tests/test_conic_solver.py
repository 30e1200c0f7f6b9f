import cvxpy as cp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcgames import conic_solver as cs

seeds = st.integers(0, 2 ** 32 - 1)


def random_sym(k, rng):
    m = rng.standard_normal((k, k))
    return (m + m.T) / 2


def random_herm(k, rng):
    m = rng.standard_normal((k, k)) + 1j * rng.standard_normal((k, k))
    return (m + m.conj().T) / 2


def feasible_sdp(k, m, rng, hermitian=False):
    """Constraints satisfied by a positive definite point, objective bounded below by a PD cost."""
    make = random_herm if hermitian else random_sym
    mats = [make(k, rng) for _ in range(m)]
    x0 = make(k, rng)
    x0 = x0 @ x0.conj().T + np.eye(k)
    rhs = [float(np.real(np.trace(a @ x0))) for a in mats]
    cost = make(k, rng)
    cost = cost @ cost.conj().T + 0.1 * np.eye(k)
    return mats, rhs, cost


def cvxpy_sdp(mats, rhs, cost, hermitian=False):
    """Reference optimum; a Hermitian X = R + iI is modelled by real parts R (symmetric) and I (skew)."""
    k = cost.shape[0]
    re = cp.Variable((k, k), symmetric=True)
    im = cp.Variable((k, k)) if hermitian else None
    cons = []
    if hermitian:
        cons += [im == -im.T, cp.bmat([[re, -im], [im, re]]) >> 0]
    else:
        cons.append(re >> 0)

    def inner(a):
        total = cp.sum(cp.multiply(a.real, re))
        return total + cp.sum(cp.multiply(a.imag, im)) if hermitian else total

    cons += [inner(a) == b for a, b in zip(mats, rhs)]
    prob = cp.Problem(cp.Minimize(inner(cost)), cons)
    prob.solve(solver=cp.CLARABEL)
    return prob.value


@settings(max_examples=10, deadline=None)
@given(seeds, st.booleans())
def test_random_sdp_matches_cvxpy(seed, hermitian):
    rng = np.random.default_rng(seed)
    mats, rhs, cost = feasible_sdp(5, 6, rng, hermitian)
    prob = cs.ConicProblem([5], hermitian=[hermitian])
    for a, b in zip(mats, rhs):
        prob.add_constraint({0: a}, b)
    prob.set_objective({0: cost})
    sol = cs.solve(prob)
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(cvxpy_sdp(mats, rhs, cost, hermitian), abs=1e-5)
    assert sol.gap < 1e-7
    assert cs.min_eigenvalue(sol.blocks[0]) > -1e-7


def test_maxcut_relaxation_uses_sparse_path():
    # block larger than the dense Schur threshold, constrained only on its diagonal
    rng = np.random.default_rng(0)
    k = 48
    weights = np.triu((rng.random((k, k)) < 0.2).astype(float), 1)
    weights = weights + weights.T
    laplacian = np.diag(weights.sum(axis=1)) - weights
    prob = cs.ConicProblem([k], sense="max")
    idx = np.arange(k)
    prob.add_entry_constraints(idx, np.zeros(k, dtype=int), idx, idx, np.ones(k), np.ones(k))
    prob.set_objective({0: laplacian / 4})
    sol = cs.solve(prob)
    x = cp.Variable((k, k), symmetric=True)
    ref = cp.Problem(cp.Maximize(cp.trace(laplacian @ x) / 4), [x >> 0, cp.diag(x) == 1])
    ref.solve(solver=cp.CLARABEL)
    assert sol.status == "optimal"
    assert sol.value == pytest.approx(ref.value, rel=1e-6)


def test_lp_block():
    # max x0 + 2 x1 with x0 + x1 = 1, x >= 0
    prob = cs.ConicProblem([], lp_size=2, sense="max")
    prob.add_constraint({"lp": [1.0, 1.0]}, 1.0)
    prob.set_objective({"lp": [1.0, 2.0]})
    sol = cs.solve(prob)
    assert sol.value == pytest.approx(2.0, abs=1e-7)
    assert sol.lp == pytest.approx([0.0, 1.0], abs=1e-6)


def test_infeasible_problem_detected():
    prob = cs.ConicProblem([2])
    prob.add_constraint({0: np.diag([1.0, 0.0])}, -1.0)
    prob.set_objective({0: np.eye(2)})
    assert cs.solve(prob).status == "infeasible"


def test_inconsistent_equalities_rejected():
    prob = cs.ConicProblem([2])
    prob.add_constraint({0: np.eye(2)}, 1.0)
    prob.add_constraint({0: 2 * np.eye(2)}, 3.0)
    prob.set_objective({0: np.eye(2)})
    with pytest.raises(cs.SolverError):
        cs.solve(prob)


def test_dependent_equalities_dropped():
    prob = cs.ConicProblem([2])
    prob.add_constraint({0: np.eye(2)}, 1.0)
    prob.add_constraint({0: 2 * np.eye(2)}, 2.0)
    prob.set_objective({0: np.diag([1.0, 2.0])})
    sol = cs.solve(prob)
    assert sol.value == pytest.approx(1.0, abs=1e-7)


def test_entry_constraint_semantics():
    # X_01 = 0.3 pins the off-diagonal entry itself
    prob = cs.ConicProblem([2])
    prob.add_entry_constraints([0, 1, 2], [0, 0, 0], [0, 1, 0], [0, 1, 1], [1.0, 1.0, 1.0], [1.0, 1.0, 0.3])
    prob.set_objective({0: np.eye(2)})
    sol = cs.solve(prob)
    assert sol.blocks[0][0, 1] == pytest.approx(0.3, abs=1e-7)


def test_coefficient_validation():
    prob = cs.ConicProblem([2])
    with pytest.raises(ValueError):
        prob.add_constraint({0: np.array([[0.0, 1.0], [0.0, 0.0]])}, 0.0)
    with pytest.raises(ValueError):
        prob.add_constraint({0: np.eye(3)}, 0.0)
    with pytest.raises(ValueError):
        cs.ConicProblem([2], sense="up")


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_realify_round_trip(seed):
    h = random_herm(4, np.random.default_rng(seed))
    assert np.allclose(cs.complexify(cs.realify(h)), h)
    assert np.linalg.eigvalsh(cs.realify(h))[0] == pytest.approx(np.linalg.eigvalsh(h)[0])


def test_random_density_is_a_state():
    rho = cs.random_density(5, seed=1)
    assert np.trace(rho).real == pytest.approx(1.0)
    assert cs.min_eigenvalue(rho) > -1e-12
